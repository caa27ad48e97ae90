#include "hdrsplat/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "hdrsplat/errors.hpp"

namespace hdrsplat {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = {
      {"dataset.seed", "0", "procedural scene and ISO stream seed"},
      {"dataset.gaussians", "500", "procedural Gaussian count"},
      {"dataset.width", "192", "image width"},
      {"dataset.height", "130", "image height"},
      {"dataset.hfov", "60", "horizontal field of view, degrees"},
      {"dataset.frames", "8", "frame count"},
      {"dataset.fps", "10", "frame rate, Hz"},
      {"dataset.speed", "5", "ego speed, m/s"},
      {"dataset.preset", "iso-const", "iso-const or iso-var"},
      {"dataset.iso_mean", "8", "ISO mean"},
      {"dataset.iso_std", "2", "ISO standard deviation (iso-var)"},
      {"dataset.iso_floor", "1", "lowest ISO"},
      {"dataset.write_hdr", "false", "also dump linear renders as PFM"},
      {"training.mode", "p2gs", "p2gs or ldr-baseline"},
      {"training.iterations", "600", "optimizer steps"},
      {"training.seed", "0", "training RNG seed"},
      {"training.lr_color", "0.01", "Adam rate for colors"},
      {"training.lr_sh1", "0.0025", "Adam rate for SH degree-1 coefficients"},
      {"training.lr_opacity", "0.005", "Adam rate for opacity logits"},
      {"training.lr_exposure", "0.005", "Adam rate for log exposure"},
      {"training.lr_gamma", "0.005", "Adam rate for log gamma"},
      {"training.pairs", "1", "exposure-consistency pairs per step"},
      {"training.checkpoint_every", "0", "steps between checkpoints, 0 = final only"},
      {"training.exposure_init_sigma", "0.05", "spread of the initial exposures"},
      {"training.gamma_init", "2.2", "initial gamma"},
      {"training.reset_appearance", "true", "start from flat colors and opacities"},
      {"training.init_color", "0.25", "initial color when resetting appearance"},
      {"training.init_opacity", "0.7", "initial opacity when resetting appearance"},
      {"losses.lambda_exp", "0.1", "exposure-consistency weight"},
      {"losses.lambda_dssim", "0.2", "DSSIM share of the photometric loss"},
      {"losses.lambda_escale", "0.01", "exposure-scale regularizer weight"},
      {"losses.lambda_evar", "0.1", "exposure-variance regularizer weight"},
      {"losses.lambda_gamma", "0.1", "gamma-prior regularizer weight"},
      {"losses.gamma_prior", "2.2", "gamma prior"},
      {"eval.his_norm", "rms", "rms or raw"},
      {"eval.split", "gt", "reference split for PSNR/SSIM: gt or observed"},
      {"render.e", "", "exposure override"},
      {"render.gamma", "", "gamma override"},
      {"render.views", "", "comma separated view ids, empty = all"},
      {"render.write_hdr", "false", "also write PFM renders"},
      {"render.per_view", "false", "render each view with its own (e, gamma)"},
      {"io.dataset", "", "dataset manifest"},
      {"io.out", "", "output directory"},
      {"io.checkpoint", "", "checkpoint directory"},
      {"io.resume", "", "checkpoint to resume training from"},
      {"io.renders", "", "render directory to evaluate, empty = dataset observations"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_registry()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
  explicit_[key] = true;
}

bool RunConfig::is_set_explicitly(const std::string& key) const {
  return explicit_.contains(key);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("config key " + key + ": expected a number, got '" + s + "'");
  }
  return v;
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + s + "'");
}

RigSpec RunConfig::rig_spec() const {
  RigSpec rig;
  rig.width = static_cast<int>(get_int("dataset.width"));
  rig.height = static_cast<int>(get_int("dataset.height"));
  rig.hfov_deg = get_double("dataset.hfov");
  rig.frame_count = static_cast<int>(get_int("dataset.frames"));
  rig.frame_rate_hz = get_double("dataset.fps");
  rig.speed_mps = get_double("dataset.speed");
  try {
    rig.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rig;
}

ExposurePolicy RunConfig::exposure_policy() const {
  ExposurePolicy p;
  const std::string& preset = get("dataset.preset");
  if (preset == "iso-const") {
    p.mode = ExposureMode::kConst;
  } else if (preset == "iso-var") {
    p.mode = ExposureMode::kVar;
  } else {
    throw ConfigError("dataset.preset must be iso-const or iso-var, got '" + preset + "'");
  }
  p.iso_mean = get_double("dataset.iso_mean");
  p.iso_std = get_double("dataset.iso_std");
  p.iso_floor = static_cast<int>(get_int("dataset.iso_floor"));
  p.seed = static_cast<std::uint64_t>(get_int("dataset.seed"));
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  try {
    c.mode = train_mode_from_string(get("training.mode"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.iterations = static_cast<int>(get_int("training.iterations"));
  c.seed = static_cast<std::uint64_t>(get_int("training.seed"));
  c.lr_color = get_double("training.lr_color");
  c.lr_sh1 = get_double("training.lr_sh1");
  c.lr_opacity = get_double("training.lr_opacity");
  c.lr_exposure = get_double("training.lr_exposure");
  c.lr_gamma = get_double("training.lr_gamma");
  c.pair_count_per_step = static_cast<int>(get_int("training.pairs"));
  c.checkpoint_every = static_cast<int>(get_int("training.checkpoint_every"));
  c.exposure_init_sigma = get_double("training.exposure_init_sigma");
  c.gamma_init = get_double("training.gamma_init");
  c.weights.lambda_exp = get_double("losses.lambda_exp");
  c.weights.lambda_dssim = get_double("losses.lambda_dssim");
  c.weights.lambda_escale = get_double("losses.lambda_escale");
  c.weights.lambda_evar = get_double("losses.lambda_evar");
  c.weights.lambda_gamma = get_double("losses.lambda_gamma");
  c.weights.gamma_prior = get_double("losses.gamma_prior");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

HisNorm RunConfig::his_norm() const {
  const std::string& s = get("eval.his_norm");
  if (s == "rms") return HisNorm::kRms;
  if (s == "raw") return HisNorm::kRaw;
  throw ConfigError("eval.his_norm must be rms or raw, got '" + s + "'");
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace hdrsplat
