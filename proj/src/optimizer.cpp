#include "hdrsplat/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hdrsplat/errors.hpp"

namespace hdrsplat {
namespace {

constexpr char kStateMagic[8] = {'H', 'S', 'P', 'L', 'S', 'T', 'A', '1'};
constexpr double kExposureInitFloor = 0.5;

void adam_update(std::span<double> params, std::span<const double> grads,
                 AdamMoments& moments, double lr, const TrainConfig& cfg,
                 std::int64_t t) {
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = cfg.adam_beta1 * moments.m[i] + (1.0 - cfg.adam_beta1) * g;
    moments.v[i] = cfg.adam_beta2 * moments.v[i] + (1.0 - cfg.adam_beta2) * g * g;
    const double m_hat = moments.m[i] / bc1;
    const double v_hat = moments.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

void check_finite(double v, const char* component, std::int64_t step) {
  if (!std::isfinite(v)) {
    throw NumericalError(component, step, "non-finite value");
  }
}

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint state: unexpected end of data");
  return v;
}

void put_vector(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vector(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 34)) throw DataError("checkpoint state: implausible vector size");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("checkpoint state: unexpected end of data");
  return v;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void run_loop(TrainState& state, const TrainConfig& cfg,
              const TrainOutputs& outputs) {
  const LossContext context(state.scene);
  std::ofstream csv;
  if (!outputs.dir.empty()) {
    std::filesystem::create_directories(outputs.dir);
    const auto csv_path = outputs.dir / "loss.csv";
    const bool fresh = state.step == 0;
    csv.open(csv_path, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw DataError("cannot open for writing: " + csv_path.string());
    if (fresh) write_loss_csv_header(csv);
  }
  while (state.step < cfg.iterations) {
    const LossReport report = train_step(state, cfg, context);
    if (csv.is_open()) write_loss_csv_row(csv, state.step, report);
    if (outputs.on_step) outputs.on_step(state, report);
    if (!outputs.dir.empty() && cfg.checkpoint_every > 0 &&
        state.step % cfg.checkpoint_every == 0 && state.step < cfg.iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%06lld",
                    static_cast<long long>(state.step));
      csv.flush();
      save_checkpoint(state, outputs.dir / "checkpoints" / name);
    }
  }
  if (!outputs.dir.empty()) {
    csv.flush();
    if (!csv) throw DataError("write failed: loss.csv");
    save_checkpoint(state, outputs.dir / "final");
  }
}

}  // namespace

Scene TrainState::export_scene() const {
  Scene out = scene;
  for (std::size_t v = 0; v < out.views.size() && v < log_exposure.size(); ++v) {
    out.views[v].exposure = exposure(v);
    out.views[v].gamma = gamma(v);
  }
  return out;
}

Gradients Gradients::zeros(std::size_t gaussians, std::size_t views,
                           int sh_degree) {
  Gradients g;
  g.color.assign(gaussians, Eigen::Vector3d::Zero());
  if (sh_degree >= 1) {
    g.sh1.assign(gaussians, {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                             Eigen::Vector3d::Zero()});
  }
  g.opacity_logit.assign(gaussians, 0.0);
  g.log_exposure.assign(views, 0.0);
  g.log_gamma.assign(views, 0.0);
  return g;
}

const char* to_string(TrainMode mode) {
  return mode == TrainMode::kP2gs ? "p2gs" : "ldr-baseline";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "p2gs") return TrainMode::kP2gs;
  if (name == "ldr-baseline") return TrainMode::kLdrBaseline;
  throw std::invalid_argument("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  for (const double lr : {lr_color, lr_sh1, lr_opacity, lr_exposure, lr_gamma}) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
      throw std::invalid_argument("learning rates must be finite and >= 0");
    }
  }
  if (pair_count_per_step < 0) throw std::invalid_argument("pair count must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (exposure_init_sigma < 0.0) throw std::invalid_argument("exposure init sigma must be >= 0");
  if (!(gamma_init > 0.0)) throw std::invalid_argument("gamma init must be > 0");
  weights.validate();
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  if (mode == TrainMode::kLdrBaseline) {
    w.lambda_exp = 0.0;
    w.lambda_escale = 0.0;
    w.lambda_evar = 0.0;
    w.lambda_gamma = 0.0;
  }
  return w;
}

TrainState init_state(const Scene& scene, const TrainConfig& cfg) {
  cfg.validate();
  scene.validate(false);
  TrainState state;
  state.scene = scene;
  state.rng.seed(cfg.seed);
  const std::size_t n_views = scene.views.size();
  state.log_exposure.resize(n_views);
  state.log_gamma.resize(n_views);
  for (std::size_t v = 0; v < n_views; ++v) {
    if (cfg.mode == TrainMode::kLdrBaseline) {
      state.log_exposure[v] = 0.0;
      state.log_gamma[v] = 0.0;
      continue;
    }
    double e = 1.0;
    if (cfg.exposure_init_sigma > 0.0) {
      std::normal_distribution<double> draw(1.0, cfg.exposure_init_sigma);
      do {
        e = draw(state.rng);
      } while (!(e > kExposureInitFloor));
    }
    state.log_exposure[v] = std::log(e);
    state.log_gamma[v] = std::log(cfg.gamma_init);
  }
  const std::size_t n = scene.gaussians.size();
  state.color.reset(3 * n);
  state.sh1.reset(scene.sh_degree >= 1 ? 9 * n : 0);
  state.opacity.reset(n);
  state.exposure_moments.reset(n_views);
  state.gamma_moments.reset(n_views);
  state.step = 0;
  return state;
}

Batch sample_batch(TrainState& state, const TrainConfig& cfg) {
  Batch batch;
  const std::size_t n = state.scene.views.size();
  for (std::size_t v = 0; v < n; ++v) batch.views.push_back(v);
  if (cfg.mode == TrainMode::kP2gs && n >= 2) {
    for (int k = 0; k < cfg.pair_count_per_step; ++k) {
      std::uniform_int_distribution<std::size_t> first(0, n - 1);
      std::uniform_int_distribution<std::size_t> second(0, n - 2);
      const std::size_t i = first(state.rng);
      std::size_t j = second(state.rng);
      if (j >= i) ++j;
      batch.pairs.emplace_back(i, j);
    }
  }
  return batch;
}

LossReport train_step(TrainState& state, const TrainConfig& cfg,
                      const LossContext& context) {
  const Batch batch = sample_batch(state, cfg);
  const LossResult result =
      loss_total(state, batch, cfg.effective_weights(), context);
  const LossReport& r = result.report;
  const std::int64_t step = state.step + 1;
  check_finite(r.photo, "photo", step);
  check_finite(r.exp, "exp", step);
  check_finite(r.reg_escale, "reg_escale", step);
  check_finite(r.reg_evar, "reg_evar", step);
  check_finite(r.reg_gamma, "reg_gamma", step);
  check_finite(r.total, "total", step);

  const Gradients& g = result.grads;
  Scene& scene = state.scene;
  const std::size_t n = scene.gaussians.size();

  std::vector<double> params(3 * n), grads(3 * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int c = 0; c < 3; ++c) {
      params[3 * k + c] = scene.gaussians[k].color[c];
      grads[3 * k + c] = g.color[k][c];
      check_finite(grads[3 * k + c], "color gradient", step);
    }
  }
  adam_update(params, grads, state.color, cfg.lr_color, cfg, step);
  for (std::size_t k = 0; k < n; ++k) {
    for (int c = 0; c < 3; ++c) {
      scene.gaussians[k].color[c] = std::max(0.0, params[3 * k + c]);
    }
  }

  if (scene.sh_degree >= 1) {
    params.resize(9 * n);
    grads.resize(9 * n);
    for (std::size_t k = 0; k < n; ++k) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          params[9 * k + 3 * b + c] = scene.gaussians[k].sh1[b][c];
          grads[9 * k + 3 * b + c] = g.sh1[k][b][c];
        }
      }
    }
    adam_update(params, grads, state.sh1, cfg.lr_sh1, cfg, step);
    for (std::size_t k = 0; k < n; ++k) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          scene.gaussians[k].sh1[b][c] = params[9 * k + 3 * b + c];
        }
      }
    }
  }

  params.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    params[k] = scene.gaussians[k].opacity_logit;
    check_finite(g.opacity_logit[k], "opacity gradient", step);
  }
  adam_update(params, g.opacity_logit, state.opacity, cfg.lr_opacity, cfg, step);
  for (std::size_t k = 0; k < n; ++k) scene.gaussians[k].opacity_logit = params[k];

  if (cfg.mode == TrainMode::kP2gs) {
    for (const double d : g.log_exposure) check_finite(d, "exposure gradient", step);
    for (const double d : g.log_gamma) check_finite(d, "gamma gradient", step);
    adam_update(state.log_exposure, g.log_exposure, state.exposure_moments,
                cfg.lr_exposure, cfg, step);
    adam_update(state.log_gamma, g.log_gamma, state.gamma_moments, cfg.lr_gamma,
                cfg, step);
  }
  state.step = step;
  return r;
}

LossReport train_step(TrainState& state, const TrainConfig& cfg) {
  return train_step(state, cfg, LossContext(state.scene));
}

TrainState train(const Scene& scene, const TrainConfig& cfg,
                 const TrainOutputs& outputs) {
  scene.validate(true);
  TrainState state = init_state(scene, cfg);
  run_loop(state, cfg, outputs);
  return state;
}

TrainState resume(const Scene& scene, const std::filesystem::path& checkpoint,
                  const TrainConfig& cfg, const TrainOutputs& outputs) {
  cfg.validate();
  TrainState state = load_checkpoint(checkpoint);
  if (state.scene.views.size() != scene.views.size()) {
    throw DataError("checkpoint view count does not match the dataset");
  }
  for (auto& v : state.scene.views) {
    v.observation = scene.view_by_id(v.id).observation;
  }
  state.scene.validate(true);
  run_loop(state, cfg, outputs);
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Scene exported = state.export_scene();
  save_scene(exported, dir / "scene.txt");

  {
    std::ofstream out(dir / "photometric.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "photometric.txt").string());
    for (const auto& v : exported.views) {
      out << "P " << v.id << ' ' << fmt9(v.exposure) << ' ' << fmt9(v.gamma) << '\n';
    }
  }

  std::ofstream out(dir / "state.bin", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "state.bin").string());
  out.write(kStateMagic, sizeof(kStateMagic));
  write_scene_binary(state.scene, out);
  put_vector(out, state.log_exposure);
  put_vector(out, state.log_gamma);
  for (const AdamMoments* m : {&state.color, &state.sh1, &state.opacity,
                               &state.exposure_moments, &state.gamma_moments}) {
    put_vector(out, m->m);
    put_vector(out, m->v);
  }
  put<std::int64_t>(out, state.step);
  std::ostringstream rng;
  rng << state.rng;
  const std::string rng_text = rng.str();
  put<std::uint64_t>(out, rng_text.size());
  out.write(rng_text.data(), static_cast<std::streamsize>(rng_text.size()));
  if (!out) throw DataError("write failed: " + (dir / "state.bin").string());
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "state.bin";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint state: " + path.string());
  char magic[sizeof(kStateMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kStateMagic, sizeof(magic)) != 0) {
    throw DataError("checkpoint state: bad magic in " + path.string());
  }
  TrainState state;
  state.scene = read_scene_binary(in);
  state.log_exposure = get_vector(in);
  state.log_gamma = get_vector(in);
  for (AdamMoments* m : {&state.color, &state.sh1, &state.opacity,
                         &state.exposure_moments, &state.gamma_moments}) {
    m->m = get_vector(in);
    m->v = get_vector(in);
  }
  state.step = get<std::int64_t>(in);
  const auto len = get<std::uint64_t>(in);
  if (len > (1u << 20)) throw DataError("checkpoint state: bad RNG block");
  std::string rng_text(len, '\0');
  in.read(rng_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint state: truncated RNG block");
  std::istringstream rng(rng_text);
  rng >> state.rng;
  if (state.log_exposure.size() != state.scene.views.size() ||
      state.log_gamma.size() != state.scene.views.size()) {
    throw DataError("checkpoint state: photometric parameter count mismatch");
  }
  return state;
}

void write_loss_csv_header(std::ostream& out) {
  out << "step,total,photo,l1,dssim,exp,reg_escale,reg_evar,reg_gamma\n";
}

void write_loss_csv_row(std::ostream& out, std::int64_t step,
                        const LossReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                static_cast<long long>(step), r.total, r.photo, r.l1, r.dssim,
                r.exp, r.reg_escale, r.reg_evar, r.reg_gamma);
  out << buf;
}

}  // namespace hdrsplat
