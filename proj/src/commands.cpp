#include "hdrsplat/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "hdrsplat/errors.hpp"
#include "hdrsplat/image_io.hpp"
#include "hdrsplat/parallel.hpp"
#include "hdrsplat/photometric.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/ssim.hpp"

namespace hdrsplat {
namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::filesystem::path require_path(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw ConfigError("missing required setting " + key);
  return v;
}

std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  const auto out = require_path(cfg, "io.out");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec || !std::filesystem::is_directory(out)) {
    throw DataError("cannot create output directory " + out.string() +
                    (ec ? ": " + ec.message() : ""));
  }
  return out;
}

std::vector<int> parse_view_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      ids.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("render.views: bad view id '" + item + "'");
    }
  }
  return ids;
}

void write_csv_row(std::ostream& out, const std::string& name, double v) {
  out << name << ',' << (std::isinf(v) ? (v > 0 ? "inf" : "-inf") : fmt9(v)) << '\n';
}

}  // namespace

Scene initial_training_scene(const Scene& dataset, const RunConfig& cfg) {
  Scene scene = dataset;
  if (!cfg.get_bool("training.reset_appearance")) return scene;
  const double color = cfg.get_double("training.init_color");
  const double opacity = cfg.get_double("training.init_opacity");
  if (color < 0.0) throw ConfigError("training.init_color must be >= 0");
  if (!(opacity > 0.0 && opacity < 1.0)) {
    throw ConfigError("training.init_opacity must lie in (0, 1)");
  }
  for (auto& g : scene.gaussians) {
    g.color = Eigen::Vector3d::Constant(color);
    g.opacity_logit = logit(opacity);
    for (auto& b : g.sh1) b.setZero();
  }
  return scene;
}

DatasetManifest cmd_generate(const RunConfig& cfg) {
  const RigSpec rig = cfg.rig_spec();
  const ExposurePolicy policy = cfg.exposure_policy();
  const long long n = cfg.get_int("dataset.gaussians");
  if (n < 1) throw ConfigError("dataset.gaussians must be >= 1");
  const auto out = prepare_out_dir(cfg);
  const Scene scene = build_procedural_scene(
      static_cast<std::uint64_t>(cfg.get_int("dataset.seed")), static_cast<int>(n), rig);
  GenerateOptions options;
  options.write_hdr = cfg.get_bool("dataset.write_hdr");
  DatasetManifest m = generate(scene, rig, policy, out, options);
  cfg.write(out / "config.txt");
  return m;
}

TrainState cmd_train(const RunConfig& cfg) {
  const TrainConfig tc = cfg.train_config();
  const Scene data = load_dataset(require_path(cfg, "io.dataset"));
  const auto out = prepare_out_dir(cfg);
  cfg.write(out / "config.txt");
  TrainOutputs outputs;
  outputs.dir = out;
  const std::string& resume_from = cfg.get("io.resume");
  if (!resume_from.empty()) return resume(data, resume_from, tc, outputs);
  return train(initial_training_scene(data, cfg), tc, outputs);
}

std::vector<RenderRecord> cmd_render(const RunConfig& cfg) {
  const TrainState state = load_checkpoint(require_path(cfg, "io.checkpoint"));
  const Scene scene = state.export_scene();
  const PhotometricParams averaged =
      render_params_for_eval(std::span<const CameraView>(scene.views));
  const bool per_view = cfg.get_bool("render.per_view");
  const bool e_set = !cfg.get("render.e").empty();
  const bool g_set = !cfg.get("render.gamma").empty();
  auto params_for = [&](const CameraView& view) {
    PhotometricParams p = per_view ? PhotometricParams{view.exposure, view.gamma} : averaged;
    if (e_set) p.exposure = cfg.get_double("render.e");
    if (g_set) p.gamma = cfg.get_double("render.gamma");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  };
  for (const auto& v : scene.views) params_for(v);
  std::vector<int> ids = parse_view_list(cfg.get("render.views"));
  if (ids.empty()) {
    for (const auto& v : scene.views) ids.push_back(v.id);
  }
  for (const int id : ids) {
    if (!scene.view_index(id)) throw DataError("unknown view id " + std::to_string(id));
  }
  const auto out = prepare_out_dir(cfg);
  const bool hdr = cfg.get_bool("render.write_hdr");
  std::vector<RenderRecord> records;
  for (const int id : ids) {
    const CameraView& view = scene.view_by_id(id);
    const LinearHDRImage radiance = render_hdr(scene, view);
    char name[32];
    std::snprintf(name, sizeof(name), "view_%04d", id);
    const PhotometricParams params = params_for(view);
    RenderRecord r{id, params.exposure, params.gamma, std::string(name) + ".ppm"};
    write_ppm(form_ldr(radiance, params), out / r.image);
    if (hdr) write_pfm(radiance, out / (std::string(name) + ".pfm"));
    records.push_back(r);
  }
  std::ofstream list(out / "renders.txt", std::ios::binary);
  for (const auto& r : records) {
    list << "R " << r.view_id << ' ' << fmt9(r.exposure) << ' ' << fmt9(r.gamma)
         << ' ' << r.image.generic_string() << '\n';
  }
  list.flush();
  if (!list) throw DataError("write failed: " + (out / "renders.txt").string());
  cfg.write(out / "config.txt");
  return records;
}

std::vector<RenderRecord> read_render_list(const std::filesystem::path& dir) {
  const auto path = dir / "renders.txt";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RenderRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag, img;
    RenderRecord r;
    if (!(ss >> tag >> r.view_id >> r.exposure >> r.gamma >> img) || tag != "R") {
      throw ParseError(path.string(), line_no, out.size() + 1, "expected `R id e gamma path`");
    }
    r.image = img;
    out.push_back(r);
  }
  return out;
}

MetricsReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& renders_dir) {
  const auto manifest_path = require_path(cfg, "io.dataset");
  const std::string& split_name = cfg.get("eval.split");
  DatasetSplit split;
  if (split_name == "gt") {
    split = DatasetSplit::kGroundTruth;
  } else if (split_name == "observed") {
    split = DatasetSplit::kObserved;
  } else {
    throw ConfigError("eval.split must be gt or observed, got '" + split_name + "'");
  }
  const HisNorm norm = cfg.his_norm();
  const Scene reference = load_dataset(manifest_path, split);
  const int cams = DatasetManifest::read(manifest_path).camera_count();

  struct Frame {
    int id;
    double exposure;
    LDRImage image;
  };
  std::vector<Frame> frames;
  if (renders_dir.empty()) {
    for (const auto& v : load_dataset(manifest_path, DatasetSplit::kObserved).views) {
      frames.push_back({v.id, 1.0, v.observation});
    }
  } else {
    for (const auto& r : read_render_list(renders_dir)) {
      frames.push_back({r.view_id, r.exposure, read_ppm(renders_dir / r.image)});
    }
  }
  if (frames.empty()) throw DataError("eval: nothing to evaluate");
  std::sort(frames.begin(), frames.end(),
            [](const Frame& a, const Frame& b) { return a.id < b.id; });

  const auto out = prepare_out_dir(cfg);
  std::ofstream csv(out / "metrics.csv", std::ios::binary);
  csv << "metric,value\n";
  MetricsReport report;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::size_t finite = 0;
  bool all_identical = true;
  std::map<int, std::vector<const Frame*>> by_camera;
  std::vector<const LDRImage*> images;
  for (const auto& f : frames) {
    if (!reference.view_index(f.id)) {
      throw DataError("eval: render for view " + std::to_string(f.id) +
                      " has no reference image");
    }
    const LDRImage& ref = reference.view_by_id(f.id).observation;
    if (!f.image.same_shape(ref)) {
      throw DataError("eval: size mismatch for view " + std::to_string(f.id));
    }
    const double p = psnr(f.image, ref);
    const double s = ssim(f.image, ref);
    write_csv_row(csv, "psnr_view_" + std::to_string(f.id), p);
    write_csv_row(csv, "ssim_view_" + std::to_string(f.id), s);
    // Identical pairs give +inf; the mean runs over the finite ones.
    if (!std::isinf(p)) {
      all_identical = false;
      psnr_sum += p;
      ++finite;
    }
    ssim_sum += s;
    by_camera[f.id % cams].push_back(&f);
    images.push_back(&f.image);
  }
  const auto n = static_cast<double>(frames.size());
  report.psnr = all_identical ? std::numeric_limits<double>::infinity()
                              : psnr_sum / static_cast<double>(finite);
  report.ssim = ssim_sum / n;
  std::vector<std::vector<const LDRImage*>> seqs;
  std::vector<std::vector<double>> exps;
  for (const auto& [cam, list] : by_camera) {
    seqs.emplace_back();
    exps.emplace_back();
    for (const Frame* f : list) {
      seqs.back().push_back(&f->image);
      exps.back().push_back(f->exposure);
    }
  }
  bool have_pairs = false;
  for (const auto& s : seqs) have_pairs = have_pairs || s.size() >= 2;
  report.his = have_pairs ? his_sequences(seqs, exps, norm) : 0.0;
  report.std_luminance = std_luminance(images);
  write_csv_row(csv, "psnr", report.psnr);
  write_csv_row(csv, "ssim", report.ssim);
  write_csv_row(csv, "his", report.his);
  write_csv_row(csv, "std_luminance", report.std_luminance);
  csv.flush();
  if (!csv) throw DataError("write failed: " + (out / "metrics.csv").string());
  cfg.write(out / "config.txt");

  std::cout << "summary\n"
            << "  frames " << frames.size() << '\n'
            << "  psnr " << fmt9(report.psnr) << '\n'
            << "  ssim " << fmt9(report.ssim) << '\n'
            << "  his " << fmt9(report.his) << '\n'
            << "  std_luminance " << fmt9(report.std_luminance) << '\n';
  return report;
}

double read_metric(const std::filesystem::path& csv, const std::string& name) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open " + csv.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != name) continue;
    const std::string v = line.substr(comma + 1);
    if (v == "inf") return std::numeric_limits<double>::infinity();
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw DataError(csv.string() + ": bad value for " + name);
    }
  }
  throw DataError(csv.string() + ": no metric " + name);
}

std::filesystem::path metrics_csv(const std::filesystem::path& run) {
  return std::filesystem::is_directory(run) ? run / "metrics.csv" : run;
}

double compare_runs(const std::filesystem::path& run_easy,
                    const std::filesystem::path& run_hard) {
  return delta_psnr(read_metric(metrics_csv(run_hard), "psnr"),
                    read_metric(metrics_csv(run_easy), "psnr"));
}

namespace {

struct FlagBinding {
  std::string flag;
  std::string key;
  std::string help;
};

class Bound {
 public:
  void add(CLI::App* app, const std::vector<FlagBinding>& flags) {
    for (const auto& f : flags) {
      auto& slot = values_[f.key];
      app->add_option(f.flag, slot, f.help);
    }
  }
  void add_switch(CLI::App* app, const std::string& flag, const std::string& key,
                  const std::string& help) {
    switches_[key] = false;
    app->add_flag(flag, switches_[key], help);
  }
  void apply(RunConfig& cfg) const {
    for (const auto& [key, value] : values_) {
      if (!value.empty()) cfg.set(key, value);
    }
    for (const auto& [key, on] : switches_) {
      if (on) cfg.set(key, "true");
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> switches_;
};

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int fail(const char* kind, int code, const std::string& msg) {
  std::cerr << "hdrsplat: error: kind=" << kind << " code=" << code
            << " message=" << one_line(msg) << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Photometrically consistent Gaussian splatting toolkit"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads, "worker threads (0 = auto; default from HDRSPLAT_THREADS)");

  std::map<CLI::App*, Bound> bound;
  std::map<CLI::App*, std::string> config_files;
  std::map<CLI::App*, std::vector<std::string>> sets;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_files[sub], "config file of `section.key = value` lines");
    sub->add_option("--set", sets[sub], "override any key: section.key=value");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic multi-exposure dataset");
  common(gen);
  bound[gen].add(gen, {
      {"--out", "io.out", "output directory"},
      {"--preset", "dataset.preset", "iso-const or iso-var"},
      {"--std", "dataset.iso_std", "ISO standard deviation"},
      {"--iso-mean", "dataset.iso_mean", "ISO mean"},
      {"--seed", "dataset.seed", "generator seed"},
      {"--gaussians", "dataset.gaussians", "procedural Gaussian count"},
      {"--frames", "dataset.frames", "frame count"},
      {"--width", "dataset.width", "image width"},
      {"--height", "dataset.height", "image height"},
      {"--hfov", "dataset.hfov", "horizontal FOV in degrees"},
  });
  bound[gen].add_switch(gen, "--write-hdr", "dataset.write_hdr", "also write PFM renders");

  CLI::App* tr = app.add_subcommand("train", "fit appearance and photometric parameters");
  common(tr);
  bound[tr].add(tr, {
      {"--dataset", "io.dataset", "dataset manifest"},
      {"--out", "io.out", "run directory"},
      {"--resume", "io.resume", "checkpoint directory to continue from"},
      {"--mode", "training.mode", "p2gs or ldr-baseline"},
      {"--iterations", "training.iterations", "optimizer steps"},
      {"--seed", "training.seed", "training seed"},
      {"--pairs", "training.pairs", "exposure pairs per step"},
      {"--checkpoint-every", "training.checkpoint_every", "checkpoint interval"},
      {"--lambda-exp", "losses.lambda_exp", "exposure-consistency weight"},
      {"--lambda-dssim", "losses.lambda_dssim", "DSSIM weight"},
      {"--lambda-escale", "losses.lambda_escale", "exposure-scale weight"},
      {"--lambda-evar", "losses.lambda_evar", "exposure-variance weight"},
      {"--lambda-gamma", "losses.lambda_gamma", "gamma-prior weight"},
  });

  CLI::App* rd = app.add_subcommand("render", "render a checkpoint");
  common(rd);
  bound[rd].add(rd, {
      {"--checkpoint", "io.checkpoint", "checkpoint directory"},
      {"--out", "io.out", "output directory"},
      {"--views", "render.views", "comma separated view ids"},
      {"--e", "render.e", "exposure override"},
      {"--gamma", "render.gamma", "gamma override"},
  });
  bound[rd].add_switch(rd, "--write-hdr", "render.write_hdr", "also write PFM renders");
  bound[rd].add_switch(rd, "--per-view", "render.per_view",
                       "use each view's own (e, gamma) instead of the average");

  CLI::App* ev = app.add_subcommand("eval", "score renders against a dataset");
  common(ev);
  bound[ev].add(ev, {
      {"--dataset", "io.dataset", "dataset manifest"},
      {"--renders", "io.renders", "render directory"},
      {"--out", "io.out", "output directory"},
      {"--split", "eval.split", "gt or observed"},
      {"--his-norm", "eval.his_norm", "rms or raw"},
  });
  std::vector<std::string> compare;
  ev->add_option("--compare", compare, "two eval runs (easy, hard): emit delta_psnr")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", 2, e.what());
  }

  try {
    if (threads >= 0) set_worker_count(threads);
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg;
    if (!config_files[sub].empty()) cfg.load_file(config_files[sub]);
    bound[sub].apply(cfg);
    apply_overrides(cfg, sets[sub]);

    if (sub == gen) {
      const auto m = cmd_generate(cfg);
      std::cout << "generated " << m.entries.size() << " views in " << cfg.get("io.out") << '\n';
    } else if (sub == tr) {
      const TrainState s = cmd_train(cfg);
      std::cout << "trained " << s.step << " steps into " << cfg.get("io.out") << '\n';
    } else if (sub == rd) {
      const auto r = cmd_render(cfg);
      std::cout << "rendered " << r.size() << " views into " << cfg.get("io.out") << '\n';
    } else if (sub == ev) {
      if (!compare.empty()) {
        const double d = compare_runs(compare[0], compare[1]);
        std::cout << "metric,value\n";
        write_csv_row(std::cout, "delta_psnr", d);
        if (!cfg.get("io.out").empty()) {
          const auto out = prepare_out_dir(cfg);
          std::ofstream csv(out / "compare.csv", std::ios::binary);
          csv << "metric,value\n";
          write_csv_row(csv, "psnr_easy", read_metric(metrics_csv(compare[0]), "psnr"));
          write_csv_row(csv, "psnr_hard", read_metric(metrics_csv(compare[1]), "psnr"));
          write_csv_row(csv, "delta_psnr", d);
          if (!csv) throw DataError("write failed: compare.csv");
        }
      } else {
        cmd_eval(cfg, cfg.get("io.renders"));
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", 2, e.what());
  } catch (const DataError& e) {
    return fail("data", 3, e.what());
  } catch (const NumericalError& e) {
    return fail("numerical", 4, e.what());
  } catch (const std::invalid_argument& e) {
    return fail("config", 2, e.what());
  } catch (const std::exception& e) {
    return fail("data", 3, e.what());
  }
}

}  // namespace hdrsplat
