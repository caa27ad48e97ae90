#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdrsplat/config.hpp"
#include "hdrsplat/datagen.hpp"
#include "hdrsplat/metrics.hpp"
#include "hdrsplat/optimizer.hpp"

namespace hdrsplat {

// Geometry from the dataset, appearance reset per training.reset_appearance.
Scene initial_training_scene(const Scene& dataset, const RunConfig& cfg);

// Writes the dataset (plus config.txt) into io.out.
DatasetManifest cmd_generate(const RunConfig& cfg);

// Trains on io.dataset, writing loss.csv, checkpoints and config.txt to io.out.
TrainState cmd_train(const RunConfig& cfg);

struct RenderRecord {
  int view_id = 0;
  double exposure = 1.0;
  double gamma = 1.0;
  std::filesystem::path image;  // relative to the render directory
};

// Renders io.checkpoint into io.out with averaged (e, γ), or each view's own
// with render.per_view; render.e / render.gamma override either. Writes
// renders.txt (`R id e gamma path`).
std::vector<RenderRecord> cmd_render(const RunConfig& cfg);
std::vector<RenderRecord> read_render_list(const std::filesystem::path& dir);

// Scores the renders in `renders_dir` (or, if empty, the dataset's own
// observations with unit exposures) against the eval.split images of
// io.dataset. Writes metrics.csv and config.txt to io.out.
MetricsReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& renders_dir);

// delta_psnr(psnr of run_hard, psnr of run_easy); arguments are eval output
// directories or metrics.csv files.
double compare_runs(const std::filesystem::path& run_easy,
                    const std::filesystem::path& run_hard);
// metrics.csv inside an eval directory, or the path itself for a file.
std::filesystem::path metrics_csv(const std::filesystem::path& run);
double read_metric(const std::filesystem::path& csv, const std::string& name);

// Full command-line entry point; returns the process exit code
// (0 ok, 2 config, 3 data, 4 numerical).
int run_cli(int argc, char** argv);

}  // namespace hdrsplat
