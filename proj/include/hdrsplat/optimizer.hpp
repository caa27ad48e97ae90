#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "hdrsplat/losses.hpp"
#include "hdrsplat/train_state.hpp"

namespace hdrsplat {

enum class TrainMode {
  kP2gs,         // linear radiance + per-view exposure and gamma
  kLdrBaseline,  // colors fitted directly to LDR, e ≡ 1, γ ≡ 1, no L_exp
};

const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::kP2gs;
  int iterations = 600;
  double lr_color = 1e-2;
  double lr_sh1 = 2.5e-3;
  double lr_opacity = 5e-3;
  double lr_exposure = 5e-3;
  double lr_gamma = 5e-3;
  LossWeights weights;
  std::uint64_t seed = 0;
  int pair_count_per_step = 1;
  int checkpoint_every = 0;  // 0 disables intermediate checkpoints
  double exposure_init_sigma = 0.05;
  double gamma_init = kDefaultGammaInit;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  static constexpr double kDefaultGammaInit = 2.2;

  void validate() const;
  // Weights actually optimized: the LDR baseline drops L_exp and L_reg.
  LossWeights effective_weights() const;
};

// Exposures ~ N(1, σ²) truncated to > 0.5 from a generator seeded with
// cfg.seed, gammas = cfg.gamma_init, zeroed moments. The LDR baseline starts
// (and stays) at e = γ = 1.
TrainState init_state(const Scene& scene, const TrainConfig& cfg);

// Full batch over all views plus cfg.pair_count_per_step random pairs drawn
// from state.rng. Throws NumericalError naming the first non-finite term.
LossReport train_step(TrainState& state, const TrainConfig& cfg,
                      const LossContext& context);
LossReport train_step(TrainState& state, const TrainConfig& cfg);

Batch sample_batch(TrainState& state, const TrainConfig& cfg);

struct TrainOutputs {
  // When set: loss.csv, checkpoints/step_NNNNNN/ and final/ are written here.
  std::filesystem::path dir;
  std::function<void(const TrainState&, const LossReport&)> on_step;
};

TrainState train(const Scene& scene, const TrainConfig& cfg,
                 const TrainOutputs& outputs = {});

// Continues a run from a checkpoint directory up to cfg.iterations total
// steps. `scene` supplies the observations (matched by view id).
TrainState resume(const Scene& scene, const std::filesystem::path& checkpoint,
                  const TrainConfig& cfg, const TrainOutputs& outputs = {});

// Checkpoint directory: scene.txt, photometric.txt (`P id e gamma`), state.bin.
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& dir);

void write_loss_csv_header(std::ostream& out);
void write_loss_csv_row(std::ostream& out, std::int64_t step,
                        const LossReport& report);

}  // namespace hdrsplat
