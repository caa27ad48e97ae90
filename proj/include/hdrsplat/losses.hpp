#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "hdrsplat/image.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/ssim.hpp"
#include "hdrsplat/train_state.hpp"

namespace hdrsplat {

struct LossWeights {
  double lambda_exp = 0.1;
  double lambda_dssim = 0.2;
  double lambda_escale = 0.01;
  double lambda_evar = 0.1;
  double lambda_gamma = 0.1;
  double gamma_prior = 2.2;

  void validate() const;
};

// Regularizer entries are weighted contributions, so
// total == photo + lambda_exp * exp + reg_escale + reg_evar + reg_gamma.
struct LossReport {
  double total = 0.0;
  double photo = 0.0;
  double l1 = 0.0;
  double dssim = 0.0;
  double exp = 0.0;
  double reg_escale = 0.0;
  double reg_evar = 0.0;
  double reg_gamma = 0.0;
};

// -------- photometric reconstruction --------

struct PhotoLoss {
  double value = 0.0;
  double l1 = 0.0;     // mean |pred - obs| over pixels and channels
  double dssim = 0.0;  // 1 - SSIM
  PixelGradient grad;  // ∂value/∂pred
};

// (1 - λ_dssim)·L1 + λ_dssim·(1 - SSIM).
PhotoLoss loss_photo(const LDRImage& pred, const LDRImage& obs,
                     const LossWeights& w);
PhotoLoss loss_photo(const LDRImage& pred, const LDRImage& obs,
                     const SsimReference& obs_stats, const LossWeights& w);

// -------- relative exposure consistency --------

// One term ‖α_ij·lhs − rhs‖₁ with α_ij = e_j / e_i.
struct ExposurePair {
  std::size_t i = 0;
  std::size_t j = 0;
  const LinearHDRImage* lhs = nullptr;
  const LinearHDRImage* rhs = nullptr;
};

struct ExposureLoss {
  double value = 0.0;
  std::vector<PixelGradient> d_lhs;  // one per pair
  std::vector<PixelGradient> d_rhs;
  std::vector<double> d_exposure;    // ∂value/∂e, sized like exposures
};

// Mean absolute deviation over every pixel channel of every pair
// (M = 3·H·W·|pairs|). An empty pair set yields 0 with zero gradients.
ExposureLoss loss_exp(std::span<const ExposurePair> pairs,
                      std::span<const double> exposures);

// Same loss keyed by view index: pair (i, j) compares render(i) against
// render(j).
ExposureLoss loss_exp(
    std::span<const std::pair<std::size_t, const LinearHDRImage*>> renders,
    std::span<const double> exposures,
    std::span<const std::pair<std::size_t, std::size_t>> pairs);

// -------- regularization --------

struct RegLoss {
  double escale = 0.0;  // E[(e - 1)²]
  double evar = 0.0;    // population Var(e)
  double gamma = 0.0;   // E[(γ - γ_prior)²]
  double total = 0.0;   // weighted sum
  std::vector<double> d_exposure;
  std::vector<double> d_gamma;
};

RegLoss loss_reg(std::span<const double> exposures,
                 std::span<const double> gammas, const LossWeights& w);

// -------- total objective --------

struct Batch {
  std::vector<std::size_t> views;                            // scene view indices
  std::vector<std::pair<std::size_t, std::size_t>> pairs;    // (i, j) view indices
};

// Observation-side caches for the loss: rasterizer geometry per view, SSIM
// statistics of each observation, and the mask of unsaturated pixels used by
// the exposure-consistency term. Valid while geometry and observations stay
// fixed.
class LossContext {
 public:
  explicit LossContext(const Scene& scene, RenderSettings settings = {});

  const ViewRasterizer& rasterizer(std::size_t view) const { return *rasterizers_[view]; }
  const SsimReference& ssim_reference(std::size_t view) const { return *ssim_[view]; }
  const std::vector<unsigned char>& unsaturated(std::size_t view) const { return unsaturated_[view]; }
  std::size_t view_count() const { return rasterizers_.size(); }

 private:
  std::vector<std::unique_ptr<ViewRasterizer>> rasterizers_;
  std::vector<std::unique_ptr<SsimReference>> ssim_;
  std::vector<std::vector<unsigned char>> unsaturated_;
};

struct LossResult {
  LossReport report;
  Gradients grads;
};

/// L_total = L_photo + λ_exp·L_exp + L_reg over one batch.
///
/// L_photo is averaged over the batch views. For an exposure pair (i, j) the
/// comparison happens in view i's image plane: the lhs is view i's
/// observation mapped back to linear exposed radiance with its own tone curve
/// (obs^γ_i), the rhs is the render of view i's viewpoint under exposure e_j,
/// so α_ij·lhs = rhs exactly when radiance and photometric parameters are
/// right. Saturated observation pixels are excluded from both sides. L_reg
/// spans all views of the state.
LossResult loss_total(const TrainState& state, const Batch& batch,
                      const LossWeights& w, const LossContext& context);
LossResult loss_total(const TrainState& state, const Batch& batch,
                      const LossWeights& w);

}  // namespace hdrsplat
