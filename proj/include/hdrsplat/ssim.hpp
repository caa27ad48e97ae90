#pragma once

#include <vector>

#include "hdrsplat/image.hpp"

namespace hdrsplat {

// SSIM with an 11×11 Gaussian window (σ = 1.5), C1 = 0.01², C2 = 0.03², zero
// padding at the borders, computed per channel and averaged over all pixels
// and channels. Shared by the photometric loss and the evaluation metrics.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Caches the local statistics of a fixed reference image so that repeated
// comparisons against it (one per training step) only blur the prediction.
class SsimReference {
 public:
  explicit SsimReference(const LDRImage& reference);

  double evaluate(const LDRImage& image) const;
  // Also writes ∂SSIM/∂image into grad (resized as needed).
  double evaluate(const LDRImage& image, PixelGradient& grad) const;

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  double run(const LDRImage& image, PixelGradient* grad) const;

  int width_;
  int height_;
  std::vector<double> ref_;     // planar, channel-major
  std::vector<double> mu_ref_;
  std::vector<double> sq_ref_;  // blurred ref²
};

double ssim(const LDRImage& a, const LDRImage& b);

}  // namespace hdrsplat
