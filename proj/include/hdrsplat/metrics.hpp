#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hdrsplat/image.hpp"

namespace hdrsplat {

enum class HisNorm {
  kRms,  // ‖·‖₂ / √(3HW), resolution independent (default)
  kRaw,  // plain L2 norm over all pixels and channels
};

struct MetricsReport {
  double psnr = 0.0;  // +inf when every compared pair is identical
  double ssim = 0.0;
  double his = 0.0;
  double std_luminance = 0.0;
  std::optional<double> delta_psnr;
};

// 10·log10(1/MSE) over all pixels and channels; +inf for identical images.
double psnr(const LDRImage& a, const LDRImage& b);

// Shared with the loss (see ssim.hpp); declared there as hdrsplat::ssim.

// Mean over consecutive pairs of ‖decode(R_t)·e_t − decode(R_{t+1})·e_{t+1}‖,
// decode being the sRGB inverse OETF. Requires at least two frames.
double his(std::span<const LDRImage> frames, std::span<const double> exposures,
           HisNorm norm = HisNorm::kRms);

// Same, for several independent time-ordered sequences (one per camera): the
// pair distances of all sequences are pooled and averaged.
double his_sequences(const std::vector<std::vector<const LDRImage*>>& frames,
                     const std::vector<std::vector<double>>& exposures,
                     HisNorm norm = HisNorm::kRms);

// Mean BT.601 luminance of one frame.
double mean_luminance(const LDRImage& frame);

// Population standard deviation of the per-frame mean luminances.
double std_luminance(std::span<const LDRImage> frames);
double std_luminance(const std::vector<const LDRImage*>& frames);

// psnr_hard − psnr_easy; negative means the harder setting lost quality.
double delta_psnr(double psnr_hard, double psnr_easy);

}  // namespace hdrsplat
