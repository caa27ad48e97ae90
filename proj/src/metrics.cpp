#include "hdrsplat/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hdrsplat/photometric.hpp"

namespace hdrsplat {
namespace {

double pair_distance(const LDRImage& a, double ea, const LDRImage& b, double eb,
                     HisNorm norm) {
  require_same_shape(a, b, "his");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = srgb_oetf_inverse(a[i]) * ea - srgb_oetf_inverse(b[i]) * eb;
    sum += d * d;
  }
  if (norm == HisNorm::kRms) sum /= static_cast<double>(a.size());
  return std::sqrt(sum);
}

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("std_luminance: no frames");
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

double psnr(const LDRImage& a, const LDRImage& b) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw std::invalid_argument("psnr: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(a.size()) / sum);
}

double his(std::span<const LDRImage> frames, std::span<const double> exposures,
           HisNorm norm) {
  if (frames.size() < 2) throw std::invalid_argument("his: need at least two frames");
  if (exposures.size() != frames.size()) {
    throw std::invalid_argument("his: one exposure per frame required");
  }
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    total += pair_distance(frames[t], exposures[t], frames[t + 1],
                           exposures[t + 1], norm);
  }
  return total / static_cast<double>(frames.size() - 1);
}

double his_sequences(const std::vector<std::vector<const LDRImage*>>& frames,
                     const std::vector<std::vector<double>>& exposures,
                     HisNorm norm) {
  if (frames.size() != exposures.size()) {
    throw std::invalid_argument("his: one exposure list per sequence required");
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < frames.size(); ++s) {
    const auto& seq = frames[s];
    if (seq.size() != exposures[s].size()) {
      throw std::invalid_argument("his: one exposure per frame required");
    }
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      total += pair_distance(*seq[t], exposures[s][t], *seq[t + 1],
                             exposures[s][t + 1], norm);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("his: need at least two frames");
  return total / static_cast<double>(pairs);
}

double mean_luminance(const LDRImage& frame) {
  if (frame.empty()) throw std::invalid_argument("mean_luminance: empty image");
  double sum = 0.0;
  for (std::size_t p = 0; p < frame.pixel_count(); ++p) {
    // same weights, arranged so gray pixels map to themselves exactly
    const double g = frame[3 * p + 1];
    sum += g + 0.299 * (frame[3 * p] - g) + 0.114 * (frame[3 * p + 2] - g);
  }
  return sum / static_cast<double>(frame.pixel_count());
}

double std_luminance(std::span<const LDRImage> frames) {
  std::vector<double> means;
  for (const auto& f : frames) means.push_back(mean_luminance(f));
  return population_std(means);
}

double std_luminance(const std::vector<const LDRImage*>& frames) {
  std::vector<double> means;
  for (const auto* f : frames) means.push_back(mean_luminance(*f));
  return population_std(means);
}

double delta_psnr(double psnr_hard, double psnr_easy) {
  if (!std::isfinite(psnr_hard) || !std::isfinite(psnr_easy)) {
    throw std::invalid_argument("delta_psnr: inputs must be finite");
  }
  return psnr_hard - psnr_easy;
}

}  // namespace hdrsplat
