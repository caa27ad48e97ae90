#include "hdrsplat/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hdrsplat {

void PhotometricParams::validate() const {
  if (!(exposure > 0.0)) throw std::invalid_argument("exposure must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
}

double expose_value(double radiance, double exposure) {
  return std::clamp(exposure * radiance, kExposedMin, kExposedMax);
}

LinearHDRImage expose(const LinearHDRImage& hdr, double exposure) {
  if (!(exposure > 0.0)) throw std::invalid_argument("expose: exposure must be > 0");
  LinearHDRImage out(hdr.width(), hdr.height());
  for (std::size_t i = 0; i < hdr.size(); ++i) {
    out[i] = expose_value(hdr[i], exposure);
  }
  return out;
}

double tone_map_value(double x, double gamma) {
  return std::clamp(std::pow(x, 1.0 / gamma), 0.0, 1.0);
}

LDRImage tone_map(const LinearHDRImage& exposed, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("tone_map: gamma must be > 0");
  LDRImage out(exposed.width(), exposed.height());
  for (std::size_t i = 0; i < exposed.size(); ++i) {
    out[i] = tone_map_value(exposed[i], gamma);
  }
  return out;
}

double tone_map_dgamma(double x, double gamma) {
  if (!(x > 0.0)) return 0.0;
  const double y = std::pow(x, 1.0 / gamma);
  if (!(y < 1.0)) return 0.0;
  return -(std::log(x) / (gamma * gamma)) * y;
}

double tone_map_dx(double x, double gamma) {
  if (!(x > 0.0)) return 0.0;
  const double y = std::pow(x, 1.0 / gamma);
  if (!(y < 1.0)) return 0.0;
  return y / (gamma * x);
}

LDRImage form_ldr(const LinearHDRImage& hdr, const PhotometricParams& params) {
  params.validate();
  return tone_map(expose(hdr, params.exposure), params.gamma);
}

PhotometricParams render_params_for_eval(std::span<const PhotometricParams> params) {
  if (params.empty()) {
    throw std::invalid_argument("render_params_for_eval: no views");
  }
  double e = 0.0;
  double g = 0.0;
  for (const auto& p : params) {
    e += p.exposure;
    g += p.gamma;
  }
  const double n = static_cast<double>(params.size());
  return {e / n, g / n};
}

PhotometricParams render_params_for_eval(std::span<const CameraView> views) {
  std::vector<PhotometricParams> params;
  params.reserve(views.size());
  for (const auto& v : views) params.push_back({v.exposure, v.gamma});
  return render_params_for_eval(std::span<const PhotometricParams>(params));
}

double srgb_oetf_inverse(double v, bool* out_of_range) {
  const bool outside = !(v >= 0.0 && v <= 1.0);
  if (out_of_range) *out_of_range = outside;
  v = std::clamp(v, 0.0, 1.0);
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

double srgb_oetf(double linear) {
  linear = std::clamp(linear, 0.0, 1.0);
  if (linear <= 0.0031308) return 12.92 * linear;
  return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

}  // namespace hdrsplat
