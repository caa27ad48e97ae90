#pragma once

#include <span>

#include "hdrsplat/image.hpp"
#include "hdrsplat/scene.hpp"

namespace hdrsplat {

inline constexpr double kExposedMin = 1e-6;
inline constexpr double kExposedMax = 10.0;
inline constexpr double kSrgbGammaPrior = 2.2;

struct PhotometricParams {
  double exposure = 1.0;
  double gamma = kSrgbGammaPrior;

  void validate() const;
};

// e · hdr, clamped to [1e-6, 10].
LinearHDRImage expose(const LinearHDRImage& hdr, double exposure);
double expose_value(double radiance, double exposure);

// clamp(x^(1/γ), 0, 1), one shared γ for all channels.
LDRImage tone_map(const LinearHDRImage& exposed, double gamma);
double tone_map_value(double x, double gamma);

// ∂T/∂γ = -(ln x / γ²)·x^(1/γ); zero where the output clamp is active.
double tone_map_dgamma(double x, double gamma);
// ∂T/∂x = (1/γ)·x^(1/γ - 1); zero where the output clamp is active.
double tone_map_dx(double x, double gamma);

LDRImage form_ldr(const LinearHDRImage& hdr, const PhotometricParams& params);

// Arithmetic means of the per-view exposure and gamma.
PhotometricParams render_params_for_eval(std::span<const CameraView> views);
PhotometricParams render_params_for_eval(std::span<const PhotometricParams> params);

// IEC 61966-2-1 sRGB decode / encode. Inputs outside [0,1] are clamped; the
// decode reports out-of-range input through the optional flag.
double srgb_oetf_inverse(double v, bool* out_of_range = nullptr);
double srgb_oetf(double linear);

}  // namespace hdrsplat
