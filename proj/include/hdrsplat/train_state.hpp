#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hdrsplat/scene.hpp"

namespace hdrsplat {

// First/second Adam moments for one flattened parameter group.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;

  void reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  friend bool operator==(const AdamMoments&, const AdamMoments&) = default;
};

/// Learnable parameters plus optimizer bookkeeping.
///
/// Appearance (color, SH1, opacity logit) lives inside `scene`; geometry there
/// is fixed. Per-view exposure and gamma are kept in log space and are the
/// authoritative values while training (the copies on scene.views are only
/// refreshed by export_scene()).
struct TrainState {
  Scene scene;
  std::vector<double> log_exposure;
  std::vector<double> log_gamma;
  AdamMoments color;
  AdamMoments sh1;
  AdamMoments opacity;
  AdamMoments exposure_moments;
  AdamMoments gamma_moments;
  std::int64_t step = 0;
  std::mt19937_64 rng;

  double exposure(std::size_t view) const { return std::exp(log_exposure[view]); }
  double gamma(std::size_t view) const { return std::exp(log_gamma[view]); }

  // Scene with every view's exposure/gamma set from the log parameters.
  Scene export_scene() const;
};

// Gradients of a scalar loss w.r.t. every learnable parameter group.
struct Gradients {
  std::vector<Eigen::Vector3d> color;
  std::vector<std::array<Eigen::Vector3d, 3>> sh1;  // empty for degree 0
  std::vector<double> opacity_logit;
  std::vector<double> log_exposure;
  std::vector<double> log_gamma;

  static Gradients zeros(std::size_t gaussians, std::size_t views, int sh_degree);
};

}  // namespace hdrsplat
