#pragma once

// End-to-end finite-difference check of loss_total over every learnable
// scalar of a TrainState.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hdrsplat/losses.hpp"
#include "hdrsplat/optimizer.hpp"
#include "test_support.hpp"

namespace hdrsplat::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  std::string worst_name;
  std::vector<std::string> failures;
};

// Visits every learnable scalar as (name, reference to value, analytic grad).
inline void for_each_parameter(
    TrainState& state, const Gradients& g,
    const std::function<void(const std::string&, double&, double)>& fn) {
  auto& gs = state.scene.gaussians;
  for (std::size_t k = 0; k < gs.size(); ++k) {
    for (int c = 0; c < 3; ++c) {
      fn("color[" + std::to_string(k) + "][" + std::to_string(c) + "]", gs[k].color[c],
         g.color[k][c]);
    }
    if (state.scene.sh_degree >= 1) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          fn("sh1[" + std::to_string(k) + "][" + std::to_string(b) + "][" + std::to_string(c) +
                 "]",
             gs[k].sh1[b][c], g.sh1[k][b][c]);
        }
      }
    }
    fn("opacity_logit[" + std::to_string(k) + "]", gs[k].opacity_logit, g.opacity_logit[k]);
  }
  for (std::size_t v = 0; v < state.log_exposure.size(); ++v) {
    fn("log_exposure[" + std::to_string(v) + "]", state.log_exposure[v], g.log_exposure[v]);
    fn("log_gamma[" + std::to_string(v) + "]", state.log_gamma[v], g.log_gamma[v]);
  }
}

inline GradCheckResult check_loss_gradients(TrainState state, const Batch& batch,
                                            const LossWeights& w, double h = 1e-4,
                                            double rel_tol = 1e-3,
                                            double abs_tol = 1e-6) {
  const LossContext ctx(state.scene);
  const LossResult base = loss_total(state, batch, w, ctx);
  GradCheckResult out;
  TrainState probe = state;
  for_each_parameter(probe, base.grads, [&](const std::string& name, double& x,
                                            double analytic) {
    const double x0 = x;
    x = x0 + h;
    const double fp = loss_total(probe, batch, w, ctx).report.total;
    x = x0 - h;
    const double fm = loss_total(probe, batch, w, ctx).report.total;
    x = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    const double diff = std::abs(analytic - numeric);
    const double rel = diff / std::max({std::abs(analytic), std::abs(numeric), 1e-300});
    ++out.checked;
    const bool ok = diff < abs_tol || rel < rel_tol;
    if (!ok) {
      ++out.failed;
      out.failures.push_back(name + " analytic=" + std::to_string(analytic) +
                             " numeric=" + std::to_string(numeric));
    }
    // worst_rel reports gradients large enough for the relative error to mean something
    if (std::max(std::abs(analytic), std::abs(numeric)) >= 1e-4 && rel > out.worst_rel) {
      out.worst_rel = rel;
      out.worst_name = name;
    }
  });
  return out;
}

// Two-view, 16×16 scene whose observations sit at least `offset` away from
// the current prediction in LDR space, so no L1 kink lies within a
// finite-difference step. Opacities stay ≤ 0.6 (no α clamp) and exposed
// values stay inside the clamp range.
inline TrainState gradcheck_state(std::uint64_t seed, int sh_degree = 0,
                                  double offset = 0.05) {
  constexpr int kSize = 16;
  constexpr double kFocal = 16.0;
  Scene s = random_scene(seed, 5, kSize, kSize, kFocal, 0.3, 0.6, 0.6, 1.2);
  s.sh_degree = sh_degree;
  // keeps e·R below the tone-map clamp at 1
  for (auto& g : s.gaussians) g.color *= 0.7;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (sh_degree >= 1) {
    for (auto& g : s.gaussians) {
      for (auto& b : g.sh1) b = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.1 - Eigen::Vector3d::Constant(0.05);
    }
  }
  s.views.clear();
  s.views.push_back(axis_view(0, kSize, kSize, kFocal));
  s.views.push_back(axis_view(1, kSize, kSize, kFocal, Eigen::Vector3d(0.3, -0.2, 0.1)));

  TrainConfig cfg;
  cfg.seed = seed;
  // Placeholder observations so init_state accepts the scene.
  for (auto& v : s.views) v.observation = LDRImage(kSize, kSize, 0.5);
  TrainState st = init_state(s, cfg);
  st.log_exposure = {std::log(0.9), std::log(1.15)};
  st.log_gamma = {std::log(2.1), std::log(2.35)};

  for (std::size_t v = 0; v < st.scene.views.size(); ++v) {
    const LinearHDRImage hdr = render_hdr(st.scene, st.scene.views[v]);
    LDRImage obs(kSize, kSize);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const double pred = tone_map_value(expose_value(hdr[k], st.exposure(v)), st.gamma(v));
      const double delta = offset + 0.05 * u(rng);
      obs[k] = pred + delta < 0.95 ? pred + delta : pred - delta;
    }
    st.scene.views[v].observation = obs;
  }
  return st;
}

}  // namespace hdrsplat::testing
