#include "hdrsplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hdrsplat/parallel.hpp"
#include "hdrsplat/photometric.hpp"

namespace hdrsplat {
namespace {

constexpr double kSaturationLevel = 1.0 - 0.5 / 255.0;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Per-view intermediate results of the photometric pass.
struct ViewPass {
  LinearHDRImage render;
  PixelGradient d_render;
  PhotoLoss photo;
  double d_log_exposure = 0.0;
  double d_log_gamma = 0.0;
  RenderGradients render_grads;
};

}  // namespace

void LossWeights::validate() const {
  if (lambda_exp < 0.0 || lambda_dssim < 0.0 || lambda_escale < 0.0 ||
      lambda_evar < 0.0 || lambda_gamma < 0.0) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
  if (lambda_dssim > 1.0) throw std::invalid_argument("lambda_dssim must be <= 1");
  if (!(gamma_prior > 0.0)) throw std::invalid_argument("gamma_prior must be > 0");
}

PhotoLoss loss_photo(const LDRImage& pred, const LDRImage& obs,
                     const SsimReference& obs_stats, const LossWeights& w) {
  require_same_shape(pred, obs, "loss_photo");
  if (obs_stats.width() != obs.width() || obs_stats.height() != obs.height()) {
    throw std::invalid_argument("loss_photo: SSIM statistics do not match");
  }
  PhotoLoss out;
  const double inv_count = 1.0 / static_cast<double>(pred.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) l1 += std::abs(pred[i] - obs[i]);
  out.l1 = l1 * inv_count;

  PixelGradient d_ssim;
  const double s = obs_stats.evaluate(pred, d_ssim);
  out.dssim = 1.0 - s;
  out.value = (1.0 - w.lambda_dssim) * out.l1 + w.lambda_dssim * out.dssim;

  out.grad = PixelGradient(pred.width(), pred.height());
  const double l1_scale = (1.0 - w.lambda_dssim) * inv_count;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.grad[i] = l1_scale * sign_of(pred[i] - obs[i]) - w.lambda_dssim * d_ssim[i];
  }
  return out;
}

PhotoLoss loss_photo(const LDRImage& pred, const LDRImage& obs,
                     const LossWeights& w) {
  require_same_shape(pred, obs, "loss_photo");
  return loss_photo(pred, obs, SsimReference(obs), w);
}

ExposureLoss loss_exp(std::span<const ExposurePair> pairs,
                      std::span<const double> exposures) {
  ExposureLoss out;
  out.d_exposure.assign(exposures.size(), 0.0);
  if (pairs.empty()) return out;

  std::size_t m = 0;
  for (const auto& p : pairs) {
    if (!p.lhs || !p.rhs) throw std::invalid_argument("loss_exp: null image");
    require_same_shape(*p.lhs, *p.rhs, "loss_exp");
    if (p.i >= exposures.size() || p.j >= exposures.size()) {
      throw std::out_of_range("loss_exp: pair index outside exposure list");
    }
    m += p.lhs->size();
  }
  const double inv_m = 1.0 / static_cast<double>(m);

  double total = 0.0;
  for (const auto& p : pairs) {
    const double ei = exposures[p.i];
    const double ej = exposures[p.j];
    if (!(ei > 0.0) || !(ej > 0.0)) throw std::invalid_argument("loss_exp: exposure must be > 0");
    const double alpha = ej / ei;
    const auto& a = *p.lhs;
    const auto& b = *p.rhs;
    PixelGradient da(a.width(), a.height());
    PixelGradient db(a.width(), a.height());
    double d_alpha = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double r = alpha * a[k] - b[k];
      total += std::abs(r);
      const double s = sign_of(r) * inv_m;
      da[k] = s * alpha;
      db[k] = -s;
      d_alpha += s * a[k];
    }
    out.d_exposure[p.j] += d_alpha / ei;
    out.d_exposure[p.i] -= d_alpha * ej / (ei * ei);
    out.d_lhs.push_back(std::move(da));
    out.d_rhs.push_back(std::move(db));
  }
  out.value = total * inv_m;
  return out;
}

ExposureLoss loss_exp(
    std::span<const std::pair<std::size_t, const LinearHDRImage*>> renders,
    std::span<const double> exposures,
    std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  auto find = [&](std::size_t view) -> const LinearHDRImage* {
    for (const auto& [idx, img] : renders) {
      if (idx == view) return img;
    }
    throw std::out_of_range("loss_exp: no render for view " + std::to_string(view));
  };
  std::vector<ExposurePair> terms;
  terms.reserve(pairs.size());
  for (const auto& [i, j] : pairs) terms.push_back({i, j, find(i), find(j)});
  return loss_exp(std::span<const ExposurePair>(terms), exposures);
}

RegLoss loss_reg(std::span<const double> exposures,
                 std::span<const double> gammas, const LossWeights& w) {
  if (exposures.empty() || gammas.empty()) {
    throw std::invalid_argument("loss_reg: empty parameter lists");
  }
  if (exposures.size() != gammas.size()) {
    throw std::invalid_argument("loss_reg: exposure and gamma counts differ");
  }
  const double n = static_cast<double>(exposures.size());
  RegLoss out;
  double mean_e = 0.0;
  for (const double e : exposures) mean_e += e;
  mean_e /= n;
  for (std::size_t i = 0; i < exposures.size(); ++i) {
    const double de1 = exposures[i] - 1.0;
    const double dm = exposures[i] - mean_e;
    const double dg = gammas[i] - w.gamma_prior;
    out.escale += de1 * de1;
    out.evar += dm * dm;
    out.gamma += dg * dg;
  }
  out.escale /= n;
  out.evar /= n;
  out.gamma /= n;
  out.total = w.lambda_escale * out.escale + w.lambda_evar * out.evar +
              w.lambda_gamma * out.gamma;

  out.d_exposure.resize(exposures.size());
  out.d_gamma.resize(gammas.size());
  for (std::size_t i = 0; i < exposures.size(); ++i) {
    // The mean's own dependence on e_i cancels in ∂Var/∂e_i.
    out.d_exposure[i] = 2.0 / n *
                        (w.lambda_escale * (exposures[i] - 1.0) +
                         w.lambda_evar * (exposures[i] - mean_e));
    out.d_gamma[i] = 2.0 / n * w.lambda_gamma * (gammas[i] - w.gamma_prior);
  }
  return out;
}

LossContext::LossContext(const Scene& scene, RenderSettings settings) {
  const std::size_t n = scene.views.size();
  rasterizers_.resize(n);
  ssim_.resize(n);
  unsaturated_.resize(n);
  parallel_for(n, [&](std::size_t v) {
    const CameraView& view = scene.views[v];
    rasterizers_[v] = std::make_unique<ViewRasterizer>(
        scene.gaussians, scene.sh_degree, view.pose, view.intrinsics, settings);
    if (!view.observation.empty()) {
      ssim_[v] = std::make_unique<SsimReference>(view.observation);
      const auto& obs = view.observation;
      auto& mask = unsaturated_[v];
      mask.resize(obs.pixel_count());
      for (std::size_t p = 0; p < mask.size(); ++p) {
        const double peak = std::max({obs[3 * p], obs[3 * p + 1], obs[3 * p + 2]});
        mask[p] = peak < kSaturationLevel ? 1 : 0;
      }
    }
  });
}

LossResult loss_total(const TrainState& state, const Batch& batch,
                      const LossWeights& w, const LossContext& context) {
  w.validate();
  const Scene& scene = state.scene;
  const std::size_t n_views = scene.views.size();
  const std::size_t n_gauss = scene.gaussians.size();
  if (context.view_count() != n_views) {
    throw std::invalid_argument("loss_total: context built for another scene");
  }
  if (state.log_exposure.size() != n_views || state.log_gamma.size() != n_views) {
    throw std::invalid_argument("loss_total: photometric parameters missing");
  }
  for (const std::size_t v : batch.views) {
    if (v >= n_views) throw std::out_of_range("loss_total: batch view index");
    if (scene.views[v].observation.empty()) {
      throw std::invalid_argument("loss_total: batch view without observation");
    }
  }
  for (const auto& [i, j] : batch.pairs) {
    if (i >= n_views || j >= n_views) throw std::out_of_range("loss_total: pair index");
  }

  std::vector<double> exposures(n_views), gammas(n_views);
  for (std::size_t v = 0; v < n_views; ++v) {
    exposures[v] = state.exposure(v);
    gammas[v] = state.gamma(v);
  }

  LossResult result;
  result.grads = Gradients::zeros(n_gauss, n_views, scene.sh_degree);
  LossReport& report = result.report;

  // Views that need a render: batch views plus the image plane of each pair.
  std::vector<int> slot_of(n_views, -1);
  std::vector<std::size_t> rendered;
  auto need = [&](std::size_t v) {
    if (slot_of[v] < 0) {
      slot_of[v] = static_cast<int>(rendered.size());
      rendered.push_back(v);
    }
  };
  for (const std::size_t v : batch.views) need(v);
  for (const auto& [i, j] : batch.pairs) {
    (void)j;
    need(i);
  }
  std::vector<unsigned char> in_batch(n_views, 0);
  for (const std::size_t v : batch.views) in_batch[v] = 1;

  std::vector<ViewPass> passes(rendered.size());
  const double photo_scale =
      batch.views.empty() ? 0.0 : 1.0 / static_cast<double>(batch.views.size());

  // Forward render and photometric loss per view.
  parallel_for(rendered.size(), [&](std::size_t s) {
    const std::size_t v = rendered[s];
    ViewPass& pass = passes[s];
    pass.render = context.rasterizer(v).forward(scene.gaussians);
    pass.d_render = PixelGradient(pass.render.width(), pass.render.height());
    if (!in_batch[v]) return;

    const double e = exposures[v];
    const double g = gammas[v];
    const LDRImage& obs = scene.views[v].observation;
    LDRImage pred(obs.width(), obs.height());
    for (std::size_t k = 0; k < pred.size(); ++k) {
      pred[k] = tone_map_value(expose_value(pass.render[k], e), g);
    }
    pass.photo = loss_photo(pred, obs, context.ssim_reference(v), w);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double raw = e * pass.render[k];
      if (!(raw > kExposedMin && raw < kExposedMax)) continue;
      const double up = pass.photo.grad[k] * photo_scale;
      const double dy_dx = tone_map_dx(raw, g);
      pass.d_render[k] = up * dy_dx * e;
      pass.d_log_exposure += up * dy_dx * raw;
      pass.d_log_gamma += up * tone_map_dgamma(raw, g) * g;
    }
  });

  for (const std::size_t v : batch.views) {
    const ViewPass& pass = passes[slot_of[v]];
    report.photo += pass.photo.value * photo_scale;
    report.l1 += pass.photo.l1 * photo_scale;
    report.dssim += pass.photo.dssim * photo_scale;
    result.grads.log_exposure[v] += pass.d_log_exposure;
    result.grads.log_gamma[v] += pass.d_log_gamma;
  }

  // Relative exposure consistency.
  if (!batch.pairs.empty()) {
    std::vector<LinearHDRImage> lhs(batch.pairs.size());
    std::vector<LinearHDRImage> rhs(batch.pairs.size());
    std::vector<ExposurePair> terms;
    for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
      const auto [i, j] = batch.pairs[p];
      const LDRImage& obs = scene.views[i].observation;
      if (obs.empty()) throw std::invalid_argument("loss_total: pair view without observation");
      const auto& mask = context.unsaturated(i);
      const LinearHDRImage& render = passes[slot_of[i]].render;
      lhs[p] = LinearHDRImage(obs.width(), obs.height());
      rhs[p] = LinearHDRImage(obs.width(), obs.height());
      for (std::size_t k = 0; k < obs.size(); ++k) {
        if (!mask[k / 3]) continue;
        lhs[p][k] = obs[k] > 0.0 ? std::pow(obs[k], gammas[i]) : 0.0;
        rhs[p][k] = exposures[j] * render[k];
      }
      terms.push_back({i, j, &lhs[p], &rhs[p]});
    }
    const ExposureLoss el = loss_exp(std::span<const ExposurePair>(terms), exposures);
    report.exp = el.value;

    const double lam = w.lambda_exp;
    std::vector<double> d_exposure = el.d_exposure;
    for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
      const auto [i, j] = batch.pairs[p];
      const LDRImage& obs = scene.views[i].observation;
      const auto& mask = context.unsaturated(i);
      ViewPass& pass = passes[slot_of[i]];
      double d_gamma_i = 0.0;
      for (std::size_t k = 0; k < obs.size(); ++k) {
        if (!mask[k / 3]) continue;
        pass.d_render[k] += lam * el.d_rhs[p][k] * exposures[j];
        d_exposure[j] += el.d_rhs[p][k] * pass.render[k];
        if (obs[k] > 0.0) {
          d_gamma_i += el.d_lhs[p][k] * lhs[p][k] * std::log(obs[k]);
        }
      }
      result.grads.log_gamma[i] += lam * d_gamma_i * gammas[i];
    }
    for (std::size_t v = 0; v < n_views; ++v) {
      result.grads.log_exposure[v] += lam * d_exposure[v] * exposures[v];
    }
  }

  // Regularization across all views.
  const RegLoss reg = loss_reg(exposures, gammas, w);
  report.reg_escale = w.lambda_escale * reg.escale;
  report.reg_evar = w.lambda_evar * reg.evar;
  report.reg_gamma = w.lambda_gamma * reg.gamma;
  for (std::size_t v = 0; v < n_views; ++v) {
    result.grads.log_exposure[v] += reg.d_exposure[v] * exposures[v];
    result.grads.log_gamma[v] += reg.d_gamma[v] * gammas[v];
  }

  report.total = report.photo + w.lambda_exp * report.exp + report.reg_escale +
                 report.reg_evar + report.reg_gamma;

  // Back through the rasterizer, then reduce in view order.
  parallel_for(rendered.size(), [&](std::size_t s) {
    ViewPass& pass = passes[s];
    pass.render_grads = context.rasterizer(rendered[s]).backward(
        scene.gaussians, std::move(pass.d_render));
  });
  for (std::size_t s = 0; s < rendered.size(); ++s) {
    const RenderGradients& rg = passes[s].render_grads;
    for (std::size_t k = 0; k < n_gauss; ++k) {
      result.grads.color[k] += rg.d_color[k];
      result.grads.opacity_logit[k] += rg.d_opacity_logit[k];
    }
    if (scene.sh_degree >= 1) {
      for (std::size_t k = 0; k < n_gauss; ++k) {
        for (int b = 0; b < 3; ++b) result.grads.sh1[k][b] += rg.d_sh1[k][b];
      }
    }
  }
  return result;
}

LossResult loss_total(const TrainState& state, const Batch& batch,
                      const LossWeights& w) {
  return loss_total(state, batch, w, LossContext(state.scene));
}

}  // namespace hdrsplat
