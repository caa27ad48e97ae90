#include "hdrsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hdrsplat/parallel.hpp"

namespace hdrsplat {
namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr double kMaxMahalanobisSq = kFootprintSigmas * kFootprintSigmas;

struct PixelHit {
  std::uint32_t slot;  // position in the tile list
  double alpha;
  double falloff;
  double transmittance;  // before this hit
  bool clamped;
};

}  // namespace

ViewRasterizer::ViewRasterizer(std::span<const Gaussian> gaussians,
                               int sh_degree, const CameraPose& pose,
                               const CameraIntrinsics& intrinsics,
                               RenderSettings settings)
    : width_(intrinsics.width),
      height_(intrinsics.height),
      sh_degree_(sh_degree),
      gaussian_count_(gaussians.size()),
      settings_(settings) {
  intrinsics.validate();
  tiles_x_ = (width_ + kTileSize - 1) / kTileSize;
  tiles_y_ = (height_ + kTileSize - 1) / kTileSize;
  tile_lists_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y_);

  const Eigen::Matrix3d w2c = pose.rotation_matrix();
  const Eigen::Vector3d cam_center = pose.center();
  const double lim_x = 1.3 * (0.5 * width_ / intrinsics.fx);
  const double lim_y = 1.3 * (0.5 * height_ / intrinsics.fy);

  struct Candidate {
    ProjectedGaussian pg;
    Footprint fp;
    double radius;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(gaussians.size());

  for (std::size_t k = 0; k < gaussians.size(); ++k) {
    const Gaussian& g = gaussians[k];
    const Eigen::Vector3d p = w2c * g.mu + pose.translation;
    if (!(p.z() > settings_.near_plane)) continue;

    const double inv_z = 1.0 / p.z();
    const double u = intrinsics.fx * p.x() * inv_z + intrinsics.cx;
    const double v = intrinsics.fy * p.y() * inv_z + intrinsics.cy;

    const double tx = std::clamp(p.x() * inv_z, -lim_x, lim_x) * p.z();
    const double ty = std::clamp(p.y() * inv_z, -lim_y, lim_y) * p.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << intrinsics.fx * inv_z, 0.0, -intrinsics.fx * tx * inv_z * inv_z,
        0.0, intrinsics.fy * inv_z, -intrinsics.fy * ty * inv_z * inv_z;
    const Eigen::Matrix<double, 2, 3> t = jac * w2c;
    Eigen::Matrix2d cov2d = t * covariance_of(g) * t.transpose();
    cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    cov2d(0, 0) += kCov2dFloor;
    cov2d(1, 1) += kCov2dFloor;

    const double det = cov2d.determinant();
    if (!(det > 0.0)) continue;
    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = kFootprintSigmas * std::sqrt(lambda_max);
    if (u + radius < 0.0 || u - radius > width_ - 1 || v + radius < 0.0 ||
        v - radius > height_ - 1) {
      continue;
    }

    Candidate c;
    c.pg.pixel_center = {u, v};
    c.pg.cov2d = cov2d;
    c.pg.depth = p.z();
    c.pg.color = g.color;
    c.pg.opacity = g.opacity();
    c.pg.source_index = k;
    c.fp.u = u;
    c.fp.v = v;
    c.fp.conic_a = cov2d(1, 1) / det;
    c.fp.conic_b = -cov2d(0, 1) / det;
    c.fp.conic_c = cov2d(0, 0) / det;
    const Eigen::Vector3d dir = (g.mu - cam_center).normalized();
    c.fp.sh_basis = {-kShC1 * dir.y(), kShC1 * dir.z(), -kShC1 * dir.x()};
    c.radius = radius;
    candidates.push_back(c);
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.pg.depth < b.pg.depth;
                   });

  projected_.reserve(candidates.size());
  footprints_.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    projected_.push_back(c.pg);
    footprints_.push_back(c.fp);
    const int x0 = std::max(0, static_cast<int>(std::floor(c.fp.u - c.radius)));
    const int x1 = std::min(width_ - 1, static_cast<int>(std::ceil(c.fp.u + c.radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.fp.v - c.radius)));
    const int y1 = std::min(height_ - 1, static_cast<int>(std::ceil(c.fp.v + c.radius)));
    for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty) {
      for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx) {
        tile_lists_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(
            static_cast<std::uint32_t>(i));
      }
    }
  }

  tile_hits_.resize(tile_lists_.size());
  parallel_for(tile_lists_.size(), [&](std::size_t tile) {
    const auto& list = tile_lists_[tile];
    TileHits& th = tile_hits_[tile];
    const int tx = static_cast<int>(tile) % tiles_x_;
    const int ty = static_cast<int>(tile) / tiles_x_;
    const int x_end = std::min(width_, (tx + 1) * kTileSize);
    const int y_end = std::min(height_, (ty + 1) * kTileSize);
    th.offsets.push_back(0);
    for (int py = ty * kTileSize; py < y_end; ++py) {
      for (int px = tx * kTileSize; px < x_end; ++px) {
        for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
          const Footprint& f = footprints_[list[slot]];
          const double dx = px - f.u;
          const double dy = py - f.v;
          const double m = f.conic_a * dx * dx + 2.0 * f.conic_b * dx * dy +
                           f.conic_c * dy * dy;
          if (m > kMaxMahalanobisSq) continue;
          th.slots.push_back(slot);
          th.falloff.push_back(std::exp(-0.5 * m));
        }
        th.offsets.push_back(static_cast<std::uint32_t>(th.slots.size()));
      }
    }
  });
}

void ViewRasterizer::effective_appearance(
    std::span<const Gaussian> gaussians, std::vector<Eigen::Vector3d>& color,
    std::vector<Eigen::Vector3d>& pre_clamp,
    std::vector<double>& opacity) const {
  if (gaussians.size() != gaussian_count_) {
    throw std::invalid_argument("ViewRasterizer: Gaussian count changed");
  }
  color.resize(projected_.size());
  pre_clamp.resize(projected_.size());
  opacity.resize(projected_.size());
  for (std::size_t i = 0; i < projected_.size(); ++i) {
    const Gaussian& g = gaussians[projected_[i].source_index];
    Eigen::Vector3d c = g.color;
    if (sh_degree_ >= 1) {
      const auto& b = footprints_[i].sh_basis;
      c += b[0] * g.sh1[0] + b[1] * g.sh1[1] + b[2] * g.sh1[2];
    }
    pre_clamp[i] = c;
    color[i] = c.cwiseMax(0.0);
    opacity[i] = g.opacity();
  }
}

LinearHDRImage ViewRasterizer::forward(std::span<const Gaussian> gaussians,
                                       std::vector<double>* transmittance) const {
  std::vector<Eigen::Vector3d> color, pre_clamp;
  std::vector<double> opacity;
  effective_appearance(gaussians, color, pre_clamp, opacity);

  LinearHDRImage image(width_, height_);
  if (transmittance) transmittance->assign(image.pixel_count(), 1.0);
  const Eigen::Vector3d bg = settings_.background;

  parallel_for(tile_lists_.size(), [&](std::size_t tile) {
    const auto& list = tile_lists_[tile];
    const TileHits& th = tile_hits_[tile];
    const int tx = static_cast<int>(tile) % tiles_x_;
    const int ty = static_cast<int>(tile) / tiles_x_;
    const int x_end = std::min(width_, (tx + 1) * kTileSize);
    const int y_end = std::min(height_, (ty + 1) * kTileSize);
    std::size_t pixel = 0;
    for (int py = ty * kTileSize; py < y_end; ++py) {
      for (int px = tx * kTileSize; px < x_end; ++px, ++pixel) {
        double t = 1.0;
        double acc[3] = {0.0, 0.0, 0.0};
        for (std::uint32_t h = th.offsets[pixel]; h < th.offsets[pixel + 1]; ++h) {
          const std::uint32_t idx = list[th.slots[h]];
          double alpha = opacity[idx] * th.falloff[h];
          if (alpha > kAlphaMax) alpha = kAlphaMax;
          const double w = alpha * t;
          acc[0] += color[idx][0] * w;
          acc[1] += color[idx][1] * w;
          acc[2] += color[idx][2] * w;
          t *= (1.0 - alpha);
          if (t < kTransmittanceMin) break;
        }
        for (int c = 0; c < 3; ++c) image.at(px, py, c) = acc[c] + t * bg[c];
        if (transmittance) {
          (*transmittance)[static_cast<std::size_t>(py) * width_ + px] = t;
        }
      }
    }
  });
  return image;
}

RenderGradients ViewRasterizer::backward(std::span<const Gaussian> gaussians,
                                         PixelGradient upstream) const {
  if (upstream.width() != width_ || upstream.height() != height_) {
    throw std::invalid_argument("render backward: upstream size mismatch");
  }
  std::vector<Eigen::Vector3d> color, pre_clamp;
  std::vector<double> opacity;
  effective_appearance(gaussians, color, pre_clamp, opacity);
  const Eigen::Vector3d bg = settings_.background;

  // Per-tile partial sums, reduced afterwards in tile order so the result is
  // independent of the worker count.
  std::vector<std::vector<Eigen::Vector3d>> tile_dcolor(tile_lists_.size());
  std::vector<std::vector<double>> tile_dalpha_logit(tile_lists_.size());

  parallel_for(tile_lists_.size(), [&](std::size_t tile) {
    const auto& list = tile_lists_[tile];
    auto& dcolor = tile_dcolor[tile];
    auto& dlogit = tile_dalpha_logit[tile];
    dcolor.assign(list.size(), Eigen::Vector3d::Zero());
    dlogit.assign(list.size(), 0.0);
    if (list.empty()) return;

    thread_local std::vector<PixelHit> hits;
    const TileHits& th = tile_hits_[tile];
    const int tx = static_cast<int>(tile) % tiles_x_;
    const int ty = static_cast<int>(tile) / tiles_x_;
    const int x_end = std::min(width_, (tx + 1) * kTileSize);
    const int y_end = std::min(height_, (ty + 1) * kTileSize);
    std::size_t pixel = 0;
    for (int py = ty * kTileSize; py < y_end; ++py) {
      for (int px = tx * kTileSize; px < x_end; ++px, ++pixel) {
        const double up[3] = {upstream.at(px, py, 0), upstream.at(px, py, 1),
                              upstream.at(px, py, 2)};
        if (up[0] == 0.0 && up[1] == 0.0 && up[2] == 0.0) continue;

        hits.clear();
        double t = 1.0;
        for (std::uint32_t h = th.offsets[pixel]; h < th.offsets[pixel + 1]; ++h) {
          const std::uint32_t slot = th.slots[h];
          const double falloff = th.falloff[h];
          double alpha = opacity[list[slot]] * falloff;
          bool clamped = false;
          if (alpha > kAlphaMax) {
            alpha = kAlphaMax;
            clamped = true;
          }
          hits.push_back({slot, alpha, falloff, t, clamped});
          t *= (1.0 - alpha);
          if (t < kTransmittanceMin) break;
        }

        // Radiance of everything behind the current hit, normalized by the
        // transmittance in front of it.
        double behind[3] = {bg[0], bg[1], bg[2]};
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const std::uint32_t idx = list[it->slot];
          const Eigen::Vector3d& c = color[idx];
          const double w = it->alpha * it->transmittance;
          double d_alpha = 0.0;
          for (int ch = 0; ch < 3; ++ch) {
            dcolor[it->slot][ch] += up[ch] * w;
            d_alpha += up[ch] * it->transmittance * (c[ch] - behind[ch]);
          }
          if (!it->clamped) {
            const double op = opacity[idx];
            dlogit[it->slot] += d_alpha * it->falloff * op * (1.0 - op);
          }
          for (int ch = 0; ch < 3; ++ch) {
            behind[ch] = c[ch] * it->alpha + (1.0 - it->alpha) * behind[ch];
          }
        }
      }
    }
  });

  RenderGradients grads;
  grads.d_color.assign(gaussian_count_, Eigen::Vector3d::Zero());
  grads.d_opacity_logit.assign(gaussian_count_, 0.0);
  std::vector<Eigen::Vector3d> d_effective(projected_.size(),
                                           Eigen::Vector3d::Zero());
  for (std::size_t tile = 0; tile < tile_lists_.size(); ++tile) {
    const auto& list = tile_lists_[tile];
    for (std::size_t slot = 0; slot < list.size(); ++slot) {
      d_effective[list[slot]] += tile_dcolor[tile][slot];
      grads.d_opacity_logit[projected_[list[slot]].source_index] +=
          tile_dalpha_logit[tile][slot];
    }
  }

  if (sh_degree_ >= 1) {
    grads.d_sh1.assign(gaussian_count_, {Eigen::Vector3d::Zero(),
                                         Eigen::Vector3d::Zero(),
                                         Eigen::Vector3d::Zero()});
  }
  for (std::size_t i = 0; i < projected_.size(); ++i) {
    Eigen::Vector3d d = d_effective[i];
    for (int ch = 0; ch < 3; ++ch) {
      if (pre_clamp[i][ch] < 0.0) d[ch] = 0.0;
    }
    const std::size_t src = projected_[i].source_index;
    grads.d_color[src] += d;
    if (sh_degree_ >= 1) {
      for (int b = 0; b < 3; ++b) {
        grads.d_sh1[src][b] += footprints_[i].sh_basis[b] * d;
      }
    }
  }
  grads.d_image_in = std::move(upstream);
  return grads;
}

std::vector<ProjectedGaussian> project(const Scene& scene,
                                       const CameraView& view,
                                       const RenderSettings& settings) {
  ViewRasterizer r(scene.gaussians, scene.sh_degree, view.pose,
                   view.intrinsics, settings);
  return r.projected();
}

LinearHDRImage render_hdr(const Scene& scene, const CameraView& view,
                          const RenderSettings& settings) {
  ViewRasterizer r(scene.gaussians, scene.sh_degree, view.pose,
                   view.intrinsics, settings);
  return r.forward(scene.gaussians);
}

RenderGradients render_hdr_backward(const Scene& scene, const CameraView& view,
                                    const PixelGradient& upstream,
                                    const RenderSettings& settings) {
  ViewRasterizer r(scene.gaussians, scene.sh_degree, view.pose,
                   view.intrinsics, settings);
  return r.backward(scene.gaussians, upstream);
}

}  // namespace hdrsplat
