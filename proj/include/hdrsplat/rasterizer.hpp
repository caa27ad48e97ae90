#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hdrsplat/image.hpp"
#include "hdrsplat/scene.hpp"

namespace hdrsplat {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kTransmittanceMin = 1e-4;
inline constexpr double kCov2dFloor = 0.3;  // px², added to the diagonal
inline constexpr double kFootprintSigmas = 3.0;

struct RenderSettings {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  double near_plane = 0.01;
};

struct ProjectedGaussian {
  Eigen::Vector2d pixel_center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  double depth = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double opacity = 0.0;
  std::size_t source_index = 0;
};

struct RenderGradients {
  std::vector<Eigen::Vector3d> d_color;
  std::vector<double> d_opacity_logit;
  // Only filled for degree-1 scenes.
  std::vector<std::array<Eigen::Vector3d, 3>> d_sh1;
  PixelGradient d_image_in;
};

/// Projected, depth-sorted and tile-binned geometry for one camera.
///
/// Geometry (positions, rotations, scales) is baked in at construction, while
/// colors and opacities are read from the span handed to forward/backward, so
/// an optimizer that only updates appearance can reuse one instance across
/// steps. The span must describe the same Gaussians as at construction.
///
/// Per pixel (centers at integer coordinates) Gaussians are composited front
/// to back with α' = min(opacity·exp(-½dᵀΣ₂⁻¹d), 0.99), restricted to the
/// 3σ Mahalanobis footprint. Compositing stops once transmittance falls below
/// 1e-4; leftover transmittance shows the background.
class ViewRasterizer {
 public:
  ViewRasterizer(std::span<const Gaussian> gaussians, int sh_degree,
                 const CameraPose& pose, const CameraIntrinsics& intrinsics,
                 RenderSettings settings = {});

  LinearHDRImage forward(std::span<const Gaussian> gaussians,
                         std::vector<double>* transmittance = nullptr) const;

  // Exact gradients of forward() w.r.t. colors (and SH1) and opacity logits.
  RenderGradients backward(std::span<const Gaussian> gaussians,
                           PixelGradient upstream) const;

  const std::vector<ProjectedGaussian>& projected() const { return projected_; }
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  struct Footprint {
    double u, v;
    double conic_a, conic_b, conic_c;
    std::array<double, 3> sh_basis;
  };

  void effective_appearance(std::span<const Gaussian> gaussians,
                            std::vector<Eigen::Vector3d>& color,
                            std::vector<Eigen::Vector3d>& pre_clamp,
                            std::vector<double>& opacity) const;

  int width_ = 0;
  int height_ = 0;
  int tiles_x_ = 0;
  int tiles_y_ = 0;
  int sh_degree_ = 0;
  std::size_t gaussian_count_ = 0;
  RenderSettings settings_;
  std::vector<ProjectedGaussian> projected_;
  std::vector<Footprint> footprints_;  // parallel to projected_
  std::vector<std::vector<std::uint32_t>> tile_lists_;

  // Per tile, for each pixel (row-major inside the tile): the tile-list slots
  // whose 3σ footprint covers it, in depth order, with the Gaussian falloff.
  // Depends on geometry only, so it is computed once.
  struct TileHits {
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> slots;
    std::vector<double> falloff;
  };
  std::vector<TileHits> tile_hits_;
};

// Culled (behind near plane, or more than 3σ outside the image) and sorted by
// ascending depth, ties by source index.
std::vector<ProjectedGaussian> project(const Scene& scene,
                                       const CameraView& view,
                                       const RenderSettings& settings = {});

LinearHDRImage render_hdr(const Scene& scene, const CameraView& view,
                          const RenderSettings& settings = {});

RenderGradients render_hdr_backward(const Scene& scene, const CameraView& view,
                                    const PixelGradient& upstream,
                                    const RenderSettings& settings = {});

}  // namespace hdrsplat
