#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hdrsplat/image.hpp"

namespace hdrsplat {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One splatting primitive.
///
/// Scale and opacity live in unconstrained spaces (log-scale, logit) so the
/// optimizer can step freely. `color` is the degree-0 linear radiance; the
/// `sh1` block holds degree-1 coefficients (one RGB triple per basis function)
/// and is only evaluated when the owning Scene has sh_degree == 1.
struct Gaussian {
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  std::array<Eigen::Vector3d, 3> sh1 = {Eigen::Vector3d::Zero(),
                                        Eigen::Vector3d::Zero(),
                                        Eigen::Vector3d::Zero()};

  Eigen::Vector3d scale() const { return log_scale.array().exp(); }
  double opacity() const { return sigmoid(opacity_logit); }

  static Gaussian from_activated(const Eigen::Vector3d& mu,
                                 const Eigen::Quaterniond& rot,
                                 const Eigen::Vector3d& scale, double opacity,
                                 const Eigen::Vector3d& color);
};

/// Σ = R·S·Sᵀ·Rᵀ with S = diag(scale); the rotation quaternion is normalized
/// before use.
Eigen::Matrix3d covariance_of(const Gaussian& g);

struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
  friend bool operator==(const CameraIntrinsics&,
                         const CameraIntrinsics&) = default;
};

// Pinhole intrinsics for a horizontal field of view in degrees. Pixel centers
// sit at integer coordinates, so the principal point is ((W-1)/2, (H-1)/2).
CameraIntrinsics intrinsics_from_fov(int width, int height, double hfov_deg);

/// World→camera rigid transform. Camera axes: x right, y down, z forward.
struct CameraPose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix3d rotation_matrix() const {
    return rotation.normalized().toRotationMatrix();
  }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation_matrix() * world + translation;
  }
  Eigen::Vector3d center() const {
    return -(rotation_matrix().transpose() * translation);
  }
  void validate() const;
};

struct CameraView {
  int id = 0;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  LDRImage observation;  // may be empty when loaded without images
  double exposure = 1.0;
  double gamma = 2.2;
  std::optional<int> iso;

  void validate() const;
};

struct Scene {
  int sh_degree = 0;
  std::vector<Gaussian> gaussians;
  std::vector<CameraView> views;

  // Checks per-record invariants and unique view ids. With for_training the
  // scene must hold at least one Gaussian and one view with an observation.
  void validate(bool for_training = false) const;

  const CameraView& view_by_id(int id) const;
  std::optional<std::size_t> view_index(int id) const;
};

// Text persistence: header `hdrsplat-scene v1`, one `G` record per Gaussian
// and one `V` record per view, floats with 9 significant digits.
void write_scene_text(const Scene& scene, std::ostream& out);
Scene read_scene_text(std::istream& in, const std::string& source = "<stream>");
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

// Compact binary form; bit-exact for every double. Observations are not stored.
void write_scene_binary(const Scene& scene, std::ostream& out);
Scene read_scene_binary(std::istream& in);
void save_scene_binary(const Scene& scene, const std::filesystem::path& path);
Scene load_scene_binary(const std::filesystem::path& path);

// Rounds to the nearest value that survives a 9-significant-digit round trip.
double round_to_text_precision(double value);

}  // namespace hdrsplat
