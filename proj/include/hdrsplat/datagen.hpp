#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdrsplat/scene.hpp"

namespace hdrsplat {

/// Camera mounted on the ego vehicle, given in the simulator's vehicle frame
/// (x forward, y right, z up; rotation roll/pitch/yaw in degrees, positive yaw
/// turning right). Converted internally to the right-handed world frame used
/// everywhere else (x forward, y left, z up).
struct CameraMount {
  std::string name;
  Eigen::Vector3d location = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation_deg = Eigen::Vector3d::Zero();  // roll, pitch, yaw
};

struct RigSpec {
  std::vector<CameraMount> cameras = default_mounts();
  int width = 192;
  int height = 130;
  double hfov_deg = 60.0;
  double frame_rate_hz = 10.0;
  int frame_count = 8;
  double speed_mps = 5.0;  // straight-line ego motion along +x

  static std::vector<CameraMount> default_mounts();  // front, front-left, front-right
  // 1920×1300, 100 frames.
  static RigSpec full_scale();

  void validate() const;
  CameraIntrinsics intrinsics() const;
  // World→camera pose of camera `cam` at frame `frame`, rounded to the
  // 9-significant-digit text precision.
  CameraPose pose(int frame, int cam) const;
};

enum class ExposureMode { kConst, kVar };

struct ExposurePolicy {
  ExposureMode mode = ExposureMode::kConst;
  double iso_mean = 8.0;
  double iso_std = 0.0;  // ignored in Const mode
  int iso_floor = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr int kIsoReference = 8;
inline constexpr double kGeneratorGamma = 2.2;

// max(floor, round(value))
int round_iso(double value, int floor);

// Const: round(iso_mean). Var: round(iso_mean + iso_std·z) floored, with
// z ~ N(0,1) from a stream seeded by (seed, frame, camera).
int sample_iso(const ExposurePolicy& policy, int frame, int camera);

double iso_to_exposure(int iso, int iso_ref = kIsoReference);

// Ground disks, a ring of building facades, boxes and clutter around the
// rig's route. Every stored value is canonicalized to text precision so the
// scene survives save/load bit-exactly.
Scene build_procedural_scene(std::uint64_t seed, int n_gaussians,
                             const RigSpec& rig = {});

// Fraction of pixels whose final transmittance is below 0.5.
double coverage_fraction(const Scene& scene, const CameraView& view);

struct ManifestEntry {
  int frame = 0;
  int camera = 0;
  int iso = kIsoReference;
  double exposure = 1.0;
  std::filesystem::path image;     // relative to the manifest directory
  std::filesystem::path gt_image;  // ISO-Const rendering of the same view
  std::filesystem::path sky_mask;
  CameraPose pose;

  int view_id(int camera_count) const { return frame * camera_count + camera; }
};

struct DatasetManifest {
  std::filesystem::path scene_file;
  std::filesystem::path calib_file;
  std::vector<CameraIntrinsics> cameras;
  std::vector<ManifestEntry> entries;  // frame-major, then camera

  int camera_count() const { return static_cast<int>(cameras.size()); }
  int frame_count() const;

  void write(const std::filesystem::path& path) const;
  static DatasetManifest read(const std::filesystem::path& path);
};

struct GenerateOptions {
  bool write_hdr = false;  // also dump the linear renders as PFM
};

// Renders every (frame, camera) of the rig, writes the exposed LDR images,
// the ISO-Const GT split, sky masks, calibration, the scene and manifest.txt.
DatasetManifest generate(const Scene& scene, const RigSpec& rig,
                         const ExposurePolicy& policy,
                         const std::filesystem::path& out_dir,
                         const GenerateOptions& options = {});

// One `Pk:` row of 12 row-major floats per camera.
void export_kitti_calib(std::span<const CameraIntrinsics> cameras,
                        const std::filesystem::path& out_path);

enum class DatasetSplit { kObserved, kGroundTruth };

// Scene Gaussians plus one view per manifest entry (id = frame·cams + cam)
// carrying the chosen split's images and the generator's ISO and exposure.
Scene load_dataset(const std::filesystem::path& manifest_path,
                   DatasetSplit split = DatasetSplit::kObserved);

}  // namespace hdrsplat
