#include "hdrsplat/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hdrsplat/errors.hpp"
#include "hdrsplat/image_io.hpp"
#include "hdrsplat/parallel.hpp"
#include "hdrsplat/photometric.hpp"
#include "hdrsplat/rasterizer.hpp"

namespace hdrsplat {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kRadianceMin = 0.01;
constexpr double kRadianceMax = 2.0;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  Eigen::Quaterniond rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    return q.normalized();
  }

 private:
  std::mt19937_64 rng_;
};

Eigen::Vector3d clamp_radiance(Eigen::Vector3d c) {
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i], kRadianceMin, kRadianceMax);
  return c;
}

// Rotation whose local x/y/z axes map onto the given orthonormal frame. The
// z axis is flipped if needed to keep the frame right-handed.
Eigen::Quaterniond frame_rotation(const Eigen::Vector3d& ax,
                                  const Eigen::Vector3d& ay,
                                  const Eigen::Vector3d& az) {
  Eigen::Matrix3d m;
  m.col(0) = ax;
  m.col(1) = ay;
  m.col(2) = ax.cross(ay).dot(az) < 0.0 ? Eigen::Vector3d(-az) : az;
  return Eigen::Quaterniond(m).normalized();
}

Gaussian make(const Eigen::Vector3d& mu, const Eigen::Quaterniond& rot,
              const Eigen::Vector3d& scale, double opacity,
              const Eigen::Vector3d& color) {
  return Gaussian::from_activated(mu, rot, scale, opacity, clamp_radiance(color));
}

Eigen::Vector3d tinted(Sampler& s, double base, double spread) {
  return {base * s.uniform(1 - spread, 1 + spread),
          base * s.uniform(1 - spread, 1 + spread),
          base * s.uniform(1 - spread, 1 + spread)};
}

Eigen::Vector3d saturated(Sampler& s) {
  Eigen::Vector3d c(s.uniform(0.05, 0.45), s.uniform(0.05, 0.45),
                    s.uniform(0.05, 0.45));
  c[s.index(3)] = s.uniform(0.5, 1.6);
  return c;
}

void add_ground(std::vector<Gaussian>& out, int count, const Eigen::Vector3d& center,
                Sampler& s) {
  const int sectors = std::max(1, static_cast<int>(std::lround(std::sqrt(3.0 * count))));
  const int rings = count / sectors;
  const double r0 = 7.0, r1 = 38.0;
  const double ratio = std::pow(r1 / r0, 1.0 / std::max(rings, 1));
  const double span = 180.0 * kDeg;
  const double dtheta = span / sectors;
  for (int k = 0; k < rings; ++k) {
    const double r = r0 * std::pow(ratio, k + 0.5);
    const double dr = r * (ratio - 1.0) / std::sqrt(ratio);
    for (int j = 0; j < sectors; ++j) {
      const double th = -0.5 * span + (j + 0.5) * dtheta;
      const Eigen::Vector3d radial(std::cos(th), std::sin(th), 0.0);
      const Eigen::Vector3d tangent(-std::sin(th), std::cos(th), 0.0);
      const Eigen::Vector3d mu = center + r * radial;
      const double gray = s.uniform(0.12, 0.4);
      out.push_back(make(mu, frame_rotation(radial, tangent, Eigen::Vector3d::UnitZ()),
                         {0.6 * dr, 0.6 * r * dtheta, 0.05}, 0.9,
                         tinted(s, gray, 0.12)));
    }
  }
}

void add_facades(std::vector<Gaussian>& out, int count, const Eigen::Vector3d& center,
                 Sampler& s) {
  const double radius = 34.0, top = 24.0;
  const int rows = std::max(1, static_cast<int>(std::lround(std::sqrt(count / 4.0))));
  const int cols = count / rows;
  const double span = 190.0 * kDeg;
  const double dtheta = span / std::max(cols, 1);
  const double dz = top / rows;
  constexpr int kColumnsPerBuilding = 4;
  Eigen::Vector3d building_color = Eigen::Vector3d::Zero();
  for (int j = 0; j < cols; ++j) {
    if (j % kColumnsPerBuilding == 0) building_color = tinted(s, s.uniform(0.08, 0.55), 0.35);
    const double th = -0.5 * span + (j + 0.5) * dtheta;
    const Eigen::Vector3d inward(-std::cos(th), -std::sin(th), 0.0);
    const Eigen::Vector3d tangent(-std::sin(th), std::cos(th), 0.0);
    for (int k = 0; k < rows; ++k) {
      const Eigen::Vector3d mu =
          center - radius * inward + Eigen::Vector3d(0, 0, (k + 0.5) * dz);
      Eigen::Vector3d c = building_color * s.uniform(0.7, 1.3);
      if (s.uniform(0.0, 1.0) < 0.12) c = tinted(s, s.uniform(0.8, 1.5), 0.1);
      out.push_back(make(mu, frame_rotation(tangent, Eigen::Vector3d::UnitZ(), inward),
                         {0.6 * radius * dtheta, 0.6 * dz, 0.15}, 0.92, c));
    }
  }
}

void add_boxes(std::vector<Gaussian>& out, int boxes, const Eigen::Vector3d& center,
               Sampler& s) {
  for (int b = 0; b < boxes; ++b) {
    const double r = s.uniform(10.0, 26.0);
    const double th = s.uniform(-60.0, 60.0) * kDeg;
    const Eigen::Vector3d half(s.uniform(0.8, 2.0), s.uniform(0.8, 2.0),
                               s.uniform(0.6, 1.8));
    const Eigen::Vector3d c = center + Eigen::Vector3d(r * std::cos(th), r * std::sin(th), half.z());
    const double yaw = s.uniform(0.0, std::numbers::pi);
    const Eigen::Matrix3d rz =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d color = saturated(s);
    for (int axis = 0; axis < 3; ++axis) {
      const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
      for (const double sign : {-1.0, 1.0}) {
        const Eigen::Vector3d n = sign * rz.col(axis);
        Eigen::Vector3d scale;
        scale << 0.7 * half[a1], 0.7 * half[a2], 0.05;
        out.push_back(make(c + half[axis] * n,
                           frame_rotation(rz.col(a1), rz.col(a2), rz.col(axis)),
                           scale, 0.9, color * s.uniform(0.8, 1.2)));
      }
    }
  }
}

void add_clutter(std::vector<Gaussian>& out, int count, const Eigen::Vector3d& center,
                 Sampler& s) {
  for (int i = 0; i < count; ++i) {
    const double r = s.uniform(8.0, 30.0);
    const double th = s.uniform(-80.0, 80.0) * kDeg;
    const Eigen::Vector3d mu =
        center + Eigen::Vector3d(r * std::cos(th), r * std::sin(th), s.uniform(0.3, 4.0));
    const Eigen::Vector3d scale(s.uniform(0.3, 1.0), s.uniform(0.3, 1.0),
                                s.uniform(0.3, 1.0));
    const Eigen::Vector3d color(s.uniform(kRadianceMin, kRadianceMax),
                                s.uniform(kRadianceMin, kRadianceMax),
                                s.uniform(kRadianceMin, kRadianceMax));
    out.push_back(make(mu, s.rotation(), scale, s.uniform(0.6, 0.95), color));
  }
}

Scene canonicalize(const Scene& scene) {
  std::stringstream buf;
  write_scene_text(scene, buf);
  return read_scene_text(buf, "<procedural>");
}

std::string frame_name(const char* prefix, int frame, int cam, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_f%04d_c%d.%s", prefix, frame, cam, ext);
  return buf;
}

}  // namespace

std::vector<CameraMount> RigSpec::default_mounts() {
  return {
      {"front", {1.539, 0.025, 3.845}, {0.696, 0.420, 0.338}},
      {"front_left", {1.494, -0.091, 3.845}, {0.003, 1.387, -44.205}},
      {"front_right", {1.489, 0.095, 3.846}, {0.189, 0.111, 44.756}},
  };
}

RigSpec RigSpec::full_scale() {
  RigSpec rig;
  rig.width = 1920;
  rig.height = 1300;
  rig.frame_count = 100;
  return rig;
}

void RigSpec::validate() const {
  if (cameras.empty()) throw std::invalid_argument("rig: at least one camera required");
  if (frame_count < 1) throw std::invalid_argument("rig: frame count must be >= 1");
  if (width < 1 || height < 1) throw std::invalid_argument("rig: image size must be positive");
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw std::invalid_argument("rig: hfov must lie in (0, 180)");
  }
  if (!(frame_rate_hz > 0.0)) throw std::invalid_argument("rig: frame rate must be > 0");
  if (!std::isfinite(speed_mps)) throw std::invalid_argument("rig: speed must be finite");
}

CameraIntrinsics RigSpec::intrinsics() const {
  return intrinsics_from_fov(width, height, hfov_deg);
}

CameraPose RigSpec::pose(int frame, int cam) const {
  const CameraMount& m = cameras.at(static_cast<std::size_t>(cam));
  // Simulator frame is left-handed (y right); flip y and the yaw sense.
  const double roll = m.rotation_deg[0] * kDeg;
  const double pitch = m.rotation_deg[1] * kDeg;
  const double yaw = -m.rotation_deg[2] * kDeg;
  const Eigen::Vector3d center(frame * speed_mps / frame_rate_hz + m.location.x(),
                               -m.location.y(), m.location.z());
  const Eigen::Vector3d f(std::cos(pitch) * std::cos(yaw),
                          std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  const Eigen::Vector3d r0 = f.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d d0 = f.cross(r0);
  const Eigen::Vector3d r = std::cos(roll) * r0 + std::sin(roll) * d0;
  const Eigen::Vector3d d = -std::sin(roll) * r0 + std::cos(roll) * d0;
  Eigen::Matrix3d rwc;
  rwc.row(0) = r;
  rwc.row(1) = d;
  rwc.row(2) = f;
  Eigen::Quaterniond q(rwc);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  CameraPose pose;
  pose.rotation = Eigen::Quaterniond(
      round_to_text_precision(q.w()), round_to_text_precision(q.x()),
      round_to_text_precision(q.y()), round_to_text_precision(q.z()));
  const Eigen::Vector3d t = -(pose.rotation_matrix() * center);
  pose.translation = {round_to_text_precision(t.x()), round_to_text_precision(t.y()),
                      round_to_text_precision(t.z())};
  return pose;
}

void ExposurePolicy::validate() const {
  if (!(iso_std >= 0.0)) throw std::invalid_argument("exposure policy: iso_std must be >= 0");
  if (iso_floor < 1) throw std::invalid_argument("exposure policy: iso_floor must be >= 1");
  if (!(iso_mean >= 1.0)) throw std::invalid_argument("exposure policy: iso_mean must be >= 1");
}

int round_iso(double value, int floor) {
  return std::max(floor, static_cast<int>(std::lround(value)));
}

int sample_iso(const ExposurePolicy& policy, int frame, int camera) {
  policy.validate();
  if (policy.mode == ExposureMode::kConst || policy.iso_std == 0.0) {
    return round_iso(policy.iso_mean, policy.iso_floor);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(policy.seed),
                    static_cast<std::uint32_t>(policy.seed >> 32),
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(camera)};
  std::mt19937_64 rng(seq);
  const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
  return round_iso(policy.iso_mean + policy.iso_std * z, policy.iso_floor);
}

double iso_to_exposure(int iso, int iso_ref) {
  if (iso < 1 || iso_ref < 1) throw std::invalid_argument("iso values must be >= 1");
  return static_cast<double>(iso) / iso_ref;
}

Scene build_procedural_scene(std::uint64_t seed, int n_gaussians, const RigSpec& rig) {
  if (n_gaussians < 1) throw std::invalid_argument("procedural scene needs >= 1 Gaussian");
  rig.validate();
  Sampler s(seed);
  const double route = (rig.frame_count - 1) * rig.speed_mps / rig.frame_rate_hz;
  const Eigen::Vector3d center(0.5 * route, 0.0, 0.0);
  Scene scene;
  if (n_gaussians < 8) {
    // Tiny scenes: blobs straight ahead of the front camera.
    for (int i = 0; i < n_gaussians; ++i) {
      const Eigen::Vector3d mu = center + Eigen::Vector3d(15.0 + 2.0 * i, 0.0, 3.8);
      scene.gaussians.push_back(make(mu, Eigen::Quaterniond::Identity(),
                                     {1.0, 1.0, 1.0}, 0.9,
                                     {s.uniform(0.2, 1.0), s.uniform(0.2, 1.0),
                                      s.uniform(0.2, 1.0)}));
    }
    return canonicalize(scene);
  }
  const int ground_budget = static_cast<int>(n_gaussians * 0.36);
  const int facade_budget = static_cast<int>(n_gaussians * 0.40);
  const int boxes = static_cast<int>(n_gaussians * 0.14) / 6;
  auto& g = scene.gaussians;
  add_ground(g, ground_budget, center, s);
  add_facades(g, facade_budget, center, s);
  add_boxes(g, boxes, center, s);
  add_clutter(g, n_gaussians - static_cast<int>(g.size()), center, s);
  return canonicalize(scene);
}

double coverage_fraction(const Scene& scene, const CameraView& view) {
  std::vector<double> transmittance;
  ViewRasterizer(scene.gaussians, scene.sh_degree, view.pose, view.intrinsics)
      .forward(scene.gaussians, &transmittance);
  if (transmittance.empty()) return 0.0;
  const auto covered = std::count_if(transmittance.begin(), transmittance.end(),
                                     [](double t) { return t < 0.5; });
  return static_cast<double>(covered) / static_cast<double>(transmittance.size());
}

DatasetManifest generate(const Scene& scene, const RigSpec& rig,
                         const ExposurePolicy& policy,
                         const std::filesystem::path& out_dir,
                         const GenerateOptions& options) {
  rig.validate();
  policy.validate();
  scene.validate(false);
  if (scene.gaussians.empty()) throw std::invalid_argument("generate: scene has no Gaussians");
  std::error_code ec;
  for (const char* sub : {"images", "gt", "sky", "hdr"}) {
    if (std::string(sub) == "hdr" && !options.write_hdr) continue;
    std::filesystem::create_directories(out_dir / sub, ec);
    if (ec) throw DataError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  const int cams = static_cast<int>(rig.cameras.size());
  const CameraIntrinsics k = rig.intrinsics();
  DatasetManifest manifest;
  manifest.scene_file = "scene.txt";
  manifest.calib_file = "calib.txt";
  manifest.cameras.assign(cams, k);
  for (int f = 0; f < rig.frame_count; ++f) {
    for (int c = 0; c < cams; ++c) {
      ManifestEntry e;
      e.frame = f;
      e.camera = c;
      e.iso = sample_iso(policy, f, c);
      e.exposure = iso_to_exposure(e.iso);
      e.image = std::filesystem::path("images") / frame_name("img", f, c, "ppm");
      e.gt_image = std::filesystem::path("gt") / frame_name("gt", f, c, "ppm");
      e.sky_mask = std::filesystem::path("sky") / frame_name("sky", f, c, "pgm");
      e.pose = rig.pose(f, c);
      manifest.entries.push_back(e);
    }
  }

  std::vector<char> empty_view(manifest.entries.size(), 0);
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    CameraView view;
    view.pose = e.pose;
    view.intrinsics = k;
    std::vector<double> transmittance;
    const ViewRasterizer raster(scene.gaussians, scene.sh_degree, e.pose, k);
    const LinearHDRImage hdr = raster.forward(scene.gaussians, &transmittance);
    empty_view[i] = std::none_of(transmittance.begin(), transmittance.end(),
                                 [](double t) { return t < 0.5; });
    write_ppm(form_ldr(hdr, {e.exposure, kGeneratorGamma}), out_dir / e.image);
    write_ppm(form_ldr(hdr, {1.0, kGeneratorGamma}), out_dir / e.gt_image);
    write_pgm(std::vector<std::uint8_t>(static_cast<std::size_t>(k.width) * k.height, 0),
              k.width, k.height, out_dir / e.sky_mask);
    if (options.write_hdr) {
      write_pfm(hdr, out_dir / "hdr" / frame_name("hdr", e.frame, e.camera, "pfm"));
    }
  });
  for (std::size_t i = 0; i < empty_view.size(); ++i) {
    if (empty_view[i]) {
      std::cerr << "warning: frame " << manifest.entries[i].frame << " camera "
                << manifest.entries[i].camera << " sees no geometry\n";
    }
  }

  Scene stored;
  stored.sh_degree = scene.sh_degree;
  stored.gaussians = scene.gaussians;
  for (const auto& e : manifest.entries) {
    CameraView v;
    v.id = e.view_id(cams);
    v.pose = e.pose;
    v.intrinsics = k;
    v.exposure = e.exposure;
    v.gamma = kGeneratorGamma;
    v.iso = e.iso;
    stored.views.push_back(v);
  }
  save_scene(stored, out_dir / manifest.scene_file);
  export_kitti_calib(manifest.cameras, out_dir / manifest.calib_file);
  manifest.write(out_dir / "manifest.txt");
  return manifest;
}

void export_kitti_calib(std::span<const CameraIntrinsics> cameras,
                        const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + out_path.string());
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const CameraIntrinsics& k = cameras[i];
    k.validate();
    const double p[12] = {k.fx, 0, k.cx, 0, 0, k.fy, k.cy, 0, 0, 0, 1, 0};
    out << 'P' << i << ':';
    for (const double v : p) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.12e", v);
      out << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw DataError("write failed: " + out_path.string());
}

}  // namespace hdrsplat
