#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hdrsplat/datagen.hpp"
#include "hdrsplat/errors.hpp"
#include "hdrsplat/scene.hpp"
#include "test_support.hpp"

using namespace hdrsplat;
using hdrsplat::testing::temp_dir;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void require_equal(const Scene& a, const Scene& b) {
  REQUIRE(a.sh_degree == b.sh_degree);
  REQUIRE(a.gaussians.size() == b.gaussians.size());
  REQUIRE(a.views.size() == b.views.size());
  for (std::size_t k = 0; k < a.gaussians.size(); ++k) {
    const Gaussian& x = a.gaussians[k];
    const Gaussian& y = b.gaussians[k];
    for (int i = 0; i < 3; ++i) {
      CHECK(same_bits(x.mu[i], y.mu[i]));
      CHECK(same_bits(x.log_scale[i], y.log_scale[i]));
      CHECK(same_bits(x.color[i], y.color[i]));
      for (int s = 0; s < 3; ++s) CHECK(same_bits(x.sh1[s][i], y.sh1[s][i]));
    }
    CHECK(same_bits(x.rot.w(), y.rot.w()));
    CHECK(same_bits(x.rot.x(), y.rot.x()));
    CHECK(same_bits(x.rot.y(), y.rot.y()));
    CHECK(same_bits(x.rot.z(), y.rot.z()));
    CHECK(same_bits(x.opacity_logit, y.opacity_logit));
  }
  for (std::size_t v = 0; v < a.views.size(); ++v) {
    const CameraView& x = a.views[v];
    const CameraView& y = b.views[v];
    CHECK(x.id == y.id);
    CHECK(x.intrinsics == y.intrinsics);
    CHECK(same_bits(x.pose.rotation.w(), y.pose.rotation.w()));
    CHECK(same_bits(x.pose.rotation.x(), y.pose.rotation.x()));
    CHECK(same_bits(x.pose.rotation.y(), y.pose.rotation.y()));
    CHECK(same_bits(x.pose.rotation.z(), y.pose.rotation.z()));
    for (int i = 0; i < 3; ++i) CHECK(same_bits(x.pose.translation[i], y.pose.translation[i]));
    CHECK(same_bits(x.exposure, y.exposure));
    CHECK(same_bits(x.gamma, y.gamma));
    CHECK(x.iso == y.iso);
  }
}

Scene two_gaussian_scene() {
  Scene s;
  s.gaussians.push_back(Gaussian::from_activated(
      {0.5, -0.25, 3.0}, Eigen::Quaterniond(0.9, 0.1, -0.2, 0.3).normalized(),
      {0.3, 0.2, 0.1}, 0.7, {0.2, 0.4, 1.5}));
  s.gaussians.push_back(Gaussian::from_activated(
      {-1.0, 0.75, 5.5}, Eigen::Quaterniond::Identity(), {1.0, 1.0, 0.05}, 0.25,
      {0.01, 0.02, 0.03}));
  CameraView v = hdrsplat::testing::axis_view(7, 32, 24, 20.0);
  v.exposure = 1.25;
  v.gamma = 2.3;
  v.iso = 10;
  s.views.push_back(v);
  return s;
}

std::string to_text(const Scene& s) {
  std::ostringstream out;
  write_scene_text(s, out);
  return out.str();
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("covariance_of: identity, axis scaling, rotated scaling") {
  Gaussian g;
  CHECK(covariance_of(g).isApprox(Eigen::Matrix3d::Identity(), 1e-15));

  g.log_scale = Eigen::Vector3d(std::log(2.0), 0.0, 0.0);
  CHECK((covariance_of(g) - Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()).norm() < 1e-14);

  // 90° about z swaps the x and y axes: R·diag(4,1,1)·Rᵀ = diag(1,4,1).
  const double h = std::sqrt(0.5);
  g.rot = Eigen::Quaterniond(h, 0.0, 0.0, h);
  const Eigen::Matrix3d c = covariance_of(g);
  const Eigen::Matrix3d expected = Eigen::Vector3d(1, 4, 1).asDiagonal();
  CHECK((c - expected).norm() < 1e-14);
}

TEST_CASE("covariance_of is symmetric PSD for random rotations and scales") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ls(-5.0, 3.0);
  double min_eig = 1.0;
  double max_asym = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Gaussian g;
    g.rot = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
    g.log_scale = Eigen::Vector3d(ls(rng), ls(rng), ls(rng));
    const Eigen::Matrix3d c = covariance_of(g);
    max_asym = std::max(max_asym, (c - c.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  CHECK(max_asym == 0.0);
  CHECK(min_eig >= -1e-9);
}

TEST_CASE("intrinsics_from_fov examples") {
  const auto full = intrinsics_from_fov(1920, 1300, 60.0);
  CHECK(std::abs(full.fx - 1662.77) < 0.01);
  CHECK(full.fy == full.fx);
  CHECK(full.cx == 959.5);
  CHECK(full.cy == 649.5);

  const auto tiny = intrinsics_from_fov(2, 2, 90.0);
  CHECK(tiny.fx == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tiny.cx == 0.5);
  CHECK(tiny.cy == 0.5);

  // 50 / tan(30°) = 50·√3
  const auto mid = intrinsics_from_fov(100, 50, 60.0);
  CHECK(std::abs(mid.fx - 86.6025403784) < 1e-9);

  CHECK_THROWS_AS(intrinsics_from_fov(100, 50, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(intrinsics_from_fov(100, 50, 180.0), std::invalid_argument);
  CHECK_THROWS_AS(intrinsics_from_fov(0, 50, 60.0), std::invalid_argument);
}

TEST_CASE("intrinsics_from_fov is monotone decreasing in hfov") {
  double prev = std::numeric_limits<double>::infinity();
  for (double fov = 1.0; fov < 180.0; fov += 0.5) {
    const double fx = intrinsics_from_fov(640, 480, fov).fx;
    CHECK(fx < prev);
    prev = fx;
  }
}

TEST_CASE("text round trip is exact") {
  const Scene s = two_gaussian_scene();
  const std::string first = to_text(s);
  std::istringstream in(first);
  const Scene loaded = read_scene_text(in);
  // A saved file reloads and re-saves to the same bytes, and reloading is stable.
  CHECK(to_text(loaded) == first);
  std::istringstream in2(to_text(loaded));
  require_equal(read_scene_text(in2), loaded);
  CHECK(loaded.views[0].iso == 10);
  CHECK(std::abs(loaded.gaussians[0].opacity() - 0.7) < 1e-9);
}

TEST_CASE("text round trip through files, degree-1 scene") {
  Scene s = two_gaussian_scene();
  s.sh_degree = 1;
  s.gaussians[0].sh1[1] = Eigen::Vector3d(0.1, -0.2, 0.3);
  const auto dir = temp_dir("scene_files");
  save_scene(s, dir / "a.txt");
  const Scene a = load_scene(dir / "a.txt");
  save_scene(a, dir / "b.txt");
  const Scene b = load_scene(dir / "b.txt");
  require_equal(a, b);
  CHECK(b.sh_degree == 1);
  CHECK(b.gaussians[0].sh1[1].isApprox(Eigen::Vector3d(0.1, -0.2, 0.3), 1e-9));
}

TEST_CASE("binary round trip is bit-exact for arbitrary doubles") {
  Scene s = hdrsplat::testing::random_scene(3, 20, 64, 48, 50.0);
  s.sh_degree = 1;
  for (auto& g : s.gaussians) g.sh1[2] = Eigen::Vector3d::Random();
  s.views[0].exposure = 1.0 / 3.0;
  s.views[0].iso = 5;
  std::stringstream io;
  write_scene_binary(s, io);
  require_equal(read_scene_binary(io), s);

  const auto dir = temp_dir("scene_bin");
  save_scene_binary(s, dir / "s.bin");
  require_equal(load_scene_binary(dir / "s.bin"), s);
}

TEST_CASE("negative scale is a parse error naming the record") {
  const std::string text =
      "hdrsplat-scene v1\n"
      "G 0 0 1 1 0 0 0 0.1 0.1 0.1 0.5 0.2 0.2 0.2\n"
      "G 0 0 2 1 0 0 0 0.1 -0.1 0.1 0.5 0.2 0.2 0.2\n";
  std::istringstream in(text);
  try {
    read_scene_text(in, "bad.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.record() == 2);
    CHECK(std::string(e.what()).find("bad.txt") != std::string::npos);
  }
}

TEST_CASE("malformed scene files") {
  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_scene_text(in), ParseError);
  };
  fails("hdrsplat-scene v2\n");
  fails("hdrsplat-scene v1\nG 0 0 1\n");
  fails("hdrsplat-scene v1\nG 0 0 1 1 0 0 0 0.1 0.1 0.1 1.5 0.2 0.2 0.2\n");
  fails("hdrsplat-scene v1\nX 1 2 3\n");
  fails("hdrsplat-scene v1\nG 0 0 1 1 0 0 0 0.1 0.1 0.1 0.5 0.2 0.2 abc\n");
  // duplicate view ids
  fails("hdrsplat-scene v1\n"
        "V 0 1 0 0 0 0 0 0 8 8 8 8 3.5 3.5 1 2.2\n"
        "V 0 1 0 0 0 0 0 0 8 8 8 8 3.5 3.5 1 2.2\n");
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.txt"), DataError);
}

TEST_CASE("scene validation for training") {
  Scene s = two_gaussian_scene();
  CHECK_NOTHROW(s.validate(false));
  CHECK_THROWS(s.validate(true));  // no observation yet
  s.views[0].observation = LDRImage(32, 24, 0.5);
  CHECK_NOTHROW(s.validate(true));
  Scene empty;
  empty.views = s.views;
  CHECK_THROWS(empty.validate(true));
  CHECK(s.view_by_id(7).id == 7);
  CHECK_FALSE(s.view_index(3).has_value());
}

TEST_CASE("generated scene file holds 3 cameras × frame count views") {
  RigSpec rig;
  rig.frame_count = 3;
  const auto dir = temp_dir("scene_generated");
  const auto m = generate(build_procedural_scene(0, 80, rig), rig, ExposurePolicy{}, dir);
  const Scene loaded = load_scene(dir / m.scene_file);
  CHECK(loaded.views.size() == 3u * 3u);
  CHECK(loaded.gaussians.size() == 80u);
}

}  // TEST_SUITE
