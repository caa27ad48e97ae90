#include <cmath>
#include <random>

#include "doctest.h"
#include "hdrsplat/parallel.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "test_support.hpp"

using namespace hdrsplat;
using hdrsplat::testing::axis_view;
using hdrsplat::testing::brute_force_render;
using hdrsplat::testing::max_abs_diff;
using hdrsplat::testing::random_scene;

namespace {

Gaussian blob(const Eigen::Vector3d& mu, double scale, double opacity,
              const Eigen::Vector3d& color) {
  return Gaussian::from_activated(mu, Eigen::Quaterniond::Identity(),
                                  Eigen::Vector3d::Constant(scale), opacity, color);
}

PixelGradient random_upstream(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PixelGradient g(w, h);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

double dot(const LinearHDRImage& a, const PixelGradient& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("rasterizer") {

TEST_CASE("project: on-axis center, culling behind the camera, depth order") {
  Scene s;
  s.views.push_back(axis_view(0, 33, 21, 100.0));
  s.gaussians.push_back(blob({0, 0, 2}, 0.1, 0.5, {1, 1, 1}));
  auto p = project(s, s.views[0]);
  REQUIRE(p.size() == 1);
  CHECK(p[0].pixel_center.x() == doctest::Approx(16.0));
  CHECK(p[0].pixel_center.y() == doctest::Approx(10.0));
  CHECK(p[0].depth == 2.0);

  s.gaussians.push_back(blob({0, 0, -2}, 0.1, 0.5, {1, 1, 1}));
  CHECK(project(s, s.views[0]).size() == 1);

  // far outside the frustum (> 3σ beyond the image)
  s.gaussians.push_back(blob({50, 0, 2}, 0.1, 0.5, {1, 1, 1}));
  CHECK(project(s, s.views[0]).size() == 1);

  s.gaussians.push_back(blob({0.01, 0, 1}, 0.1, 0.5, {1, 1, 1}));
  p = project(s, s.views[0]);
  REQUIRE(p.size() == 2);
  CHECK(p[0].depth == 1.0);
  CHECK(p[1].depth == 2.0);
  CHECK(p[0].source_index == 3);
  CHECK(p[1].source_index == 0);
}

TEST_CASE("project: equal depths keep source order") {
  Scene s;
  s.views.push_back(axis_view(0, 16, 16, 20.0));
  for (int k = 0; k < 6; ++k) s.gaussians.push_back(blob({0.05 * k, 0, 3}, 0.2, 0.5, {1, 0, 0}));
  const auto p = project(s, s.views[0]);
  REQUIRE(p.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(p[k].source_index == static_cast<std::size_t>(k));
}

TEST_CASE("render: single clamped Gaussian gives 0.99 at its center") {
  Scene s;
  s.views.push_back(axis_view(0, 9, 9, 20.0));
  s.gaussians.push_back(blob({0, 0, 2}, 0.05, 0.9999, {1, 0, 0}));
  const auto img = render_hdr(s, s.views[0]);
  CHECK(img.at(4, 4, 0) == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(img.at(4, 4, 1) == 0.0);
  CHECK(img.at(4, 4, 2) == 0.0);
}

TEST_CASE("render: empty scene is background") {
  Scene s;
  s.views.push_back(axis_view(0, 20, 17, 20.0));
  RenderSettings rs;
  rs.background = Eigen::Vector3d(0.1, 0.2, 0.3);
  const auto img = render_hdr(s, s.views[0], rs);
  for (int y = 0; y < 17; ++y) {
    for (int x = 0; x < 20; ++x) {
      CHECK(img.at(x, y, 0) == 0.1);
      CHECK(img.at(x, y, 1) == 0.2);
      CHECK(img.at(x, y, 2) == 0.3);
    }
  }
}

TEST_CASE("render: two-layer compositing") {
  Scene s;
  s.views.push_back(axis_view(0, 9, 9, 20.0));
  // front α'=0.5 red, back α' clamped to 0.99 green
  s.gaussians.push_back(blob({0, 0, 4}, 0.05, 0.9999, {0, 1, 0}));
  s.gaussians.push_back(blob({0, 0, 2}, 0.05, 0.5, {1, 0, 0}));
  const auto img = render_hdr(s, s.views[0]);
  // independent scalar evaluation: 1·0.5 for red, then 0.99·(1−0.5) for green
  const double red = 1.0 * 0.5;
  const double green = 0.99 * (1.0 - 0.5);
  CHECK(img.at(4, 4, 0) == doctest::Approx(red).epsilon(1e-12));
  CHECK(img.at(4, 4, 1) == doctest::Approx(green).epsilon(1e-12));
  CHECK(img.at(4, 4, 2) == 0.0);
}

TEST_CASE("render matches the brute-force oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    // size not a multiple of the tile size
    Scene s = random_scene(seed, 60, 45, 37, 30.0, 0.2, 0.999, 0.1, 0.6);
    s.views[0] = axis_view(0, 45, 37, 30.0, Eigen::Vector3d(0.1, 0.05, -0.2));
    s.views[0].pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitY()));
    for (int sh : {0, 1}) {
      s.sh_degree = sh;
      if (sh == 1) {
        for (auto& g : s.gaussians) g.sh1[0] = Eigen::Vector3d(0.3, -0.4, 0.2);
      }
      RenderSettings rs;
      rs.background = Eigen::Vector3d(0.05, 0.0, 0.1);
      const auto fast = render_hdr(s, s.views[0], rs);
      const auto slow = brute_force_render(s, s.views[0], rs.background);
      CHECK(max_abs_diff(fast.values(), slow.values()) < 1e-12);
    }
  }
}

TEST_CASE("linearity in color and energy bound") {
  Scene s = random_scene(11, 40, 32, 32, 25.0, 0.3, 0.999);
  const auto base = render_hdr(s, s.views[0]);
  Scene scaled = s;
  for (auto& g : scaled.gaussians) g.color *= 3.0;
  const auto img3 = render_hdr(scaled, scaled.views[0]);
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i] == 0.0) {
      CHECK(img3[i] == 0.0);
      continue;
    }
    worst = std::max(worst, std::abs(img3[i] - 3.0 * base[i]) / (3.0 * base[i]));
  }
  CHECK(worst < 1e-12);

  // Σ α'T ≤ 1: white Gaussians give at most 1 per channel
  Scene white = s;
  for (auto& g : white.gaussians) g.color = Eigen::Vector3d::Ones();
  const auto w = render_hdr(white, white.views[0]);
  for (double v : w.values()) CHECK(v <= 1.0 + 1e-12);
}

TEST_CASE("forward and backward are deterministic across worker counts") {
  Scene s = random_scene(5, 80, 70, 50, 40.0, 0.2, 0.9);
  const PixelGradient up = random_upstream(70, 50, 9);
  const int saved = worker_count();
  set_worker_count(1);
  const auto a = render_hdr(s, s.views[0]);
  const auto ga = render_hdr_backward(s, s.views[0], up);
  set_worker_count(4);
  const auto b = render_hdr(s, s.views[0]);
  const auto gb = render_hdr_backward(s, s.views[0], up);
  const auto c = render_hdr(s, s.views[0]);
  set_worker_count(saved);
  CHECK(a == b);
  CHECK(b == c);
  CHECK(ga.d_color == gb.d_color);
  CHECK(ga.d_opacity_logit == gb.d_opacity_logit);
}

TEST_CASE("backward: zero upstream, full-coverage single Gaussian") {
  Scene s;
  s.views.push_back(axis_view(0, 8, 8, 10.0));
  s.gaussians.push_back(blob({0, 0, 2}, 3.0, 0.6, {0.3, 0.5, 0.7}));
  const auto zero = render_hdr_backward(s, s.views[0], PixelGradient(8, 8));
  CHECK(zero.d_color[0].isZero(0.0));
  CHECK(zero.d_opacity_logit[0] == 0.0);

  // image = c·α'(pixel), so ∂Σimage/∂c = Σα' per channel
  const auto g = render_hdr_backward(s, s.views[0], PixelGradient(8, 8, 1.0));
  Scene unit = s;
  unit.gaussians[0].color = Eigen::Vector3d::Ones();
  const auto alpha = render_hdr(unit, unit.views[0]);
  double covered = 0.0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) covered += alpha.at(x, y, 0);
  }
  for (int c = 0; c < 3; ++c) CHECK(g.d_color[0][c] == doctest::Approx(covered).epsilon(1e-12));
  // isotropic footprint centred on the principal point: σ² = (f·s/z)² + 0.3
  const double var = std::pow(10.0 * 3.0 / 2.0, 2) + 0.3;
  double expect = 0.0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const double d2 = std::pow(x - 3.5, 2) + std::pow(y - 3.5, 2);
      expect += 0.6 * std::exp(-0.5 * d2 / var);
    }
  }
  CHECK(covered == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on every coordinate") {
  Scene s = random_scene(21, 5, 8, 8, 8.0, 0.2, 0.6, 0.5, 1.0);
  const PixelGradient up = random_upstream(8, 8, 4);
  const auto g = render_hdr_backward(s, s.views[0], up);
  const double h = 1e-4;
  auto f = [&](const Scene& sc) { return dot(render_hdr(sc, sc.views[0]), up); };
  for (std::size_t k = 0; k < s.gaussians.size(); ++k) {
    for (int c = 0; c < 3; ++c) {
      Scene p = s, m = s;
      p.gaussians[k].color[c] += h;
      m.gaussians[k].color[c] -= h;
      const double num = (f(p) - f(m)) / (2 * h);
      CHECK(hdrsplat::testing::grad_close(g.d_color[k][c], num, 1e-4, 1e-9));
    }
    Scene p = s, m = s;
    p.gaussians[k].opacity_logit += h;
    m.gaussians[k].opacity_logit -= h;
    const double num = (f(p) - f(m)) / (2 * h);
    CHECK(hdrsplat::testing::grad_close(g.d_opacity_logit[k], num, 1e-4, 1e-9));
  }
}

TEST_CASE("backward: directional derivatives for 100 random directions, degree 1") {
  Scene s = random_scene(33, 12, 24, 20, 20.0, 0.2, 0.6, 0.4, 0.9);
  s.sh_degree = 1;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& gs : s.gaussians) {
    for (auto& b : gs.sh1) b = 0.05 * Eigen::Vector3d(n(rng), n(rng), n(rng));
  }
  const PixelGradient up = random_upstream(24, 20, 8);
  ViewRasterizer r(s.gaussians, 1, s.views[0].pose, s.views[0].intrinsics);
  const auto g = r.backward(s.gaussians, up);
  auto f = [&](const std::vector<Gaussian>& gs) { return dot(r.forward(gs), up); };
  const double h = 1e-5;
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Gaussian> plus = s.gaussians, minus = s.gaussians;
    double analytic = 0.0;
    for (std::size_t k = 0; k < s.gaussians.size(); ++k) {
      const Eigen::Vector3d dc(n(rng), n(rng), n(rng));
      const double dop = n(rng);
      std::array<Eigen::Vector3d, 3> dsh;
      for (auto& d : dsh) d = Eigen::Vector3d(n(rng), n(rng), n(rng));
      plus[k].color += h * dc;
      minus[k].color -= h * dc;
      plus[k].opacity_logit += h * dop;
      minus[k].opacity_logit -= h * dop;
      analytic += g.d_color[k].dot(dc) + g.d_opacity_logit[k] * dop;
      for (int b = 0; b < 3; ++b) {
        plus[k].sh1[b] += h * dsh[b];
        minus[k].sh1[b] -= h * dsh[b];
        analytic += g.d_sh1[k][b].dot(dsh[b]);
      }
    }
    const double numeric = (f(plus) - f(minus)) / (2 * h);
    if (!hdrsplat::testing::grad_close(analytic, numeric, 1e-4, 1e-9)) {
      ++bad;
      MESSAGE("direction " << trial << ": analytic " << analytic << " numeric " << numeric);
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("backward: no gradient past early termination") {
  Scene s;
  s.views.push_back(axis_view(0, 9, 9, 20.0));
  // α clamps to 0.99; T after each layer: 1e-2, 1e-4 (rounds just above), 1e-6.
  // compositing stops after the third, the fourth never contributes
  s.gaussians.push_back(blob({0, 0, 2}, 0.05, 0.9999, {1, 0, 0}));
  s.gaussians.push_back(blob({0, 0, 3}, 0.05, 0.9999, {0, 1, 0}));
  s.gaussians.push_back(blob({0, 0, 4}, 0.05, 0.9999, {0, 0, 1}));
  s.gaussians.push_back(blob({0, 0, 5}, 0.05, 0.9999, {1, 1, 1}));
  PixelGradient up(9, 9);
  for (int c = 0; c < 3; ++c) up.at(4, 4, c) = 1.0;
  const auto g = render_hdr_backward(s, s.views[0], up);
  CHECK(g.d_color[3].isZero(0.0));
  CHECK(g.d_opacity_logit[3] == 0.0);
  CHECK(g.d_color[2][2] > 0.0);
  CHECK(g.d_color[1][1] > 0.0);
}

TEST_CASE("rasterizer rejects mismatched inputs") {
  Scene s = random_scene(1, 3, 16, 16, 16.0);
  ViewRasterizer r(s.gaussians, 0, s.views[0].pose, s.views[0].intrinsics);
  std::vector<Gaussian> fewer(s.gaussians.begin(), s.gaussians.begin() + 2);
  CHECK_THROWS_AS(r.forward(fewer), std::invalid_argument);
  CHECK_THROWS_AS(r.backward(s.gaussians, PixelGradient(8, 8)), std::invalid_argument);
}

}  // TEST_SUITE
