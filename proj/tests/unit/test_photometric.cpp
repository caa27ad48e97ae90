#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "hdrsplat/photometric.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "test_support.hpp"

using namespace hdrsplat;

TEST_SUITE("photometric") {

TEST_CASE("expose: pointwise gain with clamps") {
  CHECK(expose_value(0.5, 1.0) == 0.5);
  CHECK(expose_value(0.5, 100.0) == 10.0);
  CHECK(expose_value(0.0, 2.0) == 1e-6);
  LinearHDRImage img(2, 1, 0.25);
  img[5] = 7.0;
  const auto out = expose(img, 2.0);
  CHECK(out[0] == 0.5);
  CHECK(out[5] == 10.0);
  CHECK_THROWS_AS(expose(img, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(expose(img, -1.0), std::invalid_argument);
}

TEST_CASE("tone_map examples") {
  CHECK(tone_map_value(0.25, 1.0) == 0.25);
  CHECK(tone_map_value(0.25, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  // 0.5^(1/2.2) evaluated independently as exp(ln 0.5 / 2.2)
  CHECK(tone_map_value(0.5, 2.2) == doctest::Approx(0.7297400528).epsilon(1e-9));
  CHECK(tone_map_value(4.0, 2.0) == 1.0);
  CHECK_THROWS_AS(tone_map(LinearHDRImage(1, 1, 0.5), 0.0), std::invalid_argument);
}

TEST_CASE("tone_map_dgamma examples") {
  for (double g : {0.5, 1.0, 2.2, 4.0}) CHECK(tone_map_dgamma(1.0, g) == 0.0);
  // −(ln 0.25 / 4)·0.5
  CHECK(tone_map_dgamma(0.25, 2.0) == doctest::Approx(0.1732867951).epsilon(1e-9));
  CHECK(tone_map_dgamma(std::exp(-1.0), 1.0) == doctest::Approx(0.3678794412).epsilon(1e-9));
  // clamp active
  CHECK(tone_map_dgamma(3.0, 2.0) == 0.0);
  CHECK(tone_map_dx(3.0, 2.0) == 0.0);
  CHECK(tone_map_dx(0.25, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("tone_map derivatives match central differences on a grid") {
  const double h = 1e-6;
  int checked = 0;
  for (int xi = 1; xi <= 99; ++xi) {
    const double x = xi / 100.0;
    for (int gi = 1; gi <= 8; ++gi) {
      const double g = gi * 0.5;
      const double num_g = (tone_map_value(x, g + h) - tone_map_value(x, g - h)) / (2 * h);
      const double num_x = (tone_map_value(x + h, g) - tone_map_value(x - h, g)) / (2 * h);
      CHECK(hdrsplat::testing::grad_close(tone_map_dgamma(x, g), num_g, 1e-5, 1e-12));
      CHECK(hdrsplat::testing::grad_close(tone_map_dx(x, g), num_x, 1e-5, 1e-12));
      ++checked;
    }
  }
  CHECK(checked == 99 * 8);
}

TEST_CASE("tone_map is monotone and form_ldr stays in [0,1]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double g : {0.5, 1.0, 2.2, 3.7}) {
    double prev = -1.0;
    for (int i = 0; i <= 2000; ++i) {
      const double v = tone_map_value(1e-6 + i * 0.001, g);
      CHECK(v >= prev);
      prev = v;
    }
  }
  LinearHDRImage hdr(20, 10);
  for (auto& v : hdr.values()) v = 5.0 * u(rng);
  for (int t = 0; t < 20; ++t) {
    const PhotometricParams p{std::exp(4.0 * u(rng) - 2.0), 0.3 + 4.0 * u(rng)};
    for (double v : form_ldr(hdr, p).values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("form_ldr examples") {
  LinearHDRImage hdr(3, 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (auto& v : hdr.values()) v = u(rng);
  const auto same = form_ldr(hdr, {1.0, 1.0});
  for (std::size_t i = 0; i < hdr.size(); ++i) CHECK(same[i] == hdr[i]);

  const auto half = form_ldr(LinearHDRImage(1, 1, 0.25), {2.0, 2.0});
  CHECK(half[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

  const auto sat = form_ldr(LinearHDRImage(1, 1, 5.0), {4.0, 1.0});
  CHECK(sat[0] == 1.0);
  CHECK_THROWS_AS(form_ldr(hdr, {0.0, 2.2}), std::invalid_argument);
  CHECK_THROWS_AS(form_ldr(hdr, {1.0, -2.2}), std::invalid_argument);
}

TEST_CASE("render_params_for_eval averages") {
  std::vector<PhotometricParams> ps = {{1.0, 2.0}, {2.0, 2.4}, {3.0, 2.2}};
  const auto m = render_params_for_eval(std::span<const PhotometricParams>(ps));
  CHECK(m.exposure == doctest::Approx(2.0));
  CHECK(m.gamma == doctest::Approx(2.2));

  std::vector<CameraView> views(2);
  views[0].exposure = 0.7;
  views[0].gamma = 2.0;
  views[1].exposure = 0.7;
  views[1].gamma = 2.4;
  const auto mv = render_params_for_eval(std::span<const CameraView>(views));
  CHECK(mv.gamma == doctest::Approx(2.2));
  CHECK(mv.exposure == doctest::Approx(0.7));

  std::vector<PhotometricParams> one = {{1.3, 1.9}};
  const auto s = render_params_for_eval(std::span<const PhotometricParams>(one));
  CHECK(s.exposure == 1.3);
  CHECK(s.gamma == 1.9);

  CHECK_THROWS_AS(render_params_for_eval(std::span<const PhotometricParams>()),
                  std::invalid_argument);
}

TEST_CASE("sRGB transfer") {
  CHECK(srgb_oetf_inverse(0.0) == 0.0);
  CHECK(srgb_oetf_inverse(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(srgb_oetf_inverse(0.5) == doctest::Approx(0.2140411405).epsilon(1e-9));
  CHECK(srgb_oetf_inverse(0.04045) == doctest::Approx(0.04045 / 12.92).epsilon(1e-15));
  bool flagged = false;
  CHECK(srgb_oetf_inverse(1.5, &flagged) == doctest::Approx(1.0));
  CHECK(flagged);
  flagged = false;
  srgb_oetf_inverse(0.3, &flagged);
  CHECK_FALSE(flagged);
  for (int i = 0; i <= 100; ++i) {
    const double v = i / 100.0;
    CHECK(srgb_oetf(srgb_oetf_inverse(v)) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("PIR at image level: exposed ratio equals the exposure ratio") {
  Scene s = hdrsplat::testing::random_scene(8, 30, 32, 24, 25.0);
  const auto hdr = render_hdr(s, s.views[0]);
  const double ei = 0.8, ej = 1.9;
  const auto xi = expose(hdr, ei);
  const auto xj = expose(hdr, ej);
  int compared = 0;
  for (std::size_t k = 0; k < hdr.size(); ++k) {
    const bool clamped = xi[k] <= kExposedMin || xj[k] <= kExposedMin ||
                         xi[k] >= kExposedMax || xj[k] >= kExposedMax;
    if (clamped) continue;
    CHECK(std::abs(xj[k] / xi[k] - ej / ei) <= 4e-16 * (ej / ei));
    ++compared;
  }
  CHECK(compared > 100);
}

}  // TEST_SUITE
