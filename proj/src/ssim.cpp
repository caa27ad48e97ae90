#include "hdrsplat/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace hdrsplat {
namespace {

constexpr int kRadius = kSsimWindow / 2;

std::array<double, kSsimWindow> make_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kRadius;
    w[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

const std::array<double, kSsimWindow>& window() {
  static const auto w = make_window();
  return w;
}

// Separable zero-padded blur of one H×W plane. The kernel is symmetric, so
// this operator is its own adjoint.
void blur_plane(const double* src, double* dst, int w, int h,
                std::vector<double>& tmp) {
  const auto& k = window();
  tmp.assign(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = src + static_cast<std::size_t>(y) * w;
    double* out = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - kRadius);
      const int hi = std::min(w - 1, x + kRadius);
      double acc = 0.0;
      for (int xx = lo; xx <= hi; ++xx) acc += k[xx - x + kRadius] * row[xx];
      out[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - kRadius);
    const int hi = std::min(h - 1, y + kRadius);
    double* out = dst + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) out[x] = 0.0;
    for (int yy = lo; yy <= hi; ++yy) {
      const double kw = k[yy - y + kRadius];
      const double* in = tmp.data() + static_cast<std::size_t>(yy) * w;
      for (int x = 0; x < w; ++x) out[x] += kw * in[x];
    }
  }
}

template <class Tag>
std::vector<double> to_planar(const Image<Tag>& img) {
  const std::size_t n = img.pixel_count();
  std::vector<double> out(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) out[c * n + p] = img[p * 3 + c];
  }
  return out;
}

}  // namespace

SsimReference::SsimReference(const LDRImage& reference)
    : width_(reference.width()), height_(reference.height()) {
  if (reference.empty()) throw std::invalid_argument("ssim: empty image");
  const std::size_t n = reference.pixel_count();
  ref_ = to_planar(reference);
  mu_ref_.resize(3 * n);
  sq_ref_.resize(3 * n);
  std::vector<double> sq(n), tmp;
  for (int c = 0; c < 3; ++c) {
    const double* r = ref_.data() + c * n;
    for (std::size_t p = 0; p < n; ++p) sq[p] = r[p] * r[p];
    blur_plane(r, mu_ref_.data() + c * n, width_, height_, tmp);
    blur_plane(sq.data(), sq_ref_.data() + c * n, width_, height_, tmp);
  }
}

double SsimReference::evaluate(const LDRImage& image) const {
  return run(image, nullptr);
}

double SsimReference::evaluate(const LDRImage& image, PixelGradient& grad) const {
  return run(image, &grad);
}

double SsimReference::run(const LDRImage& image, PixelGradient* grad) const {
  if (image.width() != width_ || image.height() != height_) {
    throw std::invalid_argument("ssim: image dimensions differ");
  }
  const std::size_t n = image.pixel_count();
  const std::vector<double> x = to_planar(image);
  std::vector<double> tmp, prod(n), mu_x(n), sq_x(n), cross(n);
  std::vector<double> d_mu, d_sq, d_cross;
  if (grad) {
    d_mu.resize(n);
    d_sq.resize(n);
    d_cross.resize(n);
    if (grad->width() != width_ || grad->height() != height_) {
      *grad = PixelGradient(width_, height_);
    }
  }
  const double inv_count = 1.0 / static_cast<double>(3 * n);
  double total = 0.0;

  for (int c = 0; c < 3; ++c) {
    const double* xc = x.data() + c * n;
    const double* yc = ref_.data() + c * n;
    const double* mu_y = mu_ref_.data() + c * n;
    const double* sq_y = sq_ref_.data() + c * n;

    blur_plane(xc, mu_x.data(), width_, height_, tmp);
    for (std::size_t p = 0; p < n; ++p) prod[p] = xc[p] * xc[p];
    blur_plane(prod.data(), sq_x.data(), width_, height_, tmp);
    for (std::size_t p = 0; p < n; ++p) prod[p] = xc[p] * yc[p];
    blur_plane(prod.data(), cross.data(), width_, height_, tmp);

    double channel_sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double m1 = mu_x[p];
      const double m2 = mu_y[p];
      const double var1 = sq_x[p] - m1 * m1;
      const double var2 = sq_y[p] - m2 * m2;
      const double cov = cross[p] - m1 * m2;
      const double n1 = 2.0 * m1 * m2 + kSsimC1;
      const double n2 = 2.0 * cov + kSsimC2;
      const double d1 = m1 * m1 + m2 * m2 + kSsimC1;
      const double d2 = var1 + var2 + kSsimC2;
      const double s = (n1 * n2) / (d1 * d2);
      channel_sum += s;
      if (grad) {
        // s as a function of (μx, E[x²], E[xy]) with the reference fixed.
        d_mu[p] = s * (2.0 * m2 / n1 - 2.0 * m2 / n2 - 2.0 * m1 / d1 +
                       2.0 * m1 / d2) * inv_count;
        d_sq[p] = -s / d2 * inv_count;
        d_cross[p] = 2.0 * s / n2 * inv_count;
      }
    }
    total += channel_sum;

    if (grad) {
      blur_plane(d_mu.data(), d_mu.data(), width_, height_, tmp);
      blur_plane(d_sq.data(), d_sq.data(), width_, height_, tmp);
      blur_plane(d_cross.data(), d_cross.data(), width_, height_, tmp);
      for (std::size_t p = 0; p < n; ++p) {
        (*grad)[p * 3 + c] = d_mu[p] + 2.0 * xc[p] * d_sq[p] + yc[p] * d_cross[p];
      }
    }
  }
  return total * inv_count;
}

double ssim(const LDRImage& a, const LDRImage& b) {
  require_same_shape(a, b, "ssim");
  return SsimReference(b).evaluate(a);
}

}  // namespace hdrsplat
