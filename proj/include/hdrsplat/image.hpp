#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <string>
#include <stdexcept>
#include <vector>

namespace hdrsplat {

// Interleaved RGB raster of doubles. The tag keeps radiance, tone-mapped and
// gradient images from being mixed up at API boundaries.
template <class Tag>
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y, int c) {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  double at(int x, int y, int c) const {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  template <class Other>
  bool same_shape(const Image<Other>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image& a, const Image& b) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct LinearRadianceTag {};
struct ToneMappedTag {};
struct GradientTag {};

// Non-negative linear radiance, unbounded above.
using LinearHDRImage = Image<LinearRadianceTag>;
// Tone-mapped values in [0, 1].
using LDRImage = Image<ToneMappedTag>;
// Signed per-pixel derivative of a scalar loss.
using PixelGradient = Image<GradientTag>;

// Reinterprets pixel values under a different tag; invariants are the caller's.
template <class To, class From>
Image<To> retag(const Image<From>& src) {
  Image<To> out(src.width(), src.height());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i];
  return out;
}

template <class A, class B>
void require_same_shape(const Image<A>& a, const Image<B>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": image dimensions differ");
  }
}

}  // namespace hdrsplat
