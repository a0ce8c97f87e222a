#pragma once

#include <array>
#include <cstdint>
#include <type_traits>

#include <Eigen/Core>

namespace attrib {

/// One channel of an image, row-major so that (y, x) indexing matches scanline order.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar three-channel image. 8-bit instances hold pixel data as stored on disk;
/// floating-point instances hold intensities in [0, 1].
template <typename Scalar>
struct RgbImage {
  std::array<Plane<Scalar>, 3> channels;

  RgbImage() = default;
  RgbImage(int width, int height) {
    for (auto& c : channels) c.setZero(height, width);
  }

  int width() const { return static_cast<int>(channels[0].cols()); }
  int height() const { return static_cast<int>(channels[0].rows()); }
  bool empty() const { return channels[0].size() == 0; }

  Plane<Scalar>& operator[](int c) { return channels[c]; }
  const Plane<Scalar>& operator[](int c) const { return channels[c]; }

  void fill(Scalar r, Scalar g, Scalar b) {
    channels[0].setConstant(r);
    channels[1].setConstant(g);
    channels[2].setConstant(b);
  }

  RgbImage block(int x, int y, int w, int h) const {
    RgbImage out;
    for (int c = 0; c < 3; ++c) out.channels[c] = channels[c].block(y, x, h, w);
    return out;
  }

  friend bool operator==(const RgbImage& a, const RgbImage& b) {
    if (a.width() != b.width() || a.height() != b.height()) return false;
    for (int c = 0; c < 3; ++c)
      if (!(a.channels[c] == b.channels[c]).all()) return false;
    return true;
  }
};

using Image8 = RgbImage<std::uint8_t>;
using ImageF = RgbImage<float>;

template <typename Scalar>
ImageF to_float(const RgbImage<Scalar>& img) {
  ImageF out;
  for (int c = 0; c < 3; ++c) out.channels[c] = img.channels[c].template cast<float>() / 255.0f;
  return out;
}

/// Rounds to nearest and clamps into [0, 255].
inline Image8 to_u8(const ImageF& img) {
  Image8 out;
  for (int c = 0; c < 3; ++c)
    out.channels[c] = (img.channels[c] * 255.0f + 0.5f).floor().max(0.0f).min(255.0f).template cast<std::uint8_t>();
  return out;
}

/// Rec. 601 luma in [0, 1].
template <typename Scalar>
Plane<float> luma(const RgbImage<Scalar>& img) {
  constexpr float kScale = std::is_floating_point_v<Scalar> ? 1.0f : 1.0f / 255.0f;
  return (0.299f * kScale) * img[0].template cast<float>() + (0.587f * kScale) * img[1].template cast<float>() +
         (0.114f * kScale) * img[2].template cast<float>();
}

}  // namespace attrib
