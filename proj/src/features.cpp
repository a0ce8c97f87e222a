#include "attrib/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "attrib/error.hpp"
#include "simd_dispatch.hpp"

namespace attrib {

namespace {

namespace fl = feature_layout;

struct BoundaryTable {
  std::array<float, 8> cos_phi{}, sin_phi{};
  BoundaryTable() {
    for (int k = 0; k < 8; ++k) {
      const double phi = (11.25 + 22.5 * k) * std::numbers::pi / 180.0;
      cos_phi[k] = static_cast<float>(std::cos(phi));
      sin_phi[k] = static_cast<float>(std::sin(phi));
    }
  }
};

const BoundaryTable& boundaries() {
  static const BoundaryTable table;
  return table;
}

Plane<float> downsample2(const Plane<float>& p) {
  const Eigen::Index h = p.rows() / 2, w = p.cols() / 2;
  Plane<float> out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    const float* a = &p(2 * y, 0);
    const float* b = &p(2 * y + 1, 0);
    float* o = &out(y, 0);
    for (Eigen::Index x = 0; x < w; ++x) o[x] = 0.25f * ((a[2 * x] + a[2 * x + 1]) + (b[2 * x] + b[2 * x + 1]));
  }
  return out;
}

// Second-moment matrix of the gradient of the band-pass layer (image minus its
// 3x3 box blur), over the interior where both stencils are defined.
Eigen::Vector3d band_moments(const Plane<float>& p) {
  const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
  // Band is defined on rows/cols 1..n-2; central differences of it on 2..n-3.
  Plane<float> band = Plane<float>::Zero(h, w);
  std::vector<float> hsum(static_cast<std::size_t>(3 * w));
  const auto row_sum = [&](int y, float* out) {
    const float* r = &p(y, 0);
    for (int x = 1; x < w - 1; ++x) out[x] = r[x - 1] + r[x] + r[x + 1];
  };
  for (int y = 1; y < h - 1; ++y) {
    float* s0 = &hsum[static_cast<std::size_t>(((y - 1) % 3) * w)];
    float* s1 = &hsum[static_cast<std::size_t>((y % 3) * w)];
    float* s2 = &hsum[static_cast<std::size_t>(((y + 1) % 3) * w)];
    if (y == 1) {
      row_sum(0, s0);
      row_sum(1, s1);
    }
    row_sum(y + 1, s2);
    const float* r = &p(y, 0);
    float* out = &band(y, 0);
    for (int x = 1; x < w - 1; ++x) out[x] = r[x] - (s0[x] + s1[x] + s2[x]) / 9.0f;
  }
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int y = 2; y < h - 2; ++y) {
    const int n = w - 4;
    const auto row = [&](int yy, int x0) { return Eigen::Map<const Eigen::ArrayXf>(&band(yy, x0), n); };
    const Eigen::ArrayXf gx = 0.5f * (row(y, 3) - row(y, 1));
    const Eigen::ArrayXf gy = 0.5f * (row(y + 1, 2) - row(y - 1, 2));
    sxx += (gx * gx).sum();
    syy += (gy * gy).sum();
    sxy += (gx * gy).sum();
  }
  const double n = static_cast<double>(h - 4) * (w - 4);
  return {sxx / n, syy / n, sxy / n};
}

// Mean and standard deviation, across 8x8 blocks, of the per-block intensity std-dev.
Eigen::Vector2d block_spread(const Plane<float>& p) {
  constexpr int kBlock = 8;
  const int by = static_cast<int>(p.rows()) / kBlock, bx = static_cast<int>(p.cols()) / kBlock;
  std::vector<double> sum(static_cast<std::size_t>(bx)), sq(static_cast<std::size_t>(bx));
  Eigen::ArrayXd sd(by * bx);
  for (int j = 0; j < by; ++j) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    for (int r = 0; r < kBlock; ++r) {
      const float* row = &p(j * kBlock + r, 0);
      for (int i = 0; i < bx; ++i) {
        float s = 0.0f, q = 0.0f;
        for (int k = 0; k < kBlock; ++k) {
          const float v = row[i * kBlock + k];
          s += v;
          q += v * v;
        }
        sum[i] += s;
        sq[i] += q;
      }
    }
    constexpr double inv = 1.0 / (kBlock * kBlock);
    for (int i = 0; i < bx; ++i) {
      const double mean = sum[i] * inv;
      sd(j * bx + i) = std::sqrt(std::max(0.0, sq[i] * inv - mean * mean));
    }
  }
  const double m = sd.mean();
  return {m, std::sqrt(std::max(0.0, (sd - m).square().mean()))};
}

}  // namespace

int orientation_bin(float gx, float gy) {
  if (gy < 0.0f || (gy == 0.0f && gx < 0.0f)) {
    gx = -gx;
    gy = -gy;
  }
  const auto& b = boundaries();
  int bin = 0;
  for (int k = 0; k < 8; ++k)
    if (gy * b.cos_phi[k] - gx * b.sin_phi[k] > 0.0f) ++bin;
  return bin % 8;
}

ATTRIB_SIMD_CLONES FeatureVector extract_features(const Image8& tile) {
  if (tile.width() != kTileSize || tile.height() != kTileSize)
    throw Error(ErrorCode::BadTileShape, "expected 512x512 tile, got " + std::to_string(tile.width()) + "x" +
                                             std::to_string(tile.height()));
  FeatureVector f = FeatureVector::Zero();
  const Eigen::Index n = tile[0].size();
  const double inv_n = 1.0 / static_cast<double>(n);

  for (int c = 0; c < 3; ++c) {
    // Four interleaved counters avoid serialising on repeated bins.
    std::array<std::array<long, fl::kHistogramBins>, 4> counts{};
    const std::uint8_t* px = tile[c].data();
    for (Eigen::Index i = 0; i < n; i += 4)
      for (int k = 0; k < 4; ++k) ++counts[k][px[i + k] >> 4];
    for (int b = 0; b < fl::kHistogramBins; ++b)
      f[fl::kHistogram + c * fl::kHistogramBins + b] =
          static_cast<double>(counts[0][b] + counts[1][b] + counts[2][b] + counts[3][b]) * inv_n;
  }

  const Plane<float> l = luma(tile);
  const int h = kTileSize, w = kTileSize;

  {
    // Fold into the first quadrant: four threshold tests give the bin there,
    // and gradients in the second/fourth quadrant mirror it (k -> 8 - k).
    const auto& b = boundaries();
    std::array<double, fl::kOrientationBins> energy{};
    std::array<float, kTileSize> mag{};
    std::array<int, kTileSize> bin{};
    for (int y = 1; y < h - 1; ++y) {
      const float* up = &l(y - 1, 0);
      const float* row = &l(y, 0);
      const float* down = &l(y + 1, 0);
      for (int x = 1; x < w - 1; ++x) {
        const float gx = 0.5f * (row[x + 1] - row[x - 1]);
        const float gy = 0.5f * (down[x] - up[x]);
        mag[x] = std::sqrt(gx * gx + gy * gy);
        const float ax = std::abs(gx), ay = std::abs(gy);
        int k = 0;
        for (int t = 0; t < 4; ++t) k += ay * b.cos_phi[t] - ax * b.sin_phi[t] > 0.0f;
        const int mirrored = (8 - k) & 7;
        bin[x] = gx * gy < 0.0f ? mirrored : k;
      }
      // Four interleaved accumulators so runs of one bin do not serialise.
      std::array<std::array<float, fl::kOrientationBins>, 4> acc{};
      for (int x = 1; x < w - 1; ++x) acc[x & 3][bin[x]] += mag[x];
      for (int k = 0; k < fl::kOrientationBins; ++k) energy[k] += (acc[0][k] + acc[1][k]) + (acc[2][k] + acc[3][k]);
    }
    const double inv = 1.0 / static_cast<double>((h - 2) * (w - 2));
    for (int k = 0; k < fl::kOrientationBins; ++k) f[fl::kOrientation + k] = energy[k] * inv;
  }

  Plane<float> coarse;
  for (int s = 0; s < fl::kScales; ++s) {
    if (s > 0) coarse = downsample2(s == 1 ? l : coarse);
    const Plane<float>& level = s == 0 ? l : coarse;
    const Eigen::Vector3d m = band_moments(level);
    for (int o = 0; o < fl::kBandOrientations; ++o) {
      const double theta = o * std::numbers::pi / 4.0;
      const double c = std::cos(theta), si = std::sin(theta);
      const double e = c * c * m[0] + si * si * m[1] + 2.0 * si * c * m[2];
      f[fl::kBandPass + s * fl::kBandOrientations + o] = std::sqrt(std::max(0.0, e));
    }
    const Eigen::Vector2d v = block_spread(level);
    f[fl::kVariance + 2 * s] = v[0];
    f[fl::kVariance + 2 * s + 1] = v[1];
  }

  {
    // Colour class: bright/dark by luma, warm/cool by red vs blue.
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cls(h, w);
    {
      const float* lp = l.data();
      const std::uint8_t* r = tile[0].data();
      const std::uint8_t* bl = tile[2].data();
      std::uint8_t* out = cls.data();
      for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(2 * (lp[i] >= 0.5f) + (r[i] >= bl[i]));
    }
    std::array<long, 4> total_h{}, same_h{}, total_v{}, same_v{};
    for (int y = 0; y < h; ++y) {
      const std::uint8_t* row = &cls(y, 0);
      const std::uint8_t* below = y + 1 < h ? &cls(y + 1, 0) : nullptr;
      for (std::uint8_t k = 0; k < 4; ++k) {
        int th = 0, sh = 0, tv = 0, sv = 0;
        for (int x = 0; x + 1 < w; ++x) {
          th += row[x] == k;
          sh += (row[x] == k) & (row[x + 1] == k);
        }
        if (below) {
          for (int x = 0; x < w; ++x) {
            tv += row[x] == k;
            sv += (row[x] == k) & (below[x] == k);
          }
        }
        total_h[k] += th;
        same_h[k] += sh;
        total_v[k] += tv;
        same_v[k] += sv;
      }
    }
    for (int k = 0; k < 4; ++k) {
      f[fl::kCooccurrence + k] = total_h[k] > 0 ? static_cast<double>(same_h[k]) / total_h[k] : 0.0;
      f[fl::kCooccurrence + 4 + k] = total_v[k] > 0 ? static_cast<double>(same_v[k]) / total_v[k] : 0.0;
    }
  }
  return f;
}

FeatureVector extract_features(const TileSample& tile) { return extract_features(tile.pixels); }

}  // namespace attrib
