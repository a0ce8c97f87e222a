#include "attrib/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "attrib/error.hpp"
#include "simd_dispatch.hpp"

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

namespace attrib {

namespace {

constexpr int kCell = 8;                      // lattice spacing of the backward map
constexpr int kNodes = kTileSize / kCell + 1;  // nodes per side, last one at x = 512

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Standard normal samples indexed by 13-bit keys; small enough to stay in
// cache, so one splitmix64 draw yields several cheap samples.
constexpr int kNormalBits = 13;
constexpr std::uint64_t kNormalMask = (1u << kNormalBits) - 1;

const std::array<float, 1 << kNormalBits>& normal_table() {
  static const auto table = [] {
    std::array<float, 1 << kNormalBits> t{};
    std::mt19937_64 gen(0x5eed);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (auto& v : t) v = dist(gen);
    return t;
  }();
  return table;
}

// Fills `out` with `n` table-normal samples from a splitmix64 stream.
void normal_samples(std::uint64_t& state, float scale, float* out, int n) {
  const auto& table = normal_table();
  for (int i = 0; i < n;) {
    std::uint64_t bits = splitmix64(state);
    for (int k = 0; k < 64 / kNormalBits && i < n; ++k, ++i) {
      out[i] = scale * table[bits & kNormalMask];
      bits >>= kNormalBits;
    }
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Single mirror reflection about the border (edge pixel repeated), clamped for
// anything further out. Written with selects so pixel loops stay vectorisable.
inline int reflect(int i, int n) {
  i = i < 0 ? -i - 1 : i;
  i = i >= n ? 2 * n - i - 1 : i;
  return std::min(std::max(i, 0), n - 1);
}

// Backward homography taking the output square onto the jittered corners.
Eigen::Matrix3d corner_homography(const Eigen::Matrix<double, 4, 2>& offsets) {
  if (offsets.isZero(0.0)) return Eigen::Matrix3d::Identity();
  constexpr double s = kTileSize - 1;
  const Eigen::Matrix<double, 4, 2> dst = (Eigen::Matrix<double, 4, 2>() << 0, 0, s, 0, s, s, 0, s).finished();
  const Eigen::Matrix<double, 4, 2> src = dst + offsets;
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = dst(i, 0), y = dst(i, 1), u = src(i, 0), v = src(i, 1);
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b[2 * i] = u;
    b[2 * i + 1] = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.partialPivLu().solve(b);
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
  return m;
}

// Smoothed Gaussian displacement field sampled on the map lattice, scaled so the
// per-axis standard deviation equals `sigma_px`.
std::array<Eigen::ArrayXXd, 2> elastic_field(double sigma_px, double smoothing_px, std::uint64_t seed) {
  std::array<Eigen::ArrayXXd, 2> field{Eigen::ArrayXXd::Zero(kNodes, kNodes), Eigen::ArrayXXd::Zero(kNodes, kNodes)};
  if (sigma_px <= 0.0) return field;
  std::uint64_t state = seed;
  const double s = std::max(smoothing_px / kCell, 1e-6);
  const int radius = static_cast<int>(std::ceil(3.0 * s));
  Eigen::ArrayXd kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (s * s));
  kernel /= kernel.sum();
  const auto mirror = [](int i) {
    while (i < 0 || i >= kNodes) i = i < 0 ? -i : 2 * (kNodes - 1) - i;
    return i;
  };
  const int padded = kNodes + 2 * radius;
  std::array<float, kNodes * kNodes> raw{};
  Eigen::ArrayXXd wide(kNodes, padded), tall(padded, kNodes);
  for (auto& f : field) {
    normal_samples(state, 1.0f, raw.data(), kNodes * kNodes);
    for (int i = 0; i < kNodes * kNodes; ++i) f(i / kNodes, i % kNodes) = raw[static_cast<std::size_t>(i)];
    for (int x = 0; x < padded; ++x) wide.col(x) = f.col(mirror(x - radius));
    f = kernel[0] * wide.leftCols(kNodes);
    for (int k = 1; k <= 2 * radius; ++k) f += kernel[k] * wide.middleCols(k, kNodes);
    for (int y = 0; y < padded; ++y) tall.row(y) = f.row(mirror(y - radius));
    f = kernel[0] * tall.topRows(kNodes);
    for (int k = 1; k <= 2 * radius; ++k) f += kernel[k] * tall.middleRows(k, kNodes);
  }
  const double rms = std::sqrt((field[0].square().sum() + field[1].square().sum()) / (2.0 * field[0].size()));
  if (rms > 0.0)
    for (auto& f : field) f *= sigma_px / rms;
  return field;
}

}  // namespace

AugmentParams AugmentParams::identity() {
  AugmentParams p;
  p.crop_min = p.crop_max = 1.0;
  p.rotation_min_deg = p.rotation_max_deg = 0.0;
  p.flip_probability = 0.0;
  p.noise_sigma_min = p.noise_sigma_max = 0.0;
  p.contrast_min = p.contrast_max = 1.0;
  p.color_min = p.color_max = 1.0;
  p.perspective_jitter = 0.0;
  p.elastic_sigma_px = 0.0;
  return p;
}

void AugmentParams::validate() const {
  const auto range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " range is inverted or not finite");
  };
  range(crop_min, crop_max, "crop");
  range(rotation_min_deg, rotation_max_deg, "rotation");
  range(noise_sigma_min, noise_sigma_max, "noise");
  range(contrast_min, contrast_max, "contrast");
  range(color_min, color_max, "color");
  if (!(crop_min > 0.0 && crop_max <= 1.0)) throw Error(ErrorCode::InvalidArgument, "crop fraction must be in (0, 1]");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "flip probability must be in [0, 1]");
  if (noise_sigma_min < 0.0 || contrast_min < 0.0 || color_min < 0.0)
    throw Error(ErrorCode::InvalidArgument, "noise, contrast and color lower bounds must be non-negative");
  if (!(perspective_jitter >= 0.0 && perspective_jitter < 0.5))
    throw Error(ErrorCode::InvalidArgument, "perspective jitter must be in [0, 0.5)");
  if (!(elastic_sigma_px >= 0.0) || !(elastic_smoothing_px > 0.0))
    throw Error(ErrorCode::InvalidArgument, "elastic sigma must be >= 0 and smoothing > 0");
}

bool AugmentDraw::geometric_identity() const {
  return crop == 1.0 && crop_x == 0.0 && crop_y == 0.0 && rotation_deg == 0.0 && !flip &&
         corner_offsets.isZero(0.0) && elastic_sigma_px == 0.0;
}

bool AugmentDraw::photometric_identity() const {
  return noise_sigma == 0.0 && contrast == 1.0 && (color == 1.0).all();
}

AugmentDraw draw_augmentation(const AugmentParams& params, std::mt19937_64& rng) {
  AugmentDraw d;
  d.crop = uniform(rng, params.crop_min, params.crop_max);
  const double slack = kTileSize * (1.0 - d.crop);
  d.crop_x = uniform(rng, 0.0, slack);
  d.crop_y = uniform(rng, 0.0, slack);
  d.rotation_deg = uniform(rng, params.rotation_min_deg, params.rotation_max_deg);
  d.flip = params.flip_probability >= 1.0 ||
           (params.flip_probability > 0.0 && std::bernoulli_distribution(params.flip_probability)(rng));
  const double jitter = params.perspective_jitter * kTileSize;
  for (int i = 0; i < 8; ++i) d.corner_offsets(i / 2, i % 2) = uniform(rng, -jitter, jitter);
  d.noise_sigma = uniform(rng, params.noise_sigma_min, params.noise_sigma_max);
  d.contrast = uniform(rng, params.contrast_min, params.contrast_max);
  for (int c = 0; c < 3; ++c) d.color[c] = uniform(rng, params.color_min, params.color_max);
  d.elastic_sigma_px = params.elastic_sigma_px;
  d.elastic_smoothing_px = params.elastic_smoothing_px;
  d.noise_seed = rng();
  d.elastic_seed = rng();
  return d;
}

ATTRIB_SIMD_CLONES TileSample apply_augmentation(const TileSample& tile, const AugmentDraw& draw) {
  const Image8& src = tile.pixels;
  if (src.width() != kTileSize || src.height() != kTileSize)
    throw Error(ErrorCode::BadTileShape, "augmentation expects a 512x512 tile");
  TileSample out{tile.rect, tile.label, {}};
  if (draw.geometric_identity() && draw.photometric_identity()) {
    out.pixels = src;
    return out;
  }

  // Backward map output -> source on the lattice: elastic, perspective, flip, rotation, crop.
  Eigen::ArrayXXf map_x(kNodes, kNodes), map_y(kNodes, kNodes);
  const bool warp = !draw.geometric_identity();
  if (warp) {
    const auto disp = elastic_field(draw.elastic_sigma_px, draw.elastic_smoothing_px, draw.elastic_seed);
    const Eigen::Matrix3d h = corner_homography(draw.corner_offsets);
    const double theta = draw.rotation_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    constexpr double c = 0.5 * (kTileSize - 1);
    for (int j = 0; j < kNodes; ++j)
      for (int i = 0; i < kNodes; ++i) {
        const Eigen::Vector3d p(i * kCell + disp[0](j, i), j * kCell + disp[1](j, i), 1.0);
        const Eigen::Vector3d q = h * p;
        double x = q[0] / q[2], y = q[1] / q[2];
        if (draw.flip) x = (kTileSize - 1) - x;
        const double rx = c + ct * (x - c) - st * (y - c);
        const double ry = c + st * (x - c) + ct * (y - c);
        map_x(j, i) = static_cast<float>(draw.crop_x + (rx + 0.5) * draw.crop - 0.5);
        map_y(j, i) = static_cast<float>(draw.crop_y + (ry + 0.5) * draw.crop - 0.5);
      }
  }

  // Contrast about the source mean luma, then per-channel gain, fused into one affine map.
  float mean = 0.0f;
  if (draw.contrast != 1.0) mean = 255.0f * luma(src).mean();
  const float contrast = static_cast<float>(draw.contrast);
  std::array<float, 3> scale{}, shift{};
  for (int ch = 0; ch < 3; ++ch) {
    const float gain = static_cast<float>(draw.color[ch]);
    scale[ch] = gain * contrast;
    shift[ch] = gain * mean * (1.0f - contrast) + 0.5f;  // +0.5: round half up on truncation
  }
  const float noise = static_cast<float>(draw.noise_sigma * 255.0);
  std::uint64_t noise_state = draw.noise_seed;

  // RGBX words: one load fetches every channel of a bilinear tap.
  constexpr int kPixels = kTileSize * kTileSize;
  const auto packed = std::make_unique_for_overwrite<std::uint32_t[]>(kPixels);
  for (int i = 0; i < kPixels; ++i)
    packed[i] = src[0].data()[i] | (static_cast<std::uint32_t>(src[1].data()[i]) << 8) |
                (static_cast<std::uint32_t>(src[2].data()[i]) << 16);

  for (auto& c : out.pixels.channels) c.resize(kTileSize, kTileSize);  // every pixel is written below
  std::array<float, kNodes> row_x{}, row_y{};
  std::array<float, kTileSize> sx{}, sy{}, wx{}, wy{};
  std::array<int, kTileSize> off00{}, step_x{}, step_y{};
  std::array<float, 3 * kTileSize> row_noise{};
  for (int x = 0; x < kTileSize; ++x) off00[x] = x;
  for (int y = 0; y < kTileSize; ++y) {
    if (warp) {
      const int j = y / kCell;
      const float ty = static_cast<float>(y % kCell) / kCell;
      for (int i = 0; i < kNodes; ++i) {
        row_x[i] = map_x(j, i) + ty * (map_x(j + 1, i) - map_x(j, i));
        row_y[i] = map_y(j, i) + ty * (map_y(j + 1, i) - map_y(j, i));
      }
      for (int i = 0; i < kNodes - 1; ++i)
        for (int t = 0; t < kCell; ++t) {
          const float tx = static_cast<float>(t) / kCell;
          sx[i * kCell + t] = row_x[i] + tx * (row_x[i + 1] - row_x[i]);
          sy[i * kCell + t] = row_y[i] + tx * (row_y[i + 1] - row_y[i]);
        }
      for (int x = 0; x < kTileSize; ++x) {
        int x0 = static_cast<int>(sx[x]), y0 = static_cast<int>(sy[x]);
        x0 -= sx[x] < static_cast<float>(x0);
        y0 -= sy[x] < static_cast<float>(y0);
        wx[x] = sx[x] - static_cast<float>(x0);
        wy[x] = sy[x] - static_cast<float>(y0);
        const int rx0 = reflect(x0, kTileSize), rx1 = reflect(x0 + 1, kTileSize);
        const int ry0 = reflect(y0, kTileSize), ry1 = reflect(y0 + 1, kTileSize);
        off00[x] = ry0 * kTileSize + rx0;
        step_x[x] = rx1 - rx0;
        step_y[x] = (ry1 - ry0) * kTileSize;
      }
    } else {
      for (int x = 0; x < kTileSize; ++x) off00[x] = y * kTileSize + x;
    }
    if (noise > 0.0f) {
      // Each row reads a contiguous slice of the table at a random start.
      const auto& table = normal_table();
      const std::size_t start = splitmix64(noise_state) % (table.size() - row_noise.size() + 1);
      for (std::size_t k = 0; k < row_noise.size(); ++k) row_noise[k] = noise * table[start + k];
    }

    const std::size_t row = static_cast<std::size_t>(y) * kTileSize;
    std::uint8_t* dst[3] = {out.pixels[0].data() + row, out.pixels[1].data() + row, out.pixels[2].data() + row};
#if defined(__SSE2__)
    const __m128i zero = _mm_setzero_si128();
    const auto load = [&](int o) {
      return _mm_cvtepi32_ps(_mm_unpacklo_epi16(
          _mm_unpacklo_epi8(_mm_cvtsi32_si128(static_cast<int>(packed[static_cast<std::size_t>(o)])), zero), zero));
    };
    const __m128 vscale = _mm_setr_ps(scale[0], scale[1], scale[2], 0.0f);
    const __m128 vshift = _mm_setr_ps(shift[0], shift[1], shift[2], 0.0f);
    const __m128 lo = _mm_setzero_ps(), hi = _mm_set1_ps(255.0f);
    for (int x = 0; x < kTileSize; ++x) {
      __m128 v = load(off00[x]);
      if (warp) {
        const __m128 b = load(off00[x] + step_x[x]);
        const __m128 c = load(off00[x] + step_y[x]);
        const __m128 d = load(off00[x] + step_y[x] + step_x[x]);
        const __m128 ax = _mm_set1_ps(wx[x]), ay = _mm_set1_ps(wy[x]);
        const __m128 top = _mm_add_ps(v, _mm_mul_ps(ax, _mm_sub_ps(b, v)));
        const __m128 bot = _mm_add_ps(c, _mm_mul_ps(ax, _mm_sub_ps(d, c)));
        v = _mm_add_ps(top, _mm_mul_ps(ay, _mm_sub_ps(bot, top)));
      }
      v = _mm_add_ps(_mm_mul_ps(v, vscale), vshift);
      if (noise > 0.0f) v = _mm_add_ps(v, _mm_setr_ps(row_noise[x], row_noise[kTileSize + x], row_noise[2 * kTileSize + x], 0.0f));
      const __m128i q = _mm_cvttps_epi32(_mm_min_ps(_mm_max_ps(v, lo), hi));
      const std::uint32_t rgb = static_cast<std::uint32_t>(_mm_cvtsi128_si32(_mm_packus_epi16(_mm_packs_epi32(q, zero), zero)));
      dst[0][x] = static_cast<std::uint8_t>(rgb);
      dst[1][x] = static_cast<std::uint8_t>(rgb >> 8);
      dst[2][x] = static_cast<std::uint8_t>(rgb >> 16);
    }
#else
    for (int x = 0; x < kTileSize; ++x) {
      const auto tap = [&](int o, int ch) { return static_cast<float>((packed[static_cast<std::size_t>(o)] >> (8 * ch)) & 0xFF); };
      for (int ch = 0; ch < 3; ++ch) {
        float v = tap(off00[x], ch);
        if (warp) {
          const float b = tap(off00[x] + step_x[x], ch), c = tap(off00[x] + step_y[x], ch);
          const float d = tap(off00[x] + step_y[x] + step_x[x], ch);
          const float top = v + wx[x] * (b - v);
          const float bot = c + wx[x] * (d - c);
          v = top + wy[x] * (bot - top);
        }
        v = v * scale[ch] + shift[ch];
        if (noise > 0.0f) v += row_noise[static_cast<std::size_t>(ch * kTileSize + x)];
        dst[ch][x] = static_cast<std::uint8_t>(static_cast<int>(std::min(std::max(v, 0.0f), 255.0f)));
      }
    }
#endif
  }
  return out;
}

TileSample augment(const TileSample& tile, const AugmentParams& params, std::mt19937_64& rng) {
  return apply_augmentation(tile, draw_augmentation(params, rng));
}

}  // namespace attrib
