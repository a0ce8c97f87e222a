#include <doctest.h>

#include <cmath>
#include <numbers>

#include "attrib/augment.hpp"
#include "attrib/error.hpp"
#include "attrib/features.hpp"
#include "support.hpp"

using namespace attrib;
namespace fl = attrib::feature_layout;

namespace {

Image8 random_tile(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image8 img(kTileSize, kTileSize);
  for (int c = 0; c < 3; ++c)
    for (Eigen::Index i = 0; i < img[c].size(); ++i) img[c].data()[i] = static_cast<std::uint8_t>(u(rng));
  return img;
}

Image8 stripes(int period) {
  Image8 img(kTileSize, kTileSize);
  for (int x = 0; x < kTileSize; ++x) {
    const std::uint8_t v = (x / (period / 2)) % 2 ? 255 : 0;
    for (int c = 0; c < 3; ++c) img[c].col(x).setConstant(v);
  }
  return img;
}

// Orientation energy by direct angle computation: atan2 folded to [0, 180),
// bins of 22.5 degrees centred on multiples of 22.5 starting at 0.
std::array<double, 8> orientation_oracle(const Image8& tile) {
  const int n = kTileSize;
  std::vector<double> l(n * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      l[y * n + x] = (0.299 * tile[0](y, x) + 0.587 * tile[1](y, x) + 0.114 * tile[2](y, x)) / 255.0;
  std::array<double, 8> e{};
  for (int y = 1; y < n - 1; ++y)
    for (int x = 1; x < n - 1; ++x) {
      const double gx = 0.5 * (l[y * n + x + 1] - l[y * n + x - 1]);
      const double gy = 0.5 * (l[(y + 1) * n + x] - l[(y - 1) * n + x]);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (deg < 0) deg += 180.0;
      const int bin = static_cast<int>(std::floor((deg + 11.25) / 22.5)) % 8;
      e[bin] += mag;
    }
  for (auto& v : e) v /= static_cast<double>((n - 2) * (n - 2));
  return e;
}

TileSample sample_of(Image8 px, Label label = Label::Positive) {
  return TileSample{TileRect{"T", 0, 0, 0, 0}, label, std::move(px)};
}

Image8 quadrants() {
  Image8 img(kTileSize, kTileSize);
  const std::array<std::array<std::uint8_t, 3>, 4> colors{{{220, 30, 30}, {30, 200, 40}, {40, 40, 210}, {230, 220, 40}}};
  for (int y = 0; y < kTileSize; ++y)
    for (int x = 0; x < kTileSize; ++x) {
      const int q = (y >= kTileSize / 2) * 2 + (x >= kTileSize / 2);
      for (int c = 0; c < 3; ++c) img[c](y, x) = colors[q][c];
    }
  return img;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("shape contract") {
    const FeatureVector f = extract_features(random_tile(1));
    CHECK(f.size() == 88);
    CHECK(f.allFinite());
    CHECK_THROWS_AS(extract_features(Image8(500, 512)), Error);
  }

  TEST_CASE("constant mid-grey tile") {
    Image8 img(kTileSize, kTileSize);
    img.fill(128, 128, 128);
    const FeatureVector f = extract_features(img);
    for (int c = 0; c < 3; ++c) {
      CHECK(f[fl::kHistogram + c * 16 + 8] == 1.0);
      CHECK(f.segment(fl::kHistogram + c * 16, 16).sum() == doctest::Approx(1.0));
    }
    CHECK(f.segment(fl::kOrientation, 8).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.segment(fl::kBandPass, 16).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.segment(fl::kVariance, 8).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("period-16 vertical stripes: horizontal-gradient bin dominates") {
    const Image8 img = stripes(16);
    const FeatureVector f = extract_features(img);
    const auto oracle = orientation_oracle(img);
    for (int k = 0; k < 8; ++k) CHECK(f[fl::kOrientation + k] == doctest::Approx(oracle[k]).epsilon(1e-5));
    for (int k = 1; k < 8; ++k) CHECK(f[fl::kOrientation] > f[fl::kOrientation + k]);
    CHECK(oracle[0] > 0.0);
    // Band energy along x (0 deg) exceeds the y direction. At the coarsest scale
    // the stripes have period 2, which a central difference cannot see.
    for (int s = 0; s < 3; ++s) CHECK(f[fl::kBandPass + 4 * s] > f[fl::kBandPass + 4 * s + 2]);
  }

  TEST_CASE("histograms and orientation agree with brute force on random tiles") {
    for (std::uint64_t seed : {3u, 4u}) {
      const Image8 img = random_tile(seed);
      const FeatureVector f = extract_features(img);
      for (int c = 0; c < 3; ++c) {
        std::array<double, 16> h{};
        for (Eigen::Index i = 0; i < img[c].size(); ++i) h[img[c].data()[i] / 16] += 1.0;
        for (int b = 0; b < 16; ++b) CHECK(f[c * 16 + b] == doctest::Approx(h[b] / (512.0 * 512.0)).epsilon(1e-12));
      }
      const auto oracle = orientation_oracle(img);
      for (int k = 0; k < 8; ++k) CHECK(f[fl::kOrientation + k] == doctest::Approx(oracle[k]).epsilon(1e-4));
    }
  }

  TEST_CASE("orientation_bin folds modulo 180 degrees") {
    for (int deg = 0; deg < 360; deg += 5) {
      const double r = deg * std::numbers::pi / 180.0;
      const float gx = static_cast<float>(std::cos(r)), gy = static_cast<float>(std::sin(r));
      const int expected = static_cast<int>(std::floor(std::fmod(deg + 11.25, 180.0) / 22.5)) % 8;
      CHECK(orientation_bin(gx, gy) == expected);
      CHECK(orientation_bin(-gx, -gy) == expected);
    }
  }

  TEST_CASE("co-occurrence of a two-colour checkerboard") {
    Image8 img(kTileSize, kTileSize);
    for (int y = 0; y < kTileSize; ++y)
      for (int x = 0; x < kTileSize; ++x) {
        const bool bright = ((x / 4) + (y / 4)) % 2;
        img[0](y, x) = bright ? 250 : 10;
        img[1](y, x) = bright ? 250 : 10;
        img[2](y, x) = bright ? 200 : 60;
      }
    const FeatureVector f = extract_features(img);
    // Runs of 4 along each axis: 3 of every 4 neighbour pairs share the class.
    CHECK(f[fl::kCooccurrence + 3] == doctest::Approx(0.75).epsilon(0.01));
    CHECK(f[fl::kCooccurrence + 0] == doctest::Approx(0.75).epsilon(0.01));
    CHECK(f[fl::kCooccurrence + 7] == doctest::Approx(0.75).epsilon(0.01));
    CHECK(f[fl::kCooccurrence + 1] == 0.0);
  }
}

TEST_SUITE("augment") {
  TEST_CASE("identity parameters leave the tile untouched") {
    const TileSample t = sample_of(random_tile(7));
    std::mt19937_64 rng(1);
    const auto params = AugmentParams::identity();
    for (int i = 0; i < 3; ++i) CHECK(augment(t, params, rng).pixels == t.pixels);
  }

  TEST_CASE("forced flip is an involution") {
    const TileSample t = sample_of(random_tile(8));
    AugmentDraw d;
    d.flip = true;
    const TileSample once = apply_augmentation(t, d);
    CHECK_FALSE(once.pixels == t.pixels);
    for (int c = 0; c < 3; ++c) CHECK((once.pixels[c].col(0) == t.pixels[c].col(511)).all());
    CHECK(apply_augmentation(once, d).pixels == t.pixels);
  }

  TEST_CASE("90 degree rotation permutes the quadrants") {
    const TileSample t = sample_of(quadrants());
    AugmentDraw d;
    d.rotation_deg = 90.0;
    const Image8 out = apply_augmentation(t, d).pixels;
    int worst = 0;
    for (int y = 2; y < kTileSize - 2; ++y)
      for (int x = 2; x < kTileSize - 2; ++x) {
        if (std::abs(x - 255.5) < 3 || std::abs(y - 255.5) < 3) continue;  // quadrant seams
        for (int c = 0; c < 3; ++c)
          worst = std::max(worst, std::abs(int(out[c](y, x)) - int(t.pixels[c](x, kTileSize - 1 - y))));
      }
    CHECK(worst <= 1);
  }

  TEST_CASE("random draws keep size, label and rect") {
    const TileSample t = sample_of(attrib::testing::oriented_strokes(512, 512, 4), Label::Negative);
    std::mt19937_64 rng(99);
    AugmentParams params;
    for (int i = 0; i < 20; ++i) {
      const TileSample a = augment(t, params, rng);
      CHECK(a.pixels.width() == kTileSize);
      CHECK(a.pixels.height() == kTileSize);
      CHECK(a.label == Label::Negative);
      CHECK(a.rect == t.rect);
    }
  }

  TEST_CASE("same rng state, same output") {
    const TileSample t = sample_of(random_tile(9));
    std::mt19937_64 a(5), b(5);
    CHECK(augment(t, {}, a).pixels == augment(t, {}, b).pixels);
  }

  TEST_CASE("photometric draw matches the affine formula") {
    Image8 img(kTileSize, kTileSize);
    img.fill(100, 150, 200);
    AugmentDraw d;
    d.color = Eigen::Array3d(1.1, 0.9, 1.0);
    const Image8 out = apply_augmentation(sample_of(img), d).pixels;
    CHECK(out[0](10, 10) == 110);
    CHECK(out[1](10, 10) == 135);
    CHECK(out[2](300, 300) == 200);

    AugmentDraw contrast;
    contrast.contrast = 2.0;
    const Image8 flat = apply_augmentation(sample_of(img), contrast).pixels;
    // Uniform image: contrast about its own mean luma changes each channel by (v - mean).
    const double mean = 0.299 * 100 + 0.587 * 150 + 0.114 * 200;
    CHECK(std::abs(flat[0](0, 0) - std::clamp(2 * 100 - mean, 0.0, 255.0)) <= 1.0);
  }

  TEST_CASE("small augmentations keep features close") {
    const TileSample t = sample_of(attrib::testing::oriented_strokes(512, 512, 12));
    const FeatureVector base = extract_features(t.pixels);
    AugmentParams mild;
    mild.crop_min = 0.95;
    mild.rotation_min_deg = -3.0;
    mild.rotation_max_deg = 3.0;
    mild.flip_probability = 0.0;
    mild.noise_sigma_max = 0.005;
    mild.contrast_min = 0.97;
    mild.contrast_max = 1.03;
    mild.color_min = 0.98;
    mild.color_max = 1.02;
    mild.perspective_jitter = 0.005;
    mild.elastic_sigma_px = 1.0;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
      const FeatureVector f = extract_features(augment(t, mild, rng).pixels);
      CHECK((f - base).norm() / base.norm() < 0.25);
      // The dominant orientation survives.
      Eigen::Index a = 0, b = 0;
      base.segment(fl::kOrientation, 8).maxCoeff(&a);
      f.segment(fl::kOrientation, 8).maxCoeff(&b);
      CHECK(std::min((a - b + 8) % 8, (b - a + 8) % 8) <= 1);
    }
  }

  TEST_CASE("invalid parameters") {
    AugmentParams p;
    p.crop_min = 1.2;
    CHECK_THROWS_AS(p.validate(), Error);
    AugmentParams q;
    q.rotation_min_deg = 10;
    q.rotation_max_deg = -10;
    CHECK_THROWS_AS(q.validate(), Error);
    CHECK_THROWS_AS(apply_augmentation(sample_of(Image8(100, 100)), AugmentDraw{}), Error);
  }
}
