#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "attrib/corpus.hpp"
#include "attrib/image.hpp"

namespace attrib::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("attrib-" + tag + "-" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary).put('\0');
}

inline std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

namespace detail {

inline void stamp(Image8& img, double cx, double cy, double radius, const std::array<double, 3>& rgb, double opacity) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + radius)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d > radius) continue;
      for (int c = 0; c < 3; ++c) img[c](y, x) = clamp_u8((1 - opacity) * img[c](y, x) + opacity * rgb[c]);
    }
}

inline Image8 ground(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tone(90.0, 150.0);
  std::normal_distribution<double> grain(0.0, 6.0);
  const double r = tone(rng), g = tone(rng), b = tone(rng);
  Image8 img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img[0](y, x) = clamp_u8(r + grain(rng));
      img[1](y, x) = clamp_u8(g + grain(rng));
      img[2](y, x) = clamp_u8(b + grain(rng));
    }
  return img;
}

inline std::array<double, 3> paint(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(30.0, 225.0);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace detail

/// Painterly texture made of long parallel brush strokes; the dominant stroke
/// angle is drawn per image from [30, 60] degrees.
inline Image8 oriented_strokes(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image8 img = detail::ground(w, h, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base = (30.0 + 30.0 * u(rng)) * std::numbers::pi / 180.0;
  const int strokes = w * h / 160;
  for (int s = 0; s < strokes; ++s) {
    const double angle = base + (u(rng) - 0.5) * 0.2;
    const double len = 30.0 + 40.0 * u(rng);
    const double cx = u(rng) * w, cy = u(rng) * h;
    const auto rgb = detail::paint(rng);
    const double radius = 1.0 + 1.5 * u(rng);
    for (double t = -len / 2; t <= len / 2; t += 1.0)
      detail::stamp(img, cx + t * std::cos(angle), cy + t * std::sin(angle), radius, rgb, 0.7);
  }
  return img;
}

/// Texture with the same palette and dab sizes as `oriented_strokes` but no
/// preferred direction: round dabs scattered uniformly.
inline Image8 isotropic_noise(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image8 img = detail::ground(w, h, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int dabs = w * h / 40;
  for (int s = 0; s < dabs; ++s) {
    const auto rgb = detail::paint(rng);
    detail::stamp(img, u(rng) * w, u(rng) * h, 1.5 + 3.0 * u(rng), rgb, 0.7);
  }
  return img;
}

inline Image8 texture(Label label, int w, int h, std::uint64_t seed) {
  return label == Label::Positive ? oriented_strokes(w, h, seed) : isotropic_noise(w, h, seed);
}

/// Corpus rows matching the class totals of the reference dataset: 56 negative
/// works with 6015 tiles and 85 positive works with 6370 tiles. Each work's
/// dimensions are chosen so that its edge-anchored tile count is exact.
struct CorpusRow {
  std::string id;
  Label label;
  int width_px;
  int height_px;
  long tiles;
};

inline std::vector<long> tile_budget(int works, long total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.4, 1.6);
  std::vector<double> raw(works);
  for (auto& r : raw) r = u(rng);
  double sum = 0.0;
  for (double r : raw) sum += r;
  std::vector<long> out(works);
  long assigned = 0;
  for (int i = 0; i < works; ++i) {
    out[i] = std::max(1L, static_cast<long>(std::floor(raw[i] / sum * static_cast<double>(total))));
    assigned += out[i];
  }
  for (int i = 0; assigned < total; i = (i + 1) % works, ++assigned) ++out[i];
  return out;
}

inline std::pair<int, int> dims_for(long tiles, std::mt19937_64& rng) {
  long cols = static_cast<long>(std::sqrt(static_cast<double>(tiles)));
  while (tiles % cols != 0) --cols;
  const long rows = tiles / cols;
  std::uniform_int_distribution<int> trim(0, 300);
  return {static_cast<int>(cols * kTileSize - (cols > 1 ? trim(rng) : 0)),
          static_cast<int>(rows * kTileSize - (rows > 1 ? trim(rng) : 0))};
}

inline std::vector<CorpusRow> reference_corpus(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::vector<CorpusRow> rows;
  const auto add = [&](Label label, int works, long total, const char* prefix) {
    const auto budget = tile_budget(works, total, rng);
    for (int i = 0; i < works; ++i) {
      const auto [w, h] = dims_for(budget[i], rng);
      char id[16];
      std::snprintf(id, sizeof id, "%s-%03d", prefix, i + 1);
      rows.push_back({id, label, w, h, budget[i]});
    }
  };
  add(Label::Negative, 56, 6015, "N");
  add(Label::Positive, 85, 6370, "R");
  return rows;
}

/// Writes a CSV manifest for `rows` with empty placeholder image files; the
/// dimension columns make the files' contents irrelevant.
inline fs::path write_corpus_manifest(const fs::path& dir, const std::vector<CorpusRow>& rows) {
  std::vector<ArtworkRecord> records;
  for (const auto& r : rows) {
    const fs::path image = dir / "images" / (r.id + ".png");
    touch(image);
    records.push_back({r.id, "work " + r.id, r.label, Certainty::Certain1, image, 5.0, r.width_px, r.height_px});
  }
  const fs::path manifest = dir / "manifest.csv";
  write_manifest_csv(manifest, records);
  return manifest;
}

}  // namespace attrib::testing
