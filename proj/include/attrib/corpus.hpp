#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrib/image.hpp"

namespace attrib {

inline constexpr int kTileSize = 512;

enum class Label { Negative = 0, Positive = 1 };
enum class Certainty { Certain1, Disputed };
enum class Split { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Split, 3> kSplits{Split::Train, Split::Val, Split::Test};

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Certainty certainty) noexcept;
std::string_view to_string(Split split) noexcept;
Label parse_label(std::string_view text);
Certainty parse_certainty(std::string_view text);
Split parse_split(std::string_view text);

struct ArtworkRecord {
  std::string artwork_id;
  std::string title;
  Label label = Label::Negative;
  Certainty certainty = Certainty::Certain1;
  std::filesystem::path image_path;
  double px_per_mm = 0.0;
  int width_px = 0;
  int height_px = 0;
};

// ---------------------------------------------------------------------------
// Manifest

/// Loads a CSV (`artwork_id,title,label,certainty,image_path,px_per_mm`, with
/// optional trailing `width_px,height_px`) or a JSON array with the same keys.
/// Relative image paths resolve against `image_root`, or the manifest's
/// directory when `image_root` is empty. Image dimensions come from the
/// optional columns when present and from the image file otherwise.
std::vector<ArtworkRecord> load_manifest(const std::filesystem::path& path,
                                         const std::filesystem::path& image_root = {});

void write_manifest_csv(const std::filesystem::path& path, std::span<const ArtworkRecord> records);

// ---------------------------------------------------------------------------
// Quality control

struct QcConfig {
  double min_px_per_mm = 4.5;
  double glare_max = 0.05;
  double noise_max = 0.15;
  /// A channel value counts as saturated at or above this fraction of 255.
  double saturation_level = 0.98;
  double max_edge_skew_deg = 2.0;
};

struct QualityReport {
  std::string artwork_id;
  bool resolution_ok = false;
  double glare_fraction = 0.0;
  double noise_score = 0.0;
  bool distortion_flag = false;
  bool passed = false;
};

/// Fraction of pixels whose three channels are all at or above the saturation level.
double glare_fraction(const Image8& image, double saturation_level);

/// Mean absolute difference between the image and its 3x3 box blur, over all
/// channels, in [0, 1] channel units. Borders use replicated edges.
double noise_score(const Image8& image);

/// Straight outer frame lines found from the border inwards; absent when the
/// edge is not detected consistently.
struct FrameEdges {
  std::optional<double> left_deg, right_deg, top_deg, bottom_deg;
};

FrameEdges detect_frame_edges(const Image8& image);

/// True when either pair of opposite frame edges departs from parallel by more than `max_skew_deg`.
bool distortion_flag(const Image8& image, double max_skew_deg);

QualityReport quality_check(const ArtworkRecord& record, const Image8& image, const QcConfig& config = {});

// ---------------------------------------------------------------------------
// Tiling

struct TileRect {
  std::string artwork_id;
  int row = 0;
  int col = 0;
  int x = 0;
  int y = 0;
  int size = kTileSize;

  friend bool operator==(const TileRect&, const TileRect&) = default;
};

struct TileSample {
  TileRect rect;
  Label label = Label::Negative;
  Image8 pixels;
};

/// Offsets along one axis: stride `kTileSize`, with a final tile anchored at
/// `length - kTileSize` when the length is not a multiple of the tile size.
std::vector<int> tile_offsets(int length);

/// Row-major grid of 512x512 rects that jointly cover the whole image.
std::vector<TileRect> tile_grid(int width_px, int height_px, std::string_view artwork_id = {});

/// ceil(w/512) * ceil(h/512), without building the grid.
long tile_count(int width_px, int height_px);

std::vector<TileSample> extract_tiles(const Image8& image, std::span<const TileRect> grid, Label label);

/// `tiles/<split>/<label>/<artwork_id>/r<row>_c<col>.png` relative to the tile store root.
std::filesystem::path tile_store_path(Split split, Label label, const TileRect& rect);

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  double operator[](Split s) const { return s == Split::Train ? train : s == Split::Val ? val : test; }
};

struct SplitAssignment {
  std::map<std::string, Split> assignment;
  /// Indexed [split][label].
  std::array<std::array<int, 2>, 3> works{};
  std::array<std::array<long, 2>, 3> tiles{};
  /// Per-class tile targets the balancing aimed for, indexed [split][label].
  std::array<std::array<double, 2>, 3> tile_targets{};
  long max_artwork_tiles = 0;

  int works_in(Split s) const { return works[int(s)][0] + works[int(s)][1]; }
  long tiles_in(Split s, Label l) const { return tiles[int(s)][int(l)]; }

  /// How far the split's Positive-minus-Negative tile difference strays from the
  /// difference its targets call for. Validation and test target equal tile
  /// counts per class; train absorbs the corpus-wide class difference.
  double balance_excess(Split s) const;

  /// The documented balance bound: `balance_excess(s) <= max_artwork_tiles` for every split.
  bool within_balance_bound() const;
};

/// Work counts per split by largest remainder; ties go to the earlier split.
std::array<int, 3> split_work_counts(int total, const SplitRatios& ratios);

/// Assigns whole artworks to splits. Disputed works are skipped. Work counts per
/// split follow `split_work_counts`; within each class artworks are placed in
/// descending tile order on the split with the largest per-slot tile deficit,
/// followed by pairwise swaps that reduce the distance to the tile targets.
/// The seed orders artworks with equal tile counts.
SplitAssignment split_corpus(std::span<const ArtworkRecord> records, const std::map<std::string, long>& tile_counts,
                             const SplitRatios& ratios, std::uint64_t seed);

}  // namespace attrib
