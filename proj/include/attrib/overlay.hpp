#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "attrib/ensemble.hpp"

namespace attrib {

using Rgb = std::array<std::uint8_t, 3>;

enum class OverlayMode { Uncertainty, Confidence };

struct OverlaySpec {
  OverlayMode mode = OverlayMode::Uncertainty;
  double alpha_max = 0.6;
  double variance_full_scale = 0.25;
  Rgb disagreement_color{255, 0, 0};
  Rgb above_color{0, 255, 0};
  Rgb below_color{255, 0, 0};
  Rgb outline_color{160, 32, 240};
  int outline_width = 4;
  int dash_length = 16;
  int gap_length = 10;

  void validate() const;
};

/// alpha_max * min(variance / variance_full_scale, 1).
double uncertainty_alpha(double variance, const OverlaySpec& spec);

/// alpha_max * min(|mean - tau| / d, 1), with d = 1 - tau above the threshold and d = tau below.
double confidence_alpha(double mean, double tau, const OverlaySpec& spec);

/// round((1 - alpha) * base + alpha * tint), per channel.
std::uint8_t blend_channel(std::uint8_t base, std::uint8_t tint, double alpha);

/// Tints each tile of `image` red in proportion to ensemble disagreement. Tiles
/// are drawn in grid order from the untouched painting, so overlapping edge
/// tiles show the later tile's tint.
Image8 render_uncertainty(const Image8& image, std::span<const TileRect> grid,
                          std::span<const EnsemblePrediction> predictions, const OverlaySpec& spec = {});

/// Green for tiles at or above `tau`, red below, saturation growing with the
/// side-normalised distance from `tau`.
Image8 render_confidence(const Image8& image, std::span<const TileRect> grid,
                         std::span<const EnsemblePrediction> predictions, double tau, const OverlaySpec& spec = {});

struct ExtremeTiles {
  size_t highest = 0;
  size_t lowest = 0;
};

/// Indices of the highest and lowest tile mean; ties go to the earliest tile.
ExtremeTiles find_extremes(std::span<const EnsemblePrediction> predictions);

/// Solid outline on the highest-mean tile, dashed outline on the lowest (solid drawn last).
Image8 annotate_extremes(Image8 overlay, std::span<const TileRect> grid,
                         std::span<const EnsemblePrediction> predictions, const OverlaySpec& spec = {});

}  // namespace attrib
