#include "attrib/overlay.hpp"

#include <algorithm>
#include <cmath>

#include "attrib/error.hpp"

namespace attrib {

namespace {

void check_alignment(const Image8& image, std::span<const TileRect> grid, std::span<const EnsemblePrediction> preds) {
  if (grid.size() != preds.size())
    throw Error(ErrorCode::GridMismatch, std::to_string(grid.size()) + " rects vs " + std::to_string(preds.size()) +
                                             " predictions");
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& r = grid[i];
    const auto& p = preds[i].rect;
    if (r.x != p.x || r.y != p.y || r.size != p.size)
      throw Error(ErrorCode::GridMismatch, "prediction " + std::to_string(i) + " does not match its grid rect");
    if (r.x < 0 || r.y < 0 || r.x + r.size > image.width() || r.y + r.size > image.height())
      throw Error(ErrorCode::GridMismatch, "grid rect " + std::to_string(i) + " exceeds the image");
  }
}

void tint_rect(Image8& out, const Image8& base, const TileRect& r, const Rgb& color, double alpha) {
  for (int c = 0; c < 3; ++c)
    for (int y = r.y; y < r.y + r.size; ++y)
      for (int x = r.x; x < r.x + r.size; ++x) out[c](y, x) = blend_channel(base[c](y, x), color[c], alpha);
}

void put(Image8& img, int x, int y, const Rgb& color) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  for (int c = 0; c < 3; ++c) img[c](y, x) = color[c];
}

void outline(Image8& img, const TileRect& r, const OverlaySpec& spec, bool dashed) {
  const int period = spec.dash_length + spec.gap_length;
  const auto on = [&](int t) { return !dashed || t % period < spec.dash_length; };
  for (int k = 0; k < spec.outline_width; ++k) {
    const int x0 = r.x + k, y0 = r.y + k, x1 = r.x + r.size - 1 - k, y1 = r.y + r.size - 1 - k;
    if (x0 > x1 || y0 > y1) break;
    for (int x = x0; x <= x1; ++x)
      if (on(x - r.x)) {
        put(img, x, y0, spec.outline_color);
        put(img, x, y1, spec.outline_color);
      }
    for (int y = y0; y <= y1; ++y)
      if (on(y - r.y)) {
        put(img, x0, y, spec.outline_color);
        put(img, x1, y, spec.outline_color);
      }
  }
}

}  // namespace

void OverlaySpec::validate() const {
  if (!(alpha_max > 0.0 && alpha_max <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha_max must be in (0, 1]");
  if (!(variance_full_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "variance_full_scale must be positive");
  if (outline_width < 1 || dash_length < 1 || gap_length < 0)
    throw Error(ErrorCode::InvalidArgument, "outline width and dash length must be positive");
}

double uncertainty_alpha(double variance, const OverlaySpec& spec) {
  return spec.alpha_max * std::clamp(variance / spec.variance_full_scale, 0.0, 1.0);
}

double confidence_alpha(double mean, double tau, const OverlaySpec& spec) {
  const double side = mean >= tau ? 1.0 - tau : tau;
  if (side <= 0.0) return mean == tau ? 0.0 : spec.alpha_max;
  return spec.alpha_max * std::min(std::abs(mean - tau) / side, 1.0);
}

std::uint8_t blend_channel(std::uint8_t base, std::uint8_t tint, double alpha) {
  const double v = (1.0 - alpha) * base + alpha * tint;
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Image8 render_uncertainty(const Image8& image, std::span<const TileRect> grid,
                          std::span<const EnsemblePrediction> predictions, const OverlaySpec& spec) {
  spec.validate();
  check_alignment(image, grid, predictions);
  Image8 out = image;
  for (size_t i = 0; i < grid.size(); ++i) {
    const double alpha = uncertainty_alpha(predictions[i].variance, spec);
    if (alpha > 0.0) tint_rect(out, image, grid[i], spec.disagreement_color, alpha);
  }
  return out;
}

Image8 render_confidence(const Image8& image, std::span<const TileRect> grid,
                         std::span<const EnsemblePrediction> predictions, double tau, const OverlaySpec& spec) {
  spec.validate();
  check_alignment(image, grid, predictions);
  Image8 out = image;
  for (size_t i = 0; i < grid.size(); ++i) {
    const double mean = predictions[i].mean;
    const Rgb& color = at_or_above(mean, tau) ? spec.above_color : spec.below_color;
    const double alpha = confidence_alpha(mean, tau, spec);
    if (alpha > 0.0) tint_rect(out, image, grid[i], color, alpha);
  }
  return out;
}

ExtremeTiles find_extremes(std::span<const EnsemblePrediction> predictions) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyPredictions, "no tiles to annotate");
  ExtremeTiles e;
  for (size_t i = 1; i < predictions.size(); ++i) {
    if (predictions[i].mean > predictions[e.highest].mean) e.highest = i;
    if (predictions[i].mean < predictions[e.lowest].mean) e.lowest = i;
  }
  return e;
}

Image8 annotate_extremes(Image8 overlay, std::span<const TileRect> grid,
                         std::span<const EnsemblePrediction> predictions, const OverlaySpec& spec) {
  spec.validate();
  const ExtremeTiles e = find_extremes(predictions);
  if (grid.size() != predictions.size()) throw Error(ErrorCode::GridMismatch, "grid and predictions differ in length");
  outline(overlay, grid[e.lowest], spec, true);
  outline(overlay, grid[e.highest], spec, false);
  return overlay;
}

}  // namespace attrib
