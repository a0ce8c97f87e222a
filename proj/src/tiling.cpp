#include "attrib/corpus.hpp"
#include "attrib/error.hpp"

namespace attrib {

std::vector<int> tile_offsets(int length) {
  std::vector<int> offsets;
  int pos = 0;
  for (; pos + kTileSize <= length; pos += kTileSize) offsets.push_back(pos);
  if (pos < length) offsets.push_back(length - kTileSize);
  return offsets;
}

long tile_count(int width_px, int height_px) {
  const auto ceil_div = [](long n) { return (n + kTileSize - 1) / kTileSize; };
  return ceil_div(width_px) * ceil_div(height_px);
}

std::vector<TileRect> tile_grid(int width_px, int height_px, std::string_view artwork_id) {
  if (width_px < kTileSize || height_px < kTileSize)
    throw Error(ErrorCode::ImageTooSmall, std::to_string(width_px) + "x" + std::to_string(height_px) +
                                              " is smaller than one " + std::to_string(kTileSize) + "px tile");
  const auto xs = tile_offsets(width_px);
  const auto ys = tile_offsets(height_px);
  std::vector<TileRect> grid;
  grid.reserve(xs.size() * ys.size());
  for (size_t r = 0; r < ys.size(); ++r)
    for (size_t c = 0; c < xs.size(); ++c)
      grid.push_back(TileRect{std::string(artwork_id), static_cast<int>(r), static_cast<int>(c), xs[c], ys[r]});
  return grid;
}

std::vector<TileSample> extract_tiles(const Image8& image, std::span<const TileRect> grid, Label label) {
  std::vector<TileSample> samples;
  samples.reserve(grid.size());
  for (const auto& rect : grid) {
    if (rect.x < 0 || rect.y < 0 || rect.size < 1 || rect.x + rect.size > image.width() ||
        rect.y + rect.size > image.height())
      throw Error(ErrorCode::RectOutOfBounds, "tile r" + std::to_string(rect.row) + "_c" + std::to_string(rect.col) +
                                                  " exceeds " + std::to_string(image.width()) + "x" +
                                                  std::to_string(image.height()));
    samples.push_back(TileSample{rect, label, image.block(rect.x, rect.y, rect.size, rect.size)});
  }
  return samples;
}

std::filesystem::path tile_store_path(Split split, Label label, const TileRect& rect) {
  return std::filesystem::path("tiles") / std::string(to_string(split)) / std::string(to_string(label)) /
         rect.artwork_id / ("r" + std::to_string(rect.row) + "_c" + std::to_string(rect.col) + ".png");
}

}  // namespace attrib
