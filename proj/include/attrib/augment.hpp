#pragma once

#include <random>

#include <Eigen/Core>

#include "attrib/corpus.hpp"

namespace attrib {

/// Ranges the augmentation draws from. A collapsed range (min == max) fixes the
/// parameter; `identity()` collapses everything to a no-op.
struct AugmentParams {
  double crop_min = 0.8;  ///< crop side as a fraction of the tile, resized back to 512
  double crop_max = 1.0;
  double rotation_min_deg = -15.0;
  double rotation_max_deg = 15.0;
  double flip_probability = 0.5;
  double noise_sigma_min = 0.0;  ///< additive Gaussian noise, fraction of channel range
  double noise_sigma_max = 0.02;
  double contrast_min = 0.8;
  double contrast_max = 1.2;
  double color_min = 0.9;  ///< per-channel gain
  double color_max = 1.1;
  double perspective_jitter = 0.03;  ///< max corner displacement, fraction of side
  double elastic_sigma_px = 8.0;     ///< std-dev of the smoothed displacement field
  double elastic_smoothing_px = 34.0;

  static AugmentParams identity();

  /// Throws InvalidArgument on inverted ranges or out-of-range values.
  void validate() const;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// One concrete draw from `AugmentParams`.
struct AugmentDraw {
  double crop = 1.0;
  double crop_x = 0.0, crop_y = 0.0;
  double rotation_deg = 0.0;
  bool flip = false;
  Eigen::Matrix<double, 4, 2> corner_offsets = Eigen::Matrix<double, 4, 2>::Zero();  ///< pixels
  double noise_sigma = 0.0;
  double contrast = 1.0;
  Eigen::Array3d color = Eigen::Array3d::Ones();
  double elastic_sigma_px = 0.0;
  double elastic_smoothing_px = 34.0;
  std::uint64_t noise_seed = 0;
  std::uint64_t elastic_seed = 0;

  bool geometric_identity() const;
  bool photometric_identity() const;
};

AugmentDraw draw_augmentation(const AugmentParams& params, std::mt19937_64& rng);

/// Applies a specific draw to a 512x512 tile. Output keeps the size and label.
TileSample apply_augmentation(const TileSample& tile, const AugmentDraw& draw);

TileSample augment(const TileSample& tile, const AugmentParams& params, std::mt19937_64& rng);

}  // namespace attrib
