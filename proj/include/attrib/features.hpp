#pragma once

#include <Eigen/Core>

#include "attrib/corpus.hpp"

namespace attrib {

/// Handcrafted tile descriptor. Block layout:
///   [ 0, 48)  per-channel 16-bin intensity histograms (R, G, B), each summing to 1
///   [48, 56)  gradient-orientation energy, 8 bins of 22.5 deg centred on 0 deg
///             (bin 0 holds horizontal gradients, i.e. vertical strokes)
///   [56, 72)  oriented band-pass energy, 4 scales x 4 orientations (0, 45, 90, 135 deg)
///   [72, 80)  local-variance pyramid: mean and spread of 8x8 block std-dev at 4 scales
///   [80, 88)  colour co-occurrence: per colour class, probability that the
///             horizontal (4) and vertical (4) neighbour shares the class
namespace feature_layout {
inline constexpr int kHistogram = 0;
inline constexpr int kHistogramBins = 16;
inline constexpr int kOrientation = 48;
inline constexpr int kOrientationBins = 8;
inline constexpr int kBandPass = 56;
inline constexpr int kScales = 4;
inline constexpr int kBandOrientations = 4;
inline constexpr int kVariance = 72;
inline constexpr int kCooccurrence = 80;
inline constexpr int kDim = 88;
}  // namespace feature_layout

inline constexpr int kFeatureDim = feature_layout::kDim;

using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

/// Orientation bin (0..7) of a gradient vector, orientation taken modulo 180 deg.
int orientation_bin(float gx, float gy);

/// Requires a 512x512 tile.
FeatureVector extract_features(const Image8& tile);
FeatureVector extract_features(const TileSample& tile);

}  // namespace attrib
