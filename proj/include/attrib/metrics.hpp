#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "attrib/ensemble.hpp"

namespace attrib {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
  void add(bool predicted_positive, bool actually_positive);

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Every tile prediction of one labelled artwork.
struct LabeledImage {
  Label label = Label::Negative;
  std::vector<EnsemblePrediction> tiles;
};

struct ArtworkResult {
  ImageVerdict verdict;
  Label label = Label::Negative;
  bool correct = false;
  /// Auxiliary decision: more than half of the tiles at or above the threshold.
  bool tile_majority_positive = false;
};

struct EvaluationReport {
  double threshold = 0.5;
  double tile_accuracy = 0.0;
  double image_accuracy = 0.0;
  double tile_majority_accuracy = 0.0;
  Confusion tile;
  Confusion image;
  double mean_variance = 0.0;
  std::vector<ArtworkResult> artworks;
};

/// Tile decisions compare each tile mean against `tau`; image decisions come from
/// `aggregate_image` (mean of tile means).
EvaluationReport evaluate(std::span<const LabeledImage> images, double tau, Boundary boundary = Boundary::Inclusive);

/// Runs the ensemble over labelled tiles, grouping them by artwork id.
EvaluationReport evaluate(const Ensemble& ensemble, std::span<const TileSample> tiles);

inline constexpr int kVarianceBins = 10;
inline constexpr double kMaxVariance = 0.25;  // population variance of values in [0, 1]

struct AgreementStats {
  double mean_variance = 0.0;
  double unanimous_fraction = 0.0;
  /// Counts over 10 equal bins of [0, 0.25]; the top bin is closed.
  std::array<long, kVarianceBins> variance_histogram{};
};

AgreementStats agreement_stats(std::span<const EnsemblePrediction> predictions);

nlohmann::json to_json(const EvaluationReport& report);
std::string summary_table(const EvaluationReport& report);

}  // namespace attrib
