#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attrib/classifier.hpp"

namespace attrib {

inline constexpr int kEnsembleSize = 5;

/// Decision threshold of the published deployment; used by the regression fixtures.
inline constexpr double kReferenceThreshold = 0.6080;

using MemberProbs = std::array<double, kEnsembleSize>;

/// Positive decisions are `p >= tau` (Inclusive, the default) or `p > tau`.
enum class Boundary { Inclusive, Exclusive };

inline bool at_or_above(double p, double tau, Boundary boundary = Boundary::Inclusive) {
  return boundary == Boundary::Inclusive ? p >= tau : p > tau;
}

enum class Fusion { Mean, Median, Vote };

struct EnsemblePrediction {
  TileRect rect;
  MemberProbs member_probs{};
  double mean = 0.0;
  double variance = 0.0;  ///< population variance of the member probabilities
  bool above_threshold = false;
};

/// Combines member outputs for one tile. `mean` holds the fused score: the
/// arithmetic mean by default, or the median / fraction of members voting
/// positive (at `tau`) for the alternative rules.
EnsemblePrediction fuse(const TileRect& rect, const MemberProbs& member_probs, double tau,
                        Fusion fusion = Fusion::Mean);

enum class Decision { ConsistentWithArtist, Inconsistent };

std::string_view to_string(Decision decision) noexcept;
Decision parse_decision(std::string_view text);

struct ImageVerdict {
  std::string artwork_id;
  double image_prob = 0.0;
  int tiles_total = 0;
  int tiles_positive = 0;
  Decision decision = Decision::Inconsistent;
  std::vector<EnsemblePrediction> tiles;
};

/// Image probability is the mean of the tile means; a tile counts as positive
/// when its mean is at or above `tau`, and so does the image.
ImageVerdict aggregate_image(std::span<const EnsemblePrediction> tile_preds, double tau,
                             Boundary boundary = Boundary::Inclusive);

struct ThresholdCandidate {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

struct Calibration {
  double threshold = 0.5;
  double balanced_accuracy = 0.0;
  std::vector<ThresholdCandidate> trace;
};

double balanced_accuracy(std::span<const double> probs, std::span<const Label> labels, double tau);

/// Sweeps 0, 1 and every midpoint between consecutive distinct probabilities and
/// keeps the threshold with the highest balanced accuracy; ties go to the
/// candidate closest to 0.5, then to the lower one.
Calibration calibrate_threshold(std::span<const double> probs, std::span<const Label> labels);

struct Ensemble {
  std::vector<TileClassifier> members;
  double threshold = 0.5;
  std::uint64_t base_seed = 0;
  Calibration calibration;

  /// Throws unless there are exactly five trained members and 0 < threshold < 1.
  void validate() const;

  /// Member probabilities for one tile; features are extracted once.
  MemberProbs member_probabilities(const Image8& tile) const;
};

/// Trains member i with seed `base_seed + i`. Members run concurrently when the
/// machine has more than one hardware thread.
std::vector<TileClassifier> train_ensemble(std::span<const TileSample> train_tiles, const TrainConfig& config,
                                           std::uint64_t base_seed,
                                           const std::function<void(int member, int epoch, double loss)>& progress = {});

EnsemblePrediction predict_tile(const Ensemble& ensemble, const TileSample& tile);

/// Calibrates on the ensemble's tile means over the validation tiles, stores
/// the result in the ensemble and returns it. A sweep that lands on 0 or 1 is
/// nudged inside the open interval.
Calibration calibrate_threshold(Ensemble& ensemble, std::span<const TileSample> validation_tiles);

/// Directory of `member_<i>.json` files plus `ensemble.json` (threshold, base
/// seed, calibration trace, member digests).
void save_ensemble(const std::filesystem::path& dir, const Ensemble& ensemble);
Ensemble load_ensemble(const std::filesystem::path& dir);

/// Regression fixture: per-tile member probabilities with the summary they must reproduce.
struct Fixture {
  std::string name;
  std::string artwork_id;
  double threshold = kReferenceThreshold;
  std::vector<MemberProbs> tiles;
  double expected_image_prob = 0.0;
  int expected_tiles_total = 0;
  int expected_tiles_positive = 0;
  Decision expected_decision = Decision::Inconsistent;
};

Fixture load_fixture(const std::filesystem::path& path);

}  // namespace attrib
