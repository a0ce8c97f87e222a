#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "attrib/augment.hpp"
#include "attrib/features.hpp"
#include "attrib/mlp.hpp"

namespace attrib {

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  int hidden_units = 32;
  AugmentParams augment;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const AugmentParams& p);
void from_json(const nlohmann::json& j, AugmentParams& p);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Anything that turns a 512x512 RGB tile into a probability of the positive class.
class TileScorer {
 public:
  virtual ~TileScorer() = default;
  virtual double probability(const Image8& tile) const = 0;
};

/// Feature normalisation + network. Normalisation statistics are fixed at
/// training time and stored with the weights.
class TileClassifier : public TileScorer {
 public:
  TileClassifier() = default;

  /// Wraps explicit parameters; `feature_scale` entries must be positive.
  static TileClassifier from_parameters(const FeatureVector& feature_mean, const FeatureVector& feature_scale,
                                        Mlp<double> net);

  bool trained() const { return trained_; }

  double probability(const Image8& tile) const override;
  double predict(const TileSample& tile) const { return probability(tile.pixels); }
  double predict_features(const FeatureVector& features) const;

  const Mlp<double>& network() const { return net_; }
  const FeatureVector& feature_mean() const { return mean_; }
  const FeatureVector& feature_scale() const { return scale_; }

  std::uint64_t seed = 0;
  TrainConfig config;
  std::vector<double> epoch_loss;

  nlohmann::json to_json() const;
  static TileClassifier from_json(const nlohmann::json& j);

 private:
  friend TileClassifier train_classifier(std::span<const TileSample>, const TrainConfig&, std::uint64_t,
                                         const std::function<void(int, double)>&);
  bool trained_ = false;
  FeatureVector mean_ = FeatureVector::Zero();
  FeatureVector scale_ = FeatureVector::Ones();
  Mlp<double> net_;
};

/// Minibatch Adam on mean binary cross-entropy. Every epoch reshuffles the
/// samples and draws a fresh augmentation for each one; normalisation comes from
/// the un-augmented tiles. Deterministic for a given seed. `on_epoch`, when
/// set, is called with (epoch, mean loss) after each epoch.
TileClassifier train_classifier(std::span<const TileSample> tiles, const TrainConfig& config, std::uint64_t seed,
                                const std::function<void(int, double)>& on_epoch = {});

/// Digest of the JSON-serialised config.
std::string config_digest(const TrainConfig& config);

void save_classifier(const std::filesystem::path& path, const TileClassifier& classifier);
TileClassifier load_classifier(const std::filesystem::path& path);

}  // namespace attrib
