#include "attrib/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrib/digest.hpp"
#include "attrib/error.hpp"

namespace attrib {

namespace {

constexpr const char* kModelFormat = "attrib-tile-classifier";
constexpr int kModelVersion = 1;

std::vector<double> to_vec(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j, Eigen::Index expected, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != expected)
    throw Error(ErrorCode::Io, std::string("model field ") + what + " has wrong length");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), expected);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (hidden_units < 1) throw Error(ErrorCode::InvalidArgument, "hidden units must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error(ErrorCode::InvalidArgument, "Adam moment decays must be in [0, 1)");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "Adam epsilon must be positive");
  augment.validate();
}

void to_json(nlohmann::json& j, const AugmentParams& p) {
  j = nlohmann::json{{"crop_min", p.crop_min},
                     {"crop_max", p.crop_max},
                     {"rotation_min_deg", p.rotation_min_deg},
                     {"rotation_max_deg", p.rotation_max_deg},
                     {"flip_probability", p.flip_probability},
                     {"noise_sigma_min", p.noise_sigma_min},
                     {"noise_sigma_max", p.noise_sigma_max},
                     {"contrast_min", p.contrast_min},
                     {"contrast_max", p.contrast_max},
                     {"color_min", p.color_min},
                     {"color_max", p.color_max},
                     {"perspective_jitter", p.perspective_jitter},
                     {"elastic_sigma_px", p.elastic_sigma_px},
                     {"elastic_smoothing_px", p.elastic_smoothing_px}};
}

void from_json(const nlohmann::json& j, AugmentParams& p) {
  const AugmentParams d;
  p.crop_min = j.value("crop_min", d.crop_min);
  p.crop_max = j.value("crop_max", d.crop_max);
  p.rotation_min_deg = j.value("rotation_min_deg", d.rotation_min_deg);
  p.rotation_max_deg = j.value("rotation_max_deg", d.rotation_max_deg);
  p.flip_probability = j.value("flip_probability", d.flip_probability);
  p.noise_sigma_min = j.value("noise_sigma_min", d.noise_sigma_min);
  p.noise_sigma_max = j.value("noise_sigma_max", d.noise_sigma_max);
  p.contrast_min = j.value("contrast_min", d.contrast_min);
  p.contrast_max = j.value("contrast_max", d.contrast_max);
  p.color_min = j.value("color_min", d.color_min);
  p.color_max = j.value("color_max", d.color_max);
  p.perspective_jitter = j.value("perspective_jitter", d.perspective_jitter);
  p.elastic_sigma_px = j.value("elastic_sigma_px", d.elastic_sigma_px);
  p.elastic_smoothing_px = j.value("elastic_smoothing_px", d.elastic_smoothing_px);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},       {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                     {"beta2", c.beta2},         {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
                     {"hidden_units", c.hidden_units}, {"augment", c.augment}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.hidden_units = j.value("hidden_units", d.hidden_units);
  c.augment = j.contains("augment") ? j.at("augment").get<AugmentParams>() : d.augment;
}

std::string config_digest(const TrainConfig& config) { return sha256_hex(nlohmann::json(config).dump()); }

TileClassifier TileClassifier::from_parameters(const FeatureVector& feature_mean, const FeatureVector& feature_scale,
                                               Mlp<double> net) {
  if (net.inputs() != kFeatureDim) throw Error(ErrorCode::InvalidArgument, "network input width must be 88");
  if (!(feature_scale.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "feature scale must be positive");
  TileClassifier c;
  c.mean_ = feature_mean;
  c.scale_ = feature_scale;
  c.net_ = std::move(net);
  c.config.hidden_units = static_cast<int>(c.net_.hidden());
  c.trained_ = true;
  return c;
}

double TileClassifier::predict_features(const FeatureVector& features) const {
  if (!trained_) throw Error(ErrorCode::UntrainedClassifier, "classifier has no trained weights");
  const Eigen::VectorXd x = (features - mean_).cwiseQuotient(scale_);
  return sigmoid(net_.logits(x)[0]);
}

double TileClassifier::probability(const Image8& tile) const {
  if (!trained_) throw Error(ErrorCode::UntrainedClassifier, "classifier has no trained weights");
  return predict_features(extract_features(tile));
}

nlohmann::json TileClassifier::to_json() const {
  if (!trained_) throw Error(ErrorCode::UntrainedClassifier, "cannot serialise an untrained classifier");
  nlohmann::json w1 = nlohmann::json::array();
  for (Eigen::Index r = 0; r < net_.w1.rows(); ++r) w1.push_back(to_vec(net_.w1.row(r).transpose()));
  return nlohmann::json{{"format", kModelFormat},
                        {"version", kModelVersion},
                        {"feature_dim", kFeatureDim},
                        {"hidden_units", net_.hidden()},
                        {"feature_mean", to_vec(mean_)},
                        {"feature_scale", to_vec(scale_)},
                        {"w1", w1},
                        {"b1", to_vec(net_.b1)},
                        {"w2", to_vec(net_.w2)},
                        {"b2", net_.b2},
                        {"seed", seed},
                        {"config", config},
                        {"config_digest", config_digest(config)},
                        {"epoch_loss", epoch_loss}};
}

TileClassifier TileClassifier::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat || j.at("version").get<int>() != kModelVersion)
      throw Error(ErrorCode::Io, "unsupported model format");
    if (j.at("feature_dim").get<int>() != kFeatureDim) throw Error(ErrorCode::Io, "model feature_dim must be 88");
    const Eigen::Index hidden = j.at("hidden_units").get<Eigen::Index>();
    Mlp<double> net(kFeatureDim, hidden);
    const auto& w1 = j.at("w1");
    if (static_cast<Eigen::Index>(w1.size()) != hidden) throw Error(ErrorCode::Io, "model w1 has wrong row count");
    for (Eigen::Index r = 0; r < hidden; ++r) net.w1.row(r) = from_vec(w1[r], kFeatureDim, "w1").transpose();
    net.b1 = from_vec(j.at("b1"), hidden, "b1");
    net.w2 = from_vec(j.at("w2"), hidden, "w2");
    net.b2 = j.at("b2").get<double>();
    TileClassifier c = from_parameters(from_vec(j.at("feature_mean"), kFeatureDim, "feature_mean"),
                                       from_vec(j.at("feature_scale"), kFeatureDim, "feature_scale"), std::move(net));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.config = j.at("config").get<TrainConfig>();
    c.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed model file: ") + e.what());
  }
}

void save_classifier(const std::filesystem::path& path, const TileClassifier& classifier) {
  write_text_file(path, classifier.to_json().dump(1) + "\n");
}

TileClassifier load_classifier(const std::filesystem::path& path) {
  try {
    return TileClassifier::from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

TileClassifier train_classifier(std::span<const TileSample> tiles, const TrainConfig& config, std::uint64_t seed,
                                const std::function<void(int, double)>& on_epoch) {
  config.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(tiles.size());
  const auto positives = std::count_if(tiles.begin(), tiles.end(), [](const auto& t) { return t.label == Label::Positive; });
  if (positives == 0 || positives == n)
    throw Error(ErrorCode::SingleClassData, "training data must contain both labels");

  Eigen::MatrixXd raw(kFeatureDim, n);
  Eigen::RowVectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.col(i) = extract_features(tiles[i]);
    labels[i] = tiles[i].label == Label::Positive ? 1.0 : 0.0;
  }

  TileClassifier out;
  out.mean_ = raw.rowwise().mean();
  const Eigen::VectorXd var = (raw.colwise() - out.mean_).array().square().rowwise().mean();
  out.scale_ = var.array().sqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  const auto normalize = [&](const Eigen::VectorXd& f) -> Eigen::VectorXd {
    return (f - out.mean_).cwiseQuotient(out.scale_);
  };

  std::mt19937_64 rng(seed);
  out.net_ = Mlp<double>(kFeatureDim, config.hidden_units);
  out.net_.initialize(rng);
  Eigen::VectorXd theta = out.net_.flatten();
  Adam<double> adam(theta.size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);

  const bool augmenting = !(config.augment == AugmentParams::identity());
  Eigen::MatrixXd cached;
  if (!augmenting) cached = (raw.colwise() - out.mean_).array().colwise() / out.scale_.array();

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd grad;
  out.epoch_loss.reserve(static_cast<size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd x(kFeatureDim, b);
      Eigen::RowVectorXd y(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const Eigen::Index i = order[static_cast<size_t>(start + k)];
        x.col(k) = augmenting ? normalize(extract_features(augment(tiles[i], config.augment, rng))) : cached.col(i);
        y[k] = labels[i];
      }
      const double loss = bce_loss(out.net_, x, y, &grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw Error(ErrorCode::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch + 1));
      adam.update(theta, grad);
      out.net_.unflatten(theta);
      total += loss * static_cast<double>(b);
    }
    out.epoch_loss.push_back(total / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch + 1, out.epoch_loss.back());
  }
  out.seed = seed;
  out.config = config;
  out.trained_ = true;
  return out;
}

}  // namespace attrib
