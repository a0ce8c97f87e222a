#include "attrib/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "attrib/digest.hpp"
#include "attrib/error.hpp"

namespace attrib {

namespace {

constexpr const char* kEnsembleFormat = "attrib-ensemble";
constexpr int kEnsembleVersion = 1;
constexpr double kThresholdInset = 1e-6;

}  // namespace

std::string_view to_string(Decision decision) noexcept {
  return decision == Decision::ConsistentWithArtist ? "ConsistentWithArtist" : "Inconsistent";
}

Decision parse_decision(std::string_view text) {
  if (text == "ConsistentWithArtist") return Decision::ConsistentWithArtist;
  if (text == "Inconsistent") return Decision::Inconsistent;
  throw Error(ErrorCode::InvalidArgument, "unknown decision '" + std::string(text) + "'");
}

EnsemblePrediction fuse(const TileRect& rect, const MemberProbs& member_probs, double tau, Fusion fusion) {
  EnsemblePrediction out;
  out.rect = rect;
  out.member_probs = member_probs;
  double sum = 0.0;
  for (double p : member_probs) sum += p;
  const double mean = sum / kEnsembleSize;
  double sq = 0.0;
  for (double p : member_probs) sq += (p - mean) * (p - mean);
  out.variance = sq / kEnsembleSize;
  switch (fusion) {
    case Fusion::Mean:
      out.mean = mean;
      break;
    case Fusion::Median: {
      MemberProbs sorted = member_probs;
      std::nth_element(sorted.begin(), sorted.begin() + kEnsembleSize / 2, sorted.end());
      out.mean = sorted[kEnsembleSize / 2];
      break;
    }
    case Fusion::Vote:
      out.mean = static_cast<double>(std::count_if(member_probs.begin(), member_probs.end(),
                                                   [&](double p) { return at_or_above(p, tau); })) /
                 kEnsembleSize;
      break;
  }
  out.above_threshold = at_or_above(out.mean, tau);
  return out;
}

ImageVerdict aggregate_image(std::span<const EnsemblePrediction> tile_preds, double tau, Boundary boundary) {
  if (tile_preds.empty()) throw Error(ErrorCode::EmptyTileList, "no tile predictions to aggregate");
  ImageVerdict v;
  v.artwork_id = tile_preds.front().rect.artwork_id;
  // Sorted summation keeps the result independent of tile order.
  std::vector<double> means;
  means.reserve(tile_preds.size());
  for (const auto& t : tile_preds) {
    if (t.rect.artwork_id != v.artwork_id)
      throw Error(ErrorCode::MixedArtworks, "tiles from '" + v.artwork_id + "' and '" + t.rect.artwork_id + "'");
    means.push_back(t.mean);
    if (at_or_above(t.mean, tau, boundary)) ++v.tiles_positive;
  }
  std::sort(means.begin(), means.end());
  double sum = 0.0;
  for (double m : means) sum += m;
  v.tiles_total = static_cast<int>(tile_preds.size());
  v.image_prob = sum / static_cast<double>(v.tiles_total);
  v.decision = at_or_above(v.image_prob, tau, boundary) ? Decision::ConsistentWithArtist : Decision::Inconsistent;
  v.tiles.assign(tile_preds.begin(), tile_preds.end());
  for (auto& t : v.tiles) t.above_threshold = at_or_above(t.mean, tau, boundary);
  return v;
}

namespace {

struct ClassHits {
  std::array<long, 2> total{}, correct{};

  // Balanced accuracy scaled by 2 * total[0] * total[1]; integer, so ties compare exactly.
  long scaled() const { return correct[0] * total[1] + correct[1] * total[0]; }
  double value() const {
    return 0.5 * (static_cast<double>(correct[0]) / total[0] + static_cast<double>(correct[1]) / total[1]);
  }
};

ClassHits class_hits(std::span<const double> probs, std::span<const Label> labels, double tau) {
  ClassHits h;
  for (size_t i = 0; i < probs.size(); ++i) {
    const int c = static_cast<int>(labels[i]);
    ++h.total[c];
    h.correct[c] += at_or_above(probs[i], tau) == (labels[i] == Label::Positive);
  }
  if (h.total[0] == 0 || h.total[1] == 0) throw Error(ErrorCode::ClassMissing, "balanced accuracy needs both classes");
  return h;
}

}  // namespace

double balanced_accuracy(std::span<const double> probs, std::span<const Label> labels, double tau) {
  return class_hits(probs, labels, tau).value();
}

Calibration calibrate_threshold(std::span<const double> probs, std::span<const Label> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "probabilities and labels differ in length");
  const bool has_pos = std::find(labels.begin(), labels.end(), Label::Positive) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), Label::Negative) != labels.end();
  if (!has_pos || !has_neg) throw Error(ErrorCode::ClassMissing, "validation data must contain both classes");

  std::vector<double> sorted(probs.begin(), probs.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> candidates{0.0};
  for (size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  candidates.push_back(1.0);

  // Midpoints mirrored about 0.5 can differ from it by a rounding error; treat those as equally close.
  constexpr double kDistanceTie = 1e-12;
  Calibration out;
  long best = -1;
  for (double tau : candidates) {
    const ClassHits h = class_hits(probs, labels, tau);
    out.trace.push_back({tau, h.value()});
    const double d = std::abs(tau - 0.5), best_d = std::abs(out.threshold - 0.5);
    const bool better = h.scaled() > best ||
                        (h.scaled() == best && (d < best_d - kDistanceTie ||
                                                (std::abs(d - best_d) <= kDistanceTie && tau < out.threshold)));
    if (better) {
      best = h.scaled();
      out.threshold = tau;
      out.balanced_accuracy = h.value();
    }
  }
  return out;
}

void Ensemble::validate() const {
  if (static_cast<int>(members.size()) != kEnsembleSize)
    throw Error(ErrorCode::InvalidArgument, "ensemble must have exactly 5 members, has " + std::to_string(members.size()));
  for (size_t i = 0; i < members.size(); ++i)
    if (!members[i].trained()) throw Error(ErrorCode::UntrainedMember, "member " + std::to_string(i) + " is untrained");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
}

MemberProbs Ensemble::member_probabilities(const Image8& tile) const {
  if (static_cast<int>(members.size()) != kEnsembleSize)
    throw Error(ErrorCode::UntrainedMember, "ensemble must have exactly 5 members");
  for (size_t i = 0; i < members.size(); ++i)
    if (!members[i].trained()) throw Error(ErrorCode::UntrainedMember, "member " + std::to_string(i) + " is untrained");
  const FeatureVector f = extract_features(tile);
  MemberProbs p{};
  for (int i = 0; i < kEnsembleSize; ++i) p[i] = members[i].predict_features(f);
  return p;
}

std::vector<TileClassifier> train_ensemble(std::span<const TileSample> train_tiles, const TrainConfig& config,
                                           std::uint64_t base_seed,
                                           const std::function<void(int, int, double)>& progress) {
  config.validate();
  std::vector<TileClassifier> members(kEnsembleSize);
  const auto run = [&](int i) {
    std::function<void(int, double)> cb;
    if (progress) cb = [&progress, i](int epoch, double loss) { progress(i, epoch, loss); };
    return train_classifier(train_tiles, config, base_seed + static_cast<std::uint64_t>(i), cb);
  };
  if (std::thread::hardware_concurrency() > 1 && !progress) {
    std::vector<std::future<TileClassifier>> jobs;
    for (int i = 0; i < kEnsembleSize; ++i) jobs.push_back(std::async(std::launch::async, run, i));
    for (int i = 0; i < kEnsembleSize; ++i) members[i] = jobs[i].get();
  } else {
    for (int i = 0; i < kEnsembleSize; ++i) members[i] = run(i);
  }
  return members;
}

EnsemblePrediction predict_tile(const Ensemble& ensemble, const TileSample& tile) {
  return fuse(tile.rect, ensemble.member_probabilities(tile.pixels), ensemble.threshold);
}

Calibration calibrate_threshold(Ensemble& ensemble, std::span<const TileSample> validation_tiles) {
  std::vector<double> means;
  std::vector<Label> labels;
  for (const auto& t : validation_tiles) {
    means.push_back(fuse(t.rect, ensemble.member_probabilities(t.pixels), 0.5).mean);
    labels.push_back(t.label);
  }
  Calibration cal = calibrate_threshold(means, labels);
  ensemble.calibration = cal;
  ensemble.threshold = std::clamp(cal.threshold, kThresholdInset, 1.0 - kThresholdInset);
  return cal;
}

void save_ensemble(const std::filesystem::path& dir, const Ensemble& ensemble) {
  ensemble.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json members = nlohmann::json::array();
  for (int i = 0; i < kEnsembleSize; ++i) {
    const std::string file = "member_" + std::to_string(i) + ".json";
    save_classifier(dir / file, ensemble.members[i]);
    members.push_back({{"file", file}, {"seed", ensemble.members[i].seed}, {"sha256", sha256_file(dir / file)}});
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& c : ensemble.calibration.trace) trace.push_back({c.threshold, c.balanced_accuracy});
  const nlohmann::json doc{{"format", kEnsembleFormat},
                           {"version", kEnsembleVersion},
                           {"threshold", ensemble.threshold},
                           {"base_seed", ensemble.base_seed},
                           {"members", members},
                           {"calibration",
                            {{"threshold", ensemble.calibration.threshold},
                             {"objective", "balanced_accuracy"},
                             {"balanced_accuracy", ensemble.calibration.balanced_accuracy},
                             {"trace", trace}}}};
  write_text_file(dir / "ensemble.json", doc.dump(1) + "\n");
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
  Ensemble e;
  try {
    const auto doc = nlohmann::json::parse(read_text_file(dir / "ensemble.json"));
    if (doc.at("format").get<std::string>() != kEnsembleFormat || doc.at("version").get<int>() != kEnsembleVersion)
      throw Error(ErrorCode::Io, "unsupported ensemble format");
    e.threshold = doc.at("threshold").get<double>();
    e.base_seed = doc.at("base_seed").get<std::uint64_t>();
    for (const auto& m : doc.at("members")) {
      const auto path = dir / m.at("file").get<std::string>();
      if (sha256_file(path) != m.at("sha256").get<std::string>())
        throw Error(ErrorCode::Io, "member digest mismatch for " + path.string());
      e.members.push_back(load_classifier(path));
    }
    const auto& cal = doc.at("calibration");
    e.calibration.threshold = cal.at("threshold").get<double>();
    e.calibration.balanced_accuracy = cal.at("balanced_accuracy").get<double>();
    for (const auto& c : cal.at("trace")) e.calibration.trace.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Io, "malformed ensemble in " + dir.string() + ": " + ex.what());
  }
  e.validate();
  return e;
}

Fixture load_fixture(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(read_text_file(path));
    Fixture f;
    f.name = doc.at("name").get<std::string>();
    f.artwork_id = doc.at("artwork_id").get<std::string>();
    f.threshold = doc.at("threshold").get<double>();
    for (const auto& t : doc.at("tiles")) {
      const auto probs = t.get<std::vector<double>>();
      if (probs.size() != kEnsembleSize) throw Error(ErrorCode::Io, "fixture tile must have 5 member probabilities");
      MemberProbs p{};
      std::copy(probs.begin(), probs.end(), p.begin());
      f.tiles.push_back(p);
    }
    const auto& ex = doc.at("expected");
    f.expected_image_prob = ex.at("image_prob").get<double>();
    f.expected_tiles_total = ex.at("tiles_total").get<int>();
    f.expected_tiles_positive = ex.at("tiles_positive").get<int>();
    f.expected_decision = parse_decision(ex.at("decision").get<std::string>());
    return f;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Io, "malformed fixture " + path.string() + ": " + ex.what());
  }
}

}  // namespace attrib
