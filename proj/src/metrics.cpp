#include "attrib/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "attrib/error.hpp"

namespace attrib {

void Confusion::add(bool predicted_positive, bool actually_positive) {
  if (predicted_positive) {
    (actually_positive ? tp : fp) += 1;
  } else {
    (actually_positive ? fn : tn) += 1;
  }
}

EvaluationReport evaluate(std::span<const LabeledImage> images, double tau, Boundary boundary) {
  if (images.empty()) throw Error(ErrorCode::EmptySplit, "nothing to evaluate");
  EvaluationReport r;
  r.threshold = tau;
  double variance_sum = 0.0;
  long majority_correct = 0;
  for (const auto& img : images) {
    if (img.tiles.empty()) throw Error(ErrorCode::EmptySplit, "artwork without tiles");
    const bool positive = img.label == Label::Positive;
    for (const auto& t : img.tiles) {
      r.tile.add(at_or_above(t.mean, tau, boundary), positive);
      variance_sum += t.variance;
    }
    ArtworkResult res;
    res.verdict = aggregate_image(img.tiles, tau, boundary);
    res.label = img.label;
    const bool predicted = res.verdict.decision == Decision::ConsistentWithArtist;
    res.correct = predicted == positive;
    res.tile_majority_positive = 2 * res.verdict.tiles_positive > res.verdict.tiles_total;
    majority_correct += res.tile_majority_positive == positive;
    r.image.add(predicted, positive);
    r.artworks.push_back(std::move(res));
  }
  r.tile_accuracy = r.tile.accuracy();
  r.image_accuracy = r.image.accuracy();
  r.tile_majority_accuracy = static_cast<double>(majority_correct) / static_cast<double>(images.size());
  r.mean_variance = variance_sum / static_cast<double>(r.tile.total());
  return r;
}

EvaluationReport evaluate(const Ensemble& ensemble, std::span<const TileSample> tiles) {
  if (tiles.empty()) throw Error(ErrorCode::EmptySplit, "nothing to evaluate");
  std::map<std::string, LabeledImage> grouped;
  for (const auto& t : tiles) {
    auto& img = grouped[t.rect.artwork_id];
    img.label = t.label;
    img.tiles.push_back(predict_tile(ensemble, t));
  }
  std::vector<LabeledImage> images;
  images.reserve(grouped.size());
  for (auto& [id, img] : grouped) images.push_back(std::move(img));
  return evaluate(images, ensemble.threshold);
}

AgreementStats agreement_stats(std::span<const EnsemblePrediction> predictions) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
  AgreementStats s;
  long unanimous = 0;
  double sum = 0.0;
  for (const auto& p : predictions) {
    sum += p.variance;
    unanimous += p.variance == 0.0;
    const int bin = std::clamp(static_cast<int>(p.variance / (kMaxVariance / kVarianceBins)), 0, kVarianceBins - 1);
    ++s.variance_histogram[bin];
  }
  const double n = static_cast<double>(predictions.size());
  s.mean_variance = sum / n;
  s.unanimous_fraction = static_cast<double>(unanimous) / n;
  return s;
}

namespace {

nlohmann::json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"accuracy", c.accuracy()}};
}

}  // namespace

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json artworks = nlohmann::json::array();
  for (const auto& a : report.artworks)
    artworks.push_back({{"artwork_id", a.verdict.artwork_id},
                        {"label", to_string(a.label)},
                        {"image_prob", a.verdict.image_prob},
                        {"tiles_total", a.verdict.tiles_total},
                        {"tiles_positive", a.verdict.tiles_positive},
                        {"decision", to_string(a.verdict.decision)},
                        {"correct", a.correct},
                        {"tile_majority_positive", a.tile_majority_positive}});
  return {{"threshold", report.threshold},
          {"tile_accuracy", report.tile_accuracy},
          {"image_accuracy", report.image_accuracy},
          {"tile_majority_accuracy", report.tile_majority_accuracy},
          {"tile_confusion", confusion_json(report.tile)},
          {"image_confusion", confusion_json(report.image)},
          {"mean_variance", report.mean_variance},
          {"artworks", artworks}};
}

std::string summary_table(const EvaluationReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %9s %6s %6s %6s %6s\n", "level", "accuracy", "TP", "FP", "TN", "FN");
  out << line;
  for (const auto& [name, c] : {std::pair{"tile", report.tile}, std::pair{"image", report.image}}) {
    std::snprintf(line, sizeof line, "%-8s %9.4f %6ld %6ld %6ld %6ld\n", name, c.accuracy(), c.tp, c.fp, c.tn, c.fn);
    out << line;
  }
  std::snprintf(line, sizeof line, "threshold %.4f  tile-majority accuracy %.4f  mean variance %.5f\n",
                report.threshold, report.tile_majority_accuracy, report.mean_variance);
  out << line;
  return out.str();
}

}  // namespace attrib
