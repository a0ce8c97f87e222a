#include "attrib/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <ostream>
#include <set>

#include "attrib/digest.hpp"
#include "attrib/error.hpp"
#include "attrib/image_io.hpp"

namespace attrib {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Advisory lock on the work directory for the duration of one subcommand.
class WorkLock {
 public:
  explicit WorkLock(const fs::path& dir) : path_(dir / ".attrib.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(ErrorCode::Io, "work directory is locked by another run: " + path_.string());
    std::fclose(f);
  }
  ~WorkLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkLock(const WorkLock&) = delete;
  WorkLock& operator=(const WorkLock&) = delete;

 private:
  fs::path path_;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "missing " + path.string() + " (run the earlier step)");
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(1) + "\n"); }

json rect_json(const TileRect& r) { return {{"row", r.row}, {"col", r.col}, {"x", r.x}, {"y", r.y}, {"size", r.size}}; }

TileRect rect_from_json(const json& j, const std::string& artwork_id) {
  return TileRect{artwork_id, j.at("row").get<int>(), j.at("col").get<int>(), j.at("x").get<int>(),
                  j.at("y").get<int>(), j.at("size").get<int>()};
}

std::vector<ArtworkRecord> manifest_records(const PipelineConfig& config) {
  if (config.manifest.empty()) throw Error(ErrorCode::InvalidArgument, "config has no manifest path");
  if (!fs::exists(config.manifest)) throw Error(ErrorCode::InvalidArgument, "manifest not found: " + config.manifest.string());
  return load_manifest(config.manifest, config.image_root);
}

const ArtworkRecord& find_record(const std::vector<ArtworkRecord>& records, const std::string& id) {
  for (const auto& r : records)
    if (r.artwork_id == id) return r;
  throw Error(ErrorCode::InvalidArgument, "artwork '" + id + "' is not in the manifest");
}

Image8 read_checked(const ArtworkRecord& rec) {
  Image8 img = read_image(rec.image_path);
  if (img.width() != rec.width_px || img.height() != rec.height_px)
    throw Error(ErrorCode::DimensionMismatch, rec.artwork_id + ": manifest dimensions differ from the image file");
  return img;
}

fs::path out_dir(const PipelineConfig& config, const RunOptions& opts) {
  return opts.out ? *opts.out : WorkDir{config.work_dir}.reports();
}

const std::string& require_artwork(const RunOptions& opts, const char* command) {
  if (!opts.artwork) throw Error(ErrorCode::InvalidArgument, std::string(command) + " needs --artwork <id>");
  return *opts.artwork;
}

double checked_threshold(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
  return tau;
}

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

Rgb rgb_from(const json& j, const Rgb& fallback) {
  if (j.is_null()) return fallback;
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, "colours are [r, g, b]");
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) throw Error(ErrorCode::InvalidArgument, "colour channels are 0..255");
    c[i] = static_cast<std::uint8_t>(v[i]);
  }
  return c;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  train.validate();
  overlay.validate();
  for (Split s : kSplits)
    if (!(ratios[s] > 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
  if (!(qc.min_px_per_mm > 0.0) || qc.glare_max < 0.0 || qc.noise_max < 0.0 ||
      !(qc.saturation_level > 0.0 && qc.saturation_level <= 1.0) || qc.max_edge_skew_deg < 0.0)
    throw Error(ErrorCode::InvalidArgument, "invalid QC thresholds");
  if (threshold) checked_threshold(*threshold);
  if (work_dir.empty()) throw Error(ErrorCode::InvalidArgument, "work_dir must be set");
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    static const std::set<std::string> kKeys{"manifest", "image_root", "work_dir", "qc",      "train",
                                             "train_seed", "split",    "overlay",  "threshold"};
    for (const auto& [key, _] : j.items())
      if (!kKeys.count(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");

    PipelineConfig c;
    c.manifest = resolve(base_dir, j.value("manifest", std::string{}));
    c.image_root = resolve(base_dir, j.value("image_root", std::string{}));
    c.work_dir = resolve(base_dir, j.value("work_dir", std::string{"work"}));
    if (j.contains("qc")) {
      const auto& q = j.at("qc");
      c.qc.min_px_per_mm = q.value("min_px_per_mm", c.qc.min_px_per_mm);
      c.qc.glare_max = q.value("glare_max", c.qc.glare_max);
      c.qc.noise_max = q.value("noise_max", c.qc.noise_max);
      c.qc.saturation_level = q.value("saturation_level", c.qc.saturation_level);
      c.qc.max_edge_skew_deg = q.value("max_edge_skew_deg", c.qc.max_edge_skew_deg);
    }
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    c.train_seed = j.value("train_seed", c.train_seed);
    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (s.contains("ratios")) {
        const auto r = s.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw Error(ErrorCode::InvalidArgument, "split.ratios needs three values");
        c.ratios = SplitRatios{r[0], r[1], r[2]};
      }
      c.split_seed = s.value("seed", c.split_seed);
    }
    if (j.contains("overlay")) {
      const auto& o = j.at("overlay");
      c.overlay.alpha_max = o.value("alpha_max", c.overlay.alpha_max);
      c.overlay.variance_full_scale = o.value("variance_full_scale", c.overlay.variance_full_scale);
      c.overlay.outline_width = o.value("outline_width", c.overlay.outline_width);
      c.overlay.disagreement_color = rgb_from(o.value("disagreement_color", json()), c.overlay.disagreement_color);
      c.overlay.above_color = rgb_from(o.value("above_color", json()), c.overlay.above_color);
      c.overlay.below_color = rgb_from(o.value("below_color", json()), c.overlay.below_color);
      c.overlay.outline_color = rgb_from(o.value("outline_color", json()), c.overlay.outline_color);
    }
    if (j.contains("threshold") && !j.at("threshold").is_null()) c.threshold = j.at("threshold").get<double>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& c) {
  return {{"manifest", c.manifest.string()},
          {"image_root", c.image_root.string()},
          {"work_dir", c.work_dir.string()},
          {"qc",
           {{"min_px_per_mm", c.qc.min_px_per_mm},
            {"glare_max", c.qc.glare_max},
            {"noise_max", c.qc.noise_max},
            {"saturation_level", c.qc.saturation_level},
            {"max_edge_skew_deg", c.qc.max_edge_skew_deg}}},
          {"train", c.train},
          {"train_seed", c.train_seed},
          {"split", {{"ratios", {c.ratios.train, c.ratios.val, c.ratios.test}}, {"seed", c.split_seed}}},
          {"overlay",
           {{"alpha_max", c.overlay.alpha_max},
            {"variance_full_scale", c.overlay.variance_full_scale},
            {"outline_width", c.overlay.outline_width},
            {"disagreement_color", rgb_json(c.overlay.disagreement_color)},
            {"above_color", rgb_json(c.overlay.above_color)},
            {"below_color", rgb_json(c.overlay.below_color)},
            {"outline_color", rgb_json(c.overlay.outline_color)}}},
          {"threshold", c.threshold ? json(*c.threshold) : json(nullptr)}};
}

std::string config_reference() {
  PipelineConfig defaults;
  defaults.manifest = "manifest.csv";
  return "Config file (JSON); paths are relative to the config file. Defaults:\n" + to_json(defaults).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Report

std::string tile_id(const TileRect& rect) { return "r" + std::to_string(rect.row) + "_c" + std::to_string(rect.col); }

bool operator==(const AnalysisReport& a, const AnalysisReport& b) {
  if (a.tiles.size() != b.tiles.size()) return false;
  for (size_t i = 0; i < a.tiles.size(); ++i) {
    const auto& x = a.tiles[i];
    const auto& y = b.tiles[i];
    if (!(x.rect == y.rect) || x.member_probs != y.member_probs || x.mean != y.mean || x.variance != y.variance ||
        x.above_threshold != y.above_threshold)
      return false;
  }
  return a.artwork_id == b.artwork_id && a.decision == b.decision && a.image_prob == b.image_prob &&
         a.threshold == b.threshold && a.tiles_total == b.tiles_total && a.tiles_positive == b.tiles_positive &&
         a.highest_tile == b.highest_tile && a.lowest_tile == b.lowest_tile &&
         a.pipeline_version == b.pipeline_version && a.ensemble_digest == b.ensemble_digest &&
         a.generated_at == b.generated_at;
}

AnalysisReport make_report(const ImageVerdict& verdict, double threshold, const std::string& ensemble_digest,
                           std::string generated_at) {
  AnalysisReport r;
  r.artwork_id = verdict.artwork_id;
  r.decision = verdict.decision;
  r.image_prob = verdict.image_prob;
  r.threshold = threshold;
  r.tiles_total = verdict.tiles_total;
  r.tiles_positive = verdict.tiles_positive;
  r.tiles = verdict.tiles;
  const ExtremeTiles e = find_extremes(verdict.tiles);
  r.highest_tile = tile_id(verdict.tiles[e.highest].rect);
  r.lowest_tile = tile_id(verdict.tiles[e.lowest].rect);
  r.ensemble_digest = ensemble_digest;
  r.generated_at = std::move(generated_at);
  return r;
}

json to_json(const AnalysisReport& r) {
  json tiles = json::array();
  for (const auto& t : r.tiles)
    tiles.push_back({{"rect", rect_json(t.rect)},
                     {"member_probs", t.member_probs},
                     {"mean", t.mean},
                     {"variance", t.variance},
                     {"above_threshold", t.above_threshold}});
  return {{"artwork_id", r.artwork_id},
          {"decision", to_string(r.decision)},
          {"image_prob", r.image_prob},
          {"threshold", r.threshold},
          {"tiles_total", r.tiles_total},
          {"tiles_positive", r.tiles_positive},
          {"tiles", tiles},
          {"extreme_tiles", {{"highest", r.highest_tile}, {"lowest", r.lowest_tile}}},
          {"pipeline_version", r.pipeline_version},
          {"ensemble_digest", r.ensemble_digest},
          {"generated_at", r.generated_at}};
}

AnalysisReport report_from_json(const json& j) {
  try {
    AnalysisReport r;
    r.artwork_id = j.at("artwork_id").get<std::string>();
    r.decision = parse_decision(j.at("decision").get<std::string>());
    r.image_prob = j.at("image_prob").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.tiles_total = j.at("tiles_total").get<int>();
    r.tiles_positive = j.at("tiles_positive").get<int>();
    for (const auto& t : j.at("tiles")) {
      EnsemblePrediction p;
      p.rect = rect_from_json(t.at("rect"), r.artwork_id);
      const auto probs = t.at("member_probs").get<std::vector<double>>();
      if (probs.size() != kEnsembleSize) throw Error(ErrorCode::Io, "member_probs must have 5 entries");
      std::copy(probs.begin(), probs.end(), p.member_probs.begin());
      p.mean = t.at("mean").get<double>();
      p.variance = t.at("variance").get<double>();
      p.above_threshold = t.at("above_threshold").get<bool>();
      r.tiles.push_back(p);
    }
    r.highest_tile = j.at("extreme_tiles").at("highest").get<std::string>();
    r.lowest_tile = j.at("extreme_tiles").at("lowest").get<std::string>();
    r.pipeline_version = j.at("pipeline_version").get<std::string>();
    r.ensemble_digest = j.at("ensemble_digest").get<std::string>();
    r.generated_at = j.at("generated_at").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Work-directory artefacts

json split_to_json(const SplitAssignment& split, std::uint64_t seed, const SplitRatios& ratios) {
  json assignment = json::object();
  for (const auto& [id, s] : split.assignment) assignment[id] = to_string(s);
  json summary = json::object();
  json excess = json::object();
  for (Split s : kSplits) {
    const int i = static_cast<int>(s);
    summary[std::string(to_string(s))] = {
        {"works", {{"negative", split.works[i][0]}, {"positive", split.works[i][1]}, {"all", split.works_in(s)}}},
        {"tiles",
         {{"negative", split.tiles[i][0]}, {"positive", split.tiles[i][1]}, {"all", split.tiles[i][0] + split.tiles[i][1]}}}};
    excess[std::string(to_string(s))] = split.balance_excess(s);
  }
  return {{"seed", seed},
          {"ratios", {ratios.train, ratios.val, ratios.test}},
          {"assignment", assignment},
          {"summary", summary},
          {"balance",
           {{"max_artwork_tiles", split.max_artwork_tiles},
            {"excess", excess},
            {"within_bound", split.within_balance_bound()}}}};
}

std::vector<TileSample> load_split_tiles(const WorkDir& work, Split split) {
  const json index = read_json(work.tile_index());
  std::vector<TileSample> tiles;
  for (const auto& [id, entry] : index.at("artworks").items()) {
    if (parse_split(entry.at("split").get<std::string>()) != split) continue;
    const Label label = parse_label(entry.at("label").get<std::string>());
    for (const auto& r : entry.at("rects")) {
      const TileRect rect = rect_from_json(r, id);
      Image8 px = read_image(work.root / tile_store_path(split, label, rect));
      if (px.width() != rect.size || px.height() != rect.size)
        throw Error(ErrorCode::BadTileShape, "stored tile has the wrong size: " + tile_id(rect));
      tiles.push_back(TileSample{rect, label, std::move(px)});
    }
  }
  return tiles;
}

// ---------------------------------------------------------------------------
// Subcommands

void run_ingest(const PipelineConfig& config, const RunOptions&, std::ostream& log) {
  const auto records = manifest_records(config);
  WorkLock lock(config.work_dir);
  json out = json::array();
  std::array<std::array<int, 2>, 2> counts{};
  for (const auto& r : records) {
    ++counts[int(r.certainty)][int(r.label)];
    out.push_back({{"artwork_id", r.artwork_id},
                   {"title", r.title},
                   {"label", to_string(r.label)},
                   {"certainty", to_string(r.certainty)},
                   {"image_path", r.image_path.string()},
                   {"px_per_mm", r.px_per_mm},
                   {"width_px", r.width_px},
                   {"height_px", r.height_px},
                   {"tiles", r.width_px >= kTileSize && r.height_px >= kTileSize ? tile_count(r.width_px, r.height_px) : 0}});
  }
  write_json(WorkDir{config.work_dir}.artworks(), out);
  log << "ingested " << records.size() << " artworks: certainty-1 " << counts[0][1] << " positive / " << counts[0][0]
      << " negative, disputed " << counts[1][1] + counts[1][0] << "\n";
}

void run_qc(const PipelineConfig& config, const RunOptions&, std::ostream& log) {
  const auto records = manifest_records(config);
  WorkLock lock(config.work_dir);
  json reports = json::array();
  int passed = 0;
  for (const auto& r : records) {
    const QualityReport q = quality_check(r, read_image(r.image_path), config.qc);
    passed += q.passed;
    reports.push_back({{"artwork_id", q.artwork_id},
                       {"resolution_ok", q.resolution_ok},
                       {"glare_fraction", q.glare_fraction},
                       {"noise_score", q.noise_score},
                       {"distortion_flag", q.distortion_flag},
                       {"passed", q.passed}});
    if (!q.passed) log << "qc: " << r.artwork_id << " failed\n";
  }
  write_json(WorkDir{config.work_dir}.qc(), {{"reports", reports}});
  log << "qc: " << passed << "/" << records.size() << " artworks passed\n";
}

void run_split(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const auto records = manifest_records(config);
  const WorkDir work{config.work_dir};
  std::set<std::string> failed_qc;
  if (fs::exists(work.qc()))
    for (const auto& q : read_json(work.qc()).at("reports"))
      if (!q.at("passed").get<bool>()) failed_qc.insert(q.at("artwork_id").get<std::string>());

  std::vector<ArtworkRecord> eligible;
  std::map<std::string, long> counts;
  for (const auto& r : records) {
    if (r.certainty != Certainty::Certain1) continue;
    if (failed_qc.count(r.artwork_id) || r.width_px < kTileSize || r.height_px < kTileSize) {
      log << "split: excluding " << r.artwork_id << " (quality control)\n";
      continue;
    }
    eligible.push_back(r);
    counts[r.artwork_id] = tile_count(r.width_px, r.height_px);
  }
  const std::uint64_t seed = opts.seed.value_or(config.split_seed);
  const SplitAssignment split = split_corpus(eligible, counts, config.ratios, seed);

  WorkLock lock(config.work_dir);
  write_json(work.split(), split_to_json(split, seed, config.ratios));
  for (Split s : kSplits)
    log << to_string(s) << ": " << split.works_in(s) << " works (" << split.works[int(s)][0] << " negative, "
        << split.works[int(s)][1] << " positive), tiles " << split.tiles[int(s)][0] << " / " << split.tiles[int(s)][1]
        << "\n";
}

void run_tile(const PipelineConfig& config, const RunOptions&, std::ostream& log) {
  const auto records = manifest_records(config);
  const WorkDir work{config.work_dir};
  const json split = read_json(work.split());
  std::vector<std::pair<const ArtworkRecord*, Split>> todo;
  for (const auto& [id, s] : split.at("assignment").items())
    todo.emplace_back(&find_record(records, id), parse_split(s.get<std::string>()));

  WorkLock lock(config.work_dir);
  fs::remove_all(work.root / "tiles");
  json index = json::object();
  long written = 0;
  for (const auto& [rec, s] : todo) {
    const Image8 img = read_checked(*rec);
    const auto grid = tile_grid(img.width(), img.height(), rec->artwork_id);
    json rects = json::array();
    for (auto& sample : extract_tiles(img, grid, rec->label)) {
      write_image(work.root / tile_store_path(s, rec->label, sample.rect), sample.pixels);
      rects.push_back(rect_json(sample.rect));
      ++written;
    }
    index[rec->artwork_id] = {{"split", to_string(s)}, {"label", to_string(rec->label)}, {"rects", rects}};
  }
  write_json(work.tile_index(), {{"tile_size", kTileSize}, {"artworks", index}});
  log << "tile: wrote " << written << " tiles for " << todo.size() << " artworks\n";
}

void run_train(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const WorkDir work{config.work_dir};
  const auto tiles = load_split_tiles(work, Split::Train);
  if (tiles.empty()) throw Error(ErrorCode::EmptySplit, "the train split has no tiles");
  const std::uint64_t base_seed = opts.seed.value_or(config.train_seed);
  log << "train: " << tiles.size() << " tiles, 5 members x " << config.train.epochs << " epochs, seeds " << base_seed
      << ".." << base_seed + kEnsembleSize - 1 << "\n";

  Ensemble ensemble;
  ensemble.base_seed = base_seed;
  ensemble.members = train_ensemble(tiles, config.train, base_seed, [&](int member, int epoch, double loss) {
    if (epoch == 1 || epoch % 20 == 0 || epoch == config.train.epochs)
      log << "  member " << member << " epoch " << epoch << " loss " << loss << "\n";
  });
  WorkLock lock(config.work_dir);
  save_ensemble(work.ensemble(), ensemble);
  log << "train: saved ensemble to " << work.ensemble().string() << "\n";
}

void run_calibrate(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const WorkDir work{config.work_dir};
  Ensemble ensemble = load_ensemble(work.ensemble());
  const auto fixed = opts.threshold ? opts.threshold : config.threshold;
  if (fixed) {
    ensemble.threshold = checked_threshold(*fixed);
    ensemble.calibration = Calibration{*fixed, 0.0, {}};
    log << "calibrate: threshold fixed at " << *fixed << "\n";
  } else {
    const auto tiles = load_split_tiles(work, Split::Val);
    if (tiles.empty()) throw Error(ErrorCode::EmptySplit, "the validation split has no tiles");
    const Calibration cal = calibrate_threshold(ensemble, tiles);
    log << "calibrate: threshold " << ensemble.threshold << " (balanced accuracy " << cal.balanced_accuracy << " over "
        << tiles.size() << " validation tiles, " << cal.trace.size() << " candidates)\n";
  }
  WorkLock lock(config.work_dir);
  save_ensemble(work.ensemble(), ensemble);
}

void run_evaluate(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const WorkDir work{config.work_dir};
  Ensemble ensemble = load_ensemble(work.ensemble());
  if (opts.threshold) ensemble.threshold = checked_threshold(*opts.threshold);
  const auto tiles = load_split_tiles(work, Split::Test);
  const EvaluationReport report = evaluate(ensemble, tiles);
  std::vector<EnsemblePrediction> all;
  for (const auto& a : report.artworks) all.insert(all.end(), a.verdict.tiles.begin(), a.verdict.tiles.end());
  const AgreementStats agree = agreement_stats(all);

  json doc = to_json(report);
  doc["agreement"] = {{"mean_variance", agree.mean_variance},
                      {"unanimous_fraction", agree.unanimous_fraction},
                      {"variance_histogram", agree.variance_histogram}};
  WorkLock lock(config.work_dir);
  write_json(opts.out ? *opts.out / "evaluation.json" : work.evaluation(), doc);
  log << summary_table(report);
}

void run_analyze(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const std::string& id = require_artwork(opts, "analyze");
  const auto records = manifest_records(config);
  const ArtworkRecord& rec = find_record(records, id);
  const WorkDir work{config.work_dir};
  Ensemble ensemble = load_ensemble(work.ensemble());
  if (const auto fixed = opts.threshold ? opts.threshold : config.threshold) ensemble.threshold = checked_threshold(*fixed);

  const Image8 img = read_checked(rec);
  const auto grid = tile_grid(img.width(), img.height(), rec.artwork_id);
  std::vector<EnsemblePrediction> preds;
  for (const auto& t : extract_tiles(img, grid, rec.label)) preds.push_back(predict_tile(ensemble, t));
  const ImageVerdict verdict = aggregate_image(preds, ensemble.threshold);
  const AnalysisReport report =
      make_report(verdict, ensemble.threshold, sha256_file(work.ensemble() / "ensemble.json"), utc_timestamp());

  WorkLock lock(config.work_dir);
  const fs::path path = out_dir(config, opts) / (id + ".report.json");
  write_json(path, to_json(report));
  char line[200];
  std::snprintf(line, sizeof line, "%s: %s, image probability %.4f vs threshold %.4f, %d/%d tiles at or above\n",
                id.c_str(), std::string(to_string(report.decision)).c_str(), report.image_prob, report.threshold,
                report.tiles_positive, report.tiles_total);
  log << line;
}

void run_render(const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  const std::string& id = require_artwork(opts, "render");
  const fs::path dir = out_dir(config, opts);
  const AnalysisReport report = report_from_json(read_json(dir / (id + ".report.json")));
  const auto records = manifest_records(config);
  const Image8 img = read_checked(find_record(records, id));
  std::vector<TileRect> grid;
  for (const auto& t : report.tiles) grid.push_back(t.rect);

  OverlaySpec spec = config.overlay;
  Image8 uncertainty = annotate_extremes(render_uncertainty(img, grid, report.tiles, spec), grid, report.tiles, spec);
  Image8 confidence =
      annotate_extremes(render_confidence(img, grid, report.tiles, report.threshold, spec), grid, report.tiles, spec);

  WorkLock lock(config.work_dir);
  write_image(dir / (id + ".uncertainty.png"), uncertainty);
  write_image(dir / (id + ".confidence.png"), confidence);
  log << "render: wrote " << (dir / (id + ".uncertainty.png")).string() << " and "
      << (dir / (id + ".confidence.png")).string() << "\n";
}

void run_subcommand(const std::string& name, const PipelineConfig& config, const RunOptions& opts, std::ostream& log) {
  using Fn = void (*)(const PipelineConfig&, const RunOptions&, std::ostream&);
  static const std::map<std::string, Fn> kCommands{
      {"ingest", run_ingest}, {"qc", run_qc},             {"split", run_split},
      {"tile", run_tile},     {"train", run_train},       {"calibrate", run_calibrate},
      {"evaluate", run_evaluate}, {"analyze", run_analyze}, {"render", run_render}};
  const auto it = kCommands.find(name);
  if (it == kCommands.end()) throw Error(ErrorCode::InvalidArgument, "unknown subcommand '" + name + "'");
  config.validate();
  if (opts.threshold) checked_threshold(*opts.threshold);
  it->second(config, opts, log);
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedManifest:
    case ErrorCode::DuplicateId:
    case ErrorCode::MissingImageFile:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ImageTooSmall:
    case ErrorCode::ClassMissing:
    case ErrorCode::TooFewWorks:
    case ErrorCode::SingleClassData:
    case ErrorCode::EmptySplit:
    case ErrorCode::InvalidArgument:
      return 2;
    default:
      return 3;
  }
}

}  // namespace attrib
