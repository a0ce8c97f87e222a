#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attrib/classifier.hpp"
#include "attrib/corpus.hpp"
#include "attrib/error.hpp"
#include "attrib/ensemble.hpp"
#include "attrib/metrics.hpp"
#include "attrib/overlay.hpp"

namespace attrib {

inline constexpr const char* kPipelineVersion = "attrib 1.0.0";

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path image_root;  ///< empty: resolve images against the manifest's directory
  std::filesystem::path work_dir = "work";
  QcConfig qc;
  TrainConfig train;
  std::uint64_t train_seed = 42;
  SplitRatios ratios;
  std::uint64_t split_seed = 0;
  OverlaySpec overlay;
  std::optional<double> threshold;

  /// Value checks only; paths are checked by the subcommands that need them.
  void validate() const;
};

/// Relative paths in the file resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const PipelineConfig& config);

/// Every config key with its default, for `--help`.
std::string config_reference();

struct AnalysisReport {
  std::string artwork_id;
  Decision decision = Decision::Inconsistent;
  double image_prob = 0.0;
  double threshold = 0.5;
  int tiles_total = 0;
  int tiles_positive = 0;
  std::vector<EnsemblePrediction> tiles;
  std::string highest_tile;  ///< "r<row>_c<col>"
  std::string lowest_tile;
  std::string pipeline_version = kPipelineVersion;
  std::string ensemble_digest;
  std::string generated_at;  ///< the only field that differs between identical runs

  friend bool operator==(const AnalysisReport&, const AnalysisReport&);
};

std::string tile_id(const TileRect& rect);

AnalysisReport make_report(const ImageVerdict& verdict, double threshold, const std::string& ensemble_digest,
                           std::string generated_at);
nlohmann::json to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const nlohmann::json& j);

/// Per-invocation overrides from the command line.
struct RunOptions {
  std::optional<std::string> artwork;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::filesystem::path> out;
};

/// Work-directory layout shared by the subcommands.
struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path artworks() const { return root / "artworks.json"; }
  std::filesystem::path qc() const { return root / "qc.json"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path tile_index() const { return root / "tiles" / "index.json"; }
  std::filesystem::path ensemble() const { return root / "ensemble"; }
  std::filesystem::path evaluation() const { return root / "evaluation.json"; }
  std::filesystem::path reports() const { return root / "reports"; }
};

nlohmann::json split_to_json(const SplitAssignment& split, std::uint64_t seed, const SplitRatios& ratios);

/// Tiles of one split as recorded in the tile store.
std::vector<TileSample> load_split_tiles(const WorkDir& work, Split split);

/// Subcommands. Each validates its inputs before writing anything and returns
/// normally on success; failures surface as `attrib::Error`.
void run_ingest(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_qc(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_split(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_tile(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_train(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_calibrate(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_evaluate(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_analyze(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);
void run_render(const PipelineConfig& config, const RunOptions& opts, std::ostream& log);

/// Dispatches by name; unknown names raise InvalidArgument.
void run_subcommand(const std::string& name, const PipelineConfig& config, const RunOptions& opts, std::ostream& log);

/// Exit status for a failure: 2 for validation errors, 3 for runtime failures.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace attrib
