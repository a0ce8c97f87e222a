#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attrib/error.hpp"
#include "attrib/pipeline.hpp"

namespace {

const std::vector<std::pair<std::string, std::string>> kSubcommands = {
    {"ingest", "read the manifest and record every artwork"},
    {"qc", "resolution, glare, noise and frame-skew checks"},
    {"split", "assign whole artworks to train/val/test"},
    {"tile", "cut split artworks into 512x512 tiles"},
    {"train", "train the five ensemble members"},
    {"calibrate", "choose the decision threshold on validation tiles"},
    {"evaluate", "tile- and image-level accuracy on the test split"},
    {"analyze", "per-tile report for one artwork (--artwork)"},
    {"render", "uncertainty and confidence overlays for an analyzed artwork"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tile-level ensemble attribution of paintings"};
  app.footer(attrib::config_reference());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> artwork;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::string> out;

  for (const auto& [name, description] : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--artwork", artwork, "artwork id (analyze, render)");
    sub->add_option("--seed", seed, "override the seed of this stage");
    sub->add_option("--threshold", threshold, "decision threshold override")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--out", out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const attrib::PipelineConfig config = attrib::load_config(config_path);
    attrib::RunOptions opts;
    opts.artwork = artwork;
    opts.seed = seed;
    opts.threshold = threshold;
    if (out) opts.out = std::filesystem::path(*out);
    attrib::run_subcommand(name, config, opts, std::cout);
  } catch (const attrib::Error& e) {
    std::cerr << "attrib " << name << ": " << e.what() << "\n";
    return attrib::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "attrib " << name << ": " << e.what() << "\n";
    return 3;
  }
  return 0;
}
