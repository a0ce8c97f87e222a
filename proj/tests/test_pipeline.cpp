#include <doctest.h>

#include <sstream>
#include <sys/wait.h>

#include "attrib/digest.hpp"
#include "attrib/error.hpp"
#include "attrib/image_io.hpp"
#include "attrib/pipeline.hpp"
#include "support.hpp"

using namespace attrib;
using attrib::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A small corpus on disk: four works per class (600x560, four tiles each) plus one disputed work.
struct MiniCorpus {
  TempDir dir{"pipeline"};
  fs::path config;

  explicit MiniCorpus(const json& overrides = json::object()) {
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "artwork_id,title,label,certainty,image_path,px_per_mm\n";
    for (int i = 0; i < 8; ++i) {
      const Label label = i % 2 ? Label::Positive : Label::Negative;
      const std::string id = (label == Label::Positive ? "P" : "N") + std::to_string(i);
      write_image(dir / "images" / (id + ".png"), attrib::testing::texture(label, 600, 560, 100 + i));
      manifest << id << ",work " << id << "," << to_string(label) << ",1,images/" << id << ".png,5\n";
    }
    write_image(dir / "images" / "D.png", attrib::testing::oriented_strokes(700, 520, 99));
    manifest << "D,disputed work,positive,disputed,images/D.png,5\n";
    manifest.close();

    json cfg{{"manifest", "manifest.csv"},
             {"work_dir", "work"},
             {"train", {{"epochs", 3}, {"batch_size", 8}}},
             {"split", {{"ratios", {0.5, 0.25, 0.25}}, {"seed", 3}}}};
    cfg.merge_patch(overrides);
    config = dir / "config.json";
    write_text_file(config, cfg.dump(2));
  }

  fs::path work() const { return dir / "work"; }
};

void run(const std::string& name, const PipelineConfig& config, const RunOptions& opts = {}) {
  std::ostringstream log;
  run_subcommand(name, config, opts, log);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ATTRIB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json without_timestamp(const fs::path& report) {
  json j = json::parse(attrib::testing::slurp(report));
  j.erase("generated_at");
  return j;
}

TileClassifier constant_member(double logit) {
  Mlp<double> net(kFeatureDim, 4);
  net.b2 = logit;
  return TileClassifier::from_parameters(FeatureVector::Zero(), FeatureVector::Ones(), net);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults, round trip and validation") {
    MiniCorpus corpus;
    const PipelineConfig c = load_config(corpus.config);
    CHECK(c.train.epochs == 3);
    CHECK(c.ratios.val == 0.25);
    CHECK(c.manifest == corpus.dir / "manifest.csv");
    CHECK(c.train_seed == 42);
    const PipelineConfig again = config_from_json(to_json(c), "/");
    CHECK(again.train == c.train);
    CHECK(again.work_dir == c.work_dir);

    CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}, "/"), Error);
    CHECK_THROWS_AS(config_from_json(json{{"split", {{"ratios", {0.5, 0.3, 0.3}}}}}, "/"), Error);
    CHECK_THROWS_AS(config_from_json(json{{"threshold", 1.5}}, "/"), Error);
    CHECK(config_reference().find("alpha_max") != std::string::npos);
  }
}

TEST_SUITE("report") {
  TEST_CASE("JSON round trip") {
    std::vector<EnsemblePrediction> preds;
    for (const auto& r : tile_grid(1100, 600, "W"))
      preds.push_back(fuse(r, {0.1 * r.col, 0.3, 0.7, 0.2, 0.9}, kReferenceThreshold));
    const auto verdict = aggregate_image(preds, kReferenceThreshold);
    const auto report = make_report(verdict, kReferenceThreshold, "abc", "2020-01-01T00:00:00Z");
    CHECK(report.highest_tile == "r0_c2");
    CHECK(report.lowest_tile == "r0_c0");
    const json j = to_json(report);
    CHECK(j.at("tiles")[0].at("member_probs").size() == 5);
    CHECK(j.at("tiles")[0].at("rect").at("size") == 512);
    CHECK(report_from_json(j) == report);
    CHECK(report_from_json(json::parse(j.dump())) == report);
    CHECK_THROWS_AS(report_from_json(json{{"artwork_id", "x"}}), Error);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("all subcommands end to end") {
    MiniCorpus corpus;
    const PipelineConfig config = load_config(corpus.config);
    for (const char* step : {"ingest", "qc", "split", "tile", "train", "calibrate", "evaluate"}) {
      CAPTURE(step);
      run(step, config);
    }
    const WorkDir work{corpus.work()};
    const json qc = json::parse(attrib::testing::slurp(work.qc()));
    for (const auto& r : qc.at("reports")) CHECK(r.at("passed").get<bool>());
    const json split = json::parse(attrib::testing::slurp(work.split()));
    CHECK(split.at("assignment").size() == 8);  // the disputed work is left out
    CHECK(split.at("assignment").count("D") == 0);
    for (const char* s : {"train", "val", "test"}) {
      CHECK(split.at("summary").at(s).at("works").at("negative").get<int>() >= 1);
      CHECK(split.at("summary").at(s).at("works").at("positive").get<int>() >= 1);
    }
    CHECK(load_split_tiles(work, Split::Train).size() == 16);
    CHECK(fs::exists(work.ensemble() / "ensemble.json"));
    CHECK(fs::exists(work.evaluation()));
    CHECK_FALSE(fs::exists(corpus.work() / ".attrib.lock"));

    RunOptions analyze;
    analyze.artwork = "D";
    run("analyze", config, analyze);
    const fs::path report = work.reports() / "D.report.json";
    REQUIRE(fs::exists(report));
    const std::string first = attrib::testing::slurp(report);
    run("analyze", config, analyze);
    CHECK(without_timestamp(report) == [&] {
      json j = json::parse(first);
      j.erase("generated_at");
      return j;
    }());
    const AnalysisReport parsed = report_from_json(json::parse(first));
    CHECK(parsed.tiles_total == 4);
    CHECK(parsed.ensemble_digest == sha256_file(work.ensemble() / "ensemble.json"));

    run("render", config, analyze);
    const Image8 u = read_image(work.reports() / "D.uncertainty.png");
    const Image8 c = read_image(work.reports() / "D.confidence.png");
    CHECK(u.width() == 700);
    CHECK(c.height() == 520);
  }

  TEST_CASE("analyze with unanimously positive members") {
    MiniCorpus corpus;
    const PipelineConfig config = load_config(corpus.config);
    Ensemble e;
    e.threshold = kReferenceThreshold;
    for (int i = 0; i < kEnsembleSize; ++i) e.members.push_back(constant_member(6.0));
    save_ensemble(WorkDir{corpus.work()}.ensemble(), e);
    RunOptions opts;
    opts.artwork = "P1";
    opts.out = corpus.dir / "out";
    run("analyze", config, opts);
    const AnalysisReport r = report_from_json(json::parse(attrib::testing::slurp(corpus.dir / "out" / "P1.report.json")));
    CHECK(r.decision == Decision::ConsistentWithArtist);
    CHECK(r.tiles_positive == r.tiles_total);
    CHECK(r.threshold == kReferenceThreshold);
  }

  TEST_CASE("lock file blocks a concurrent run") {
    MiniCorpus corpus;
    const PipelineConfig config = load_config(corpus.config);
    fs::create_directories(corpus.work());
    attrib::testing::touch(corpus.work() / ".attrib.lock");
    CHECK_THROWS_AS(run("ingest", config), Error);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    MiniCorpus corpus;
    const std::string cfg = " --config " + corpus.config.string();
    CHECK(cli("--help") == 0);
    CHECK(cli("") == 2);
    CHECK(cli("split") == 2);                                   // missing --config
    CHECK(cli("split --config /nonexistent.json") == 2);
    CHECK(cli("frobnicate" + cfg) == 2);
    CHECK(cli("analyze" + cfg) == 2);                           // needs --artwork
    CHECK(cli("split" + cfg + " --threshold 2") == 2);
    CHECK(cli("train" + cfg) == 2);                             // nothing tiled yet
    CHECK_FALSE(fs::exists(corpus.work() / "ensemble"));

    write_text_file(corpus.dir / "bad.json", R"({"split": {"ratios": [0.7, 0.2, 0.2]}, "manifest": "manifest.csv"})");
    CHECK(cli("split --config " + (corpus.dir / "bad.json").string()) == 2);
    CHECK_FALSE(fs::exists(corpus.work() / "split.json"));

    CHECK(cli("ingest" + cfg) == 0);
    CHECK(cli("split" + cfg) == 0);
    CHECK(fs::exists(corpus.work() / "split.json"));
    CHECK(cli("analyze" + cfg + " --artwork nobody") == 2);

    fs::create_directories(corpus.work() / "ensemble");
    write_text_file(corpus.work() / "ensemble" / "ensemble.json", "{ not json");
    CHECK(cli("calibrate" + cfg + " --threshold 0.6") == 3);
  }

  TEST_CASE("exit code mapping") {
    CHECK(exit_code_for(ErrorCode::DuplicateId) == 2);
    CHECK(exit_code_for(ErrorCode::ClassMissing) == 2);
    CHECK(exit_code_for(ErrorCode::Io) == 3);
    CHECK(exit_code_for(ErrorCode::NonFiniteLoss) == 3);
  }
}
