#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "attrib/ensemble.hpp"
#include "attrib/error.hpp"
#include "support.hpp"

using namespace attrib;

namespace {

const TileRect kRect{"A", 0, 0, 0, 0};

EnsemblePrediction with_mean(double m, const std::string& id = "A") {
  return fuse(TileRect{id, 0, 0, 0, 0}, MemberProbs{m, m, m, m, m}, 0.5);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an attrib::Error");
  return ErrorCode::Io;
}

// Balanced accuracy straight from its definition, for the sweep oracle.
double brute_balanced_accuracy(const std::vector<double>& p, const std::vector<Label>& y, double tau) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const bool pred = p[i] >= tau;
    if (y[i] == Label::Positive) (pred ? tp : fn) += 1;
    else (pred ? fp : tn) += 1;
  }
  return 0.5 * (tp / (tp + fn) + tn / (tn + fp));
}

}  // namespace

TEST_SUITE("fuse") {
  TEST_CASE("unanimous members") {
    const auto p = fuse(kRect, {0.6, 0.6, 0.6, 0.6, 0.6}, 0.5);
    CHECK(p.mean == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.variance == doctest::Approx(0.0));
  }

  TEST_CASE("(0,1,0,1,0) has mean 0.4 and variance 0.24") {
    const auto p = fuse(kRect, {0, 1, 0, 1, 0}, 0.5);
    CHECK(p.mean == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(p.variance == doctest::Approx(0.24).epsilon(1e-15));
    CHECK_FALSE(p.above_threshold);
  }

  TEST_CASE("0.61 is above the reference threshold; the threshold itself is inclusive") {
    CHECK(fuse(kRect, {0.61, 0.61, 0.61, 0.61, 0.61}, kReferenceThreshold).above_threshold);
    CHECK(at_or_above(kReferenceThreshold, kReferenceThreshold));
    CHECK_FALSE(at_or_above(kReferenceThreshold, kReferenceThreshold, Boundary::Exclusive));
    CHECK_FALSE(fuse(kRect, {0.60, 0.60, 0.60, 0.60, 0.60}, kReferenceThreshold).above_threshold);
  }

  TEST_CASE("mean and variance match brute force") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      MemberProbs p;
      for (auto& v : p) v = u(rng);
      long double m = 0;
      for (double v : p) m += v;
      m /= 5;
      long double var = 0;
      for (double v : p) var += (v - m) * (v - m);
      var /= 5;
      const auto f = fuse(kRect, p, 0.5);
      CHECK(std::abs(f.mean - static_cast<double>(m)) <= 1e-12);
      CHECK(std::abs(f.variance - static_cast<double>(var)) <= 1e-12);
    }
  }

  TEST_CASE("alternative fusion rules") {
    const MemberProbs p{0.1, 0.9, 0.7, 0.2, 0.8};
    CHECK(fuse(kRect, p, 0.5, Fusion::Median).mean == 0.7);
    CHECK(fuse(kRect, p, 0.5, Fusion::Vote).mean == doctest::Approx(0.6));
  }
}

TEST_SUITE("aggregate") {
  TEST_CASE("saturated tiles") {
    std::vector<EnsemblePrediction> tiles(7, with_mean(1.0));
    const auto v = aggregate_image(tiles, kReferenceThreshold);
    CHECK(v.image_prob == 1.0);
    CHECK(v.tiles_positive == 7);
    CHECK(v.decision == Decision::ConsistentWithArtist);
  }

  TEST_CASE("tile order does not change the verdict") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EnsemblePrediction> tiles;
    for (int i = 0; i < 50; ++i) tiles.push_back(with_mean(u(rng)));
    const auto ref = aggregate_image(tiles, 0.5);
    for (int k = 0; k < 20; ++k) {
      std::shuffle(tiles.begin(), tiles.end(), rng);
      const auto v = aggregate_image(tiles, 0.5);
      CHECK(v.image_prob == ref.image_prob);
      CHECK(v.tiles_positive == ref.tiles_positive);
    }
  }

  TEST_CASE("raising the threshold never adds positive tiles") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EnsemblePrediction> tiles;
    for (int i = 0; i < 40; ++i) tiles.push_back(with_mean(u(rng)));
    int prev = 41;
    for (double tau = 0.0; tau <= 1.0; tau += 0.01) {
      const int n = aggregate_image(tiles, tau).tiles_positive;
      CHECK(n <= prev);
      prev = n;
    }
  }

  TEST_CASE("errors") {
    CHECK(code_of([] { aggregate_image({}, 0.5); }) == ErrorCode::EmptyTileList);
    const std::vector<EnsemblePrediction> mixed{with_mean(0.2, "A"), with_mean(0.3, "B")};
    CHECK(code_of([&] { aggregate_image(mixed, 0.5); }) == ErrorCode::MixedArtworks);
  }

  TEST_CASE("fixtures reproduce their summaries") {
    for (const char* name : {"aurora", "samson", "charles", "head", "buckingham"}) {
      CAPTURE(name);
      const Fixture f = load_fixture(std::string(ATTRIB_FIXTURE_DIR) + "/" + name + "_tiles.json");
      CHECK(f.threshold == kReferenceThreshold);
      std::vector<EnsemblePrediction> preds;
      for (size_t i = 0; i < f.tiles.size(); ++i)
        preds.push_back(fuse(TileRect{f.artwork_id, 0, static_cast<int>(i), 0, 0}, f.tiles[i], f.threshold));
      const auto v = aggregate_image(preds, f.threshold);
      CHECK(std::abs(v.image_prob - f.expected_image_prob) <= 1e-4);
      CHECK(v.tiles_total == f.expected_tiles_total);
      CHECK(v.tiles_positive == f.expected_tiles_positive);
      CHECK(v.decision == f.expected_decision);
    }
  }
}

TEST_SUITE("calibration") {
  TEST_CASE("separable classes settle on 0.5") {
    const std::vector<double> p{0.9, 0.9, 0.9, 0.1, 0.1};
    const std::vector<Label> y{Label::Positive, Label::Positive, Label::Positive, Label::Negative, Label::Negative};
    const auto c = calibrate_threshold(p, y);
    CHECK(c.threshold == 0.5);
    CHECK(c.balanced_accuracy == 1.0);
  }

  TEST_CASE("five-point example") {
    const std::vector<double> p{0.7, 0.8, 0.4, 0.3, 0.6};
    const std::vector<Label> y{Label::Positive, Label::Positive, Label::Positive, Label::Negative, Label::Negative};
    const auto c = calibrate_threshold(p, y);
    CHECK(c.threshold == doctest::Approx(0.65));
    CHECK(c.balanced_accuracy == doctest::Approx(5.0 / 6.0));
  }

  TEST_CASE("equal balanced accuracies tie despite rounding") {
    // 2/3 is reached at 0.40 and at 0.64; the two floating-point sums differ in the last bit.
    const std::vector<double> p{0.80, 0.12, 0.32, 0.24, 1.0, 0.28, 0.84, 0.48, 0.20, 0.60, 0.68, 0.0};
    const std::vector<Label> y{Label::Positive, Label::Negative, Label::Negative, Label::Positive,
                               Label::Negative, Label::Negative, Label::Positive, Label::Positive,
                               Label::Negative, Label::Negative, Label::Positive, Label::Positive};
    const auto c = calibrate_threshold(p, y);
    CHECK(c.threshold == doctest::Approx(0.40));
    CHECK(c.balanced_accuracy == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("exhaustive sweep oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
      std::uniform_int_distribution<int> size(2, 12);
      std::uniform_int_distribution<int> grid(0, 20);
      const int n = size(rng);
      std::vector<double> p(n);
      std::vector<Label> y(n);
      for (int i = 0; i < n; ++i) {
        p[i] = grid(rng) / 20.0;  // coarse grid forces ties
        y[i] = i < 1 ? Label::Positive : i < 2 ? Label::Negative : Label(grid(rng) % 2);
      }
      // Every threshold on a grid finer than the data sees every attainable decision set.
      double best = -1.0;
      for (int k = 0; k <= 400; ++k) best = std::max(best, brute_balanced_accuracy(p, y, k / 400.0));
      std::vector<double> cand{0.0, 1.0};
      for (double a : p)
        for (double b : p)
          if (a < b && std::none_of(p.begin(), p.end(), [&](double v) { return v > a && v < b; }))
            cand.push_back((a + b) / 2);
      double want = -1.0;
      for (double t : cand) {
        if (std::abs(brute_balanced_accuracy(p, y, t) - best) > 1e-12) continue;
        if (want < 0 || std::abs(t - 0.5) < std::abs(want - 0.5) - 1e-15 ||
            (std::abs(std::abs(t - 0.5) - std::abs(want - 0.5)) <= 1e-15 && t < want))
          want = t;
      }
      const auto c = calibrate_threshold(p, y);
      CHECK(c.balanced_accuracy == doctest::Approx(best).epsilon(1e-12));
      CHECK(c.threshold == doctest::Approx(want).epsilon(1e-12));
    }
  }

  TEST_CASE("single-class validation data") {
    const std::vector<double> p{0.2, 0.8};
    const std::vector<Label> y{Label::Positive, Label::Positive};
    CHECK(code_of([&] { calibrate_threshold(p, y); }) == ErrorCode::ClassMissing);
  }
}

TEST_SUITE("ensemble") {
  TEST_CASE("members, seeds, persistence") {
    std::vector<TileSample> tiles;
    const Image8 pos = attrib::testing::oriented_strokes(kTileSize, kTileSize, 1);
    const Image8 neg = attrib::testing::isotropic_noise(kTileSize, kTileSize, 2);
    for (int i = 0; i < 4; ++i) {
      tiles.push_back({TileRect{"P", 0, i, 0, 0}, Label::Positive, pos});
      tiles.push_back({TileRect{"N", 0, i, 0, 0}, Label::Negative, neg});
    }
    TrainConfig config;
    config.epochs = 60;
    config.augment = AugmentParams::identity();

    Ensemble e;
    e.base_seed = 42;
    e.members = train_ensemble(tiles, config, 42);
    REQUIRE(e.members.size() == kEnsembleSize);
    for (int i = 0; i < kEnsembleSize; ++i) {
      CHECK(e.members[i].seed == 42u + i);
      int ok = 0;
      for (const auto& t : tiles) ok += (e.members[i].predict(t) >= 0.5) == (t.label == Label::Positive);
      CHECK(ok == static_cast<int>(tiles.size()));
    }
    const auto again = train_ensemble(tiles, config, 42);
    for (int i = 0; i < kEnsembleSize; ++i) CHECK(again[i].to_json() == e.members[i].to_json());

    const Calibration cal = calibrate_threshold(e, tiles);
    CHECK(cal.balanced_accuracy == 1.0);
    CHECK(e.threshold > 0.0);
    CHECK(e.threshold < 1.0);

    attrib::testing::TempDir dir("ens");
    save_ensemble(dir.path(), e);
    const Ensemble back = load_ensemble(dir.path());
    CHECK(back.threshold == e.threshold);
    CHECK(back.base_seed == 42);
    const auto a = predict_tile(e, tiles[0]);
    const auto b = predict_tile(back, tiles[0]);
    CHECK(a.member_probs == b.member_probs);
    CHECK(a.above_threshold);

    Ensemble short_one = e;
    short_one.members.pop_back();
    CHECK_THROWS_AS(short_one.validate(), Error);
  }
}
