#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "attrib/corpus.hpp"
#include "attrib/error.hpp"

namespace attrib {

namespace {

struct Work {
  std::string id;
  long tiles = 0;
};

// Largest-remainder apportionment; ties go to the earlier split.
std::array<int, 3> apportion(int total, const SplitRatios& ratios) {
  std::array<int, 3> out{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (Split s : kSplits) {
    const double exact = total * ratios[s];
    out[int(s)] = static_cast<int>(std::floor(exact + 1e-9));
    rem[int(s)] = exact - out[int(s)];
    assigned += out[int(s)];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b] + 1e-12; });
  for (int k = 0; assigned < total; k = (k + 1) % 3, ++assigned) ++out[order[k]];
  return out;
}

// Per-class work quotas whose column sums equal the split work counts. Every
// split with room for two works gets at least one work of each class when the
// class has works to spare; a single-work split necessarily holds one class.
std::array<std::array<int, 2>, 3> class_quotas(const std::array<int, 3>& per_split, const std::array<int, 2>& per_class,
                                                const SplitRatios& ratios) {
  const int major = per_class[1] >= per_class[0] ? 1 : 0;
  const int minor = 1 - major;
  std::array<std::array<int, 2>, 3> q{};
  const auto major_q = apportion(per_class[major], ratios);
  for (int s = 0; s < 3; ++s) {
    q[s][major] = major_q[s];
    q[s][minor] = per_split[s] - major_q[s];
  }
  // The two apportionments can round apart; trade works until no quota is negative.
  for (int s = 0; s < 3; ++s)
    while (q[s][minor] < 0) {
      int d = 0;
      while (q[d][minor] <= 0) ++d;
      ++q[s][minor];
      --q[s][major];
      --q[d][minor];
      ++q[d][major];
    }
  for (int cls : {minor, major}) {
    const int other = 1 - cls;
    for (int s = 0; s < 3; ++s) {
      while (q[s][cls] < 1 && per_split[s] >= 2) {
        int donor = -1;
        for (int d = 0; d < 3; ++d)
          if (d != s && q[d][cls] > 1 && q[s][other] > 1 && (donor < 0 || q[d][cls] > q[donor][cls])) donor = d;
        if (donor < 0) break;
        ++q[s][cls];
        --q[s][other];
        --q[donor][cls];
        ++q[donor][other];
      }
    }
  }
  return q;
}

// Places one class's works on splits with fixed work quotas, tracking tile targets.
std::vector<int> assign_class(const std::vector<Work>& works, const std::array<int, 3>& quota,
                              const std::array<double, 3>& target) {
  std::vector<int> where(works.size(), -1);
  std::array<double, 3> assigned{};
  std::array<int, 3> open = quota;
  for (size_t i = 0; i < works.size(); ++i) {
    int best = -1;
    double best_need = 0.0;
    for (int s = 0; s < 3; ++s) {
      if (open[s] == 0) continue;
      const double need = (target[s] - assigned[s]) / open[s];
      if (best < 0 || need > best_need + 1e-12) {
        best = s;
        best_need = need;
      }
    }
    where[i] = best;
    assigned[best] += static_cast<double>(works[i].tiles);
    --open[best];
  }

  const auto cost = [&](const std::array<double, 3>& a) {
    return std::abs(a[0] - target[0]) + std::abs(a[1] - target[1]) + std::abs(a[2] - target[2]);
  };
  bool improved = true;
  for (int pass = 0; improved && pass < 1000; ++pass) {
    improved = false;
    for (size_t a = 0; a < works.size(); ++a) {
      for (size_t b = a + 1; b < works.size(); ++b) {
        const int sa = where[a], sb = where[b];
        if (sa == sb || works[a].tiles == works[b].tiles) continue;
        const double delta = static_cast<double>(works[a].tiles - works[b].tiles);
        auto trial = assigned;
        trial[sa] -= delta;
        trial[sb] += delta;
        if (cost(trial) < cost(assigned) - 1e-9) {
          assigned = trial;
          std::swap(where[a], where[b]);
          improved = true;
        }
      }
    }
  }
  return where;
}

}  // namespace

double SplitAssignment::balance_excess(Split s) const {
  const double diff = static_cast<double>(tiles[int(s)][1] - tiles[int(s)][0]);
  const double wanted = tile_targets[int(s)][1] - tile_targets[int(s)][0];
  return std::abs(diff - wanted);
}

bool SplitAssignment::within_balance_bound() const {
  return std::all_of(kSplits.begin(), kSplits.end(), [&](Split s) {
    return balance_excess(s) <= static_cast<double>(max_artwork_tiles) + 1e-9;
  });
}

std::array<int, 3> split_work_counts(int total, const SplitRatios& ratios) { return apportion(total, ratios); }

SplitAssignment split_corpus(std::span<const ArtworkRecord> records, const std::map<std::string, long>& tile_counts,
                             const SplitRatios& ratios, std::uint64_t seed) {
  for (Split s : kSplits)
    if (!(ratios[s] > 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");

  std::array<std::vector<Work>, 2> by_class;
  for (const auto& rec : records) {
    if (rec.certainty != Certainty::Certain1) continue;
    const auto it = tile_counts.find(rec.artwork_id);
    if (it == tile_counts.end() || it->second <= 0)
      throw Error(ErrorCode::InvalidArgument, "no positive tile count for " + rec.artwork_id);
    by_class[int(rec.label)].push_back(Work{rec.artwork_id, it->second});
  }
  for (int c = 0; c < 2; ++c)
    if (by_class[c].empty())
      throw Error(ErrorCode::ClassMissing, std::string("no eligible ") + std::string(to_string(Label(c))) + " works");

  const std::array<int, 2> per_class{static_cast<int>(by_class[0].size()), static_cast<int>(by_class[1].size())};
  const auto per_split = apportion(per_class[0] + per_class[1], ratios);
  for (int s = 0; s < 3; ++s)
    if (per_split[s] < 1) throw Error(ErrorCode::TooFewWorks, std::string(to_string(Split(s))) + " split would be empty");
  const auto quota = class_quotas(per_split, per_class, ratios);

  SplitAssignment out;
  std::array<long, 2> class_tiles{};
  for (int c = 0; c < 2; ++c)
    for (const auto& w : by_class[c]) {
      class_tiles[c] += w.tiles;
      out.max_artwork_tiles = std::max(out.max_artwork_tiles, w.tiles);
    }
  // Validation and test aim for equal tile counts per class; train takes the rest.
  const double shared = static_cast<double>(std::min(class_tiles[0], class_tiles[1]));
  for (int c = 0; c < 2; ++c) {
    out.tile_targets[1][c] = ratios.val * shared;
    out.tile_targets[2][c] = ratios.test * shared;
    out.tile_targets[0][c] = static_cast<double>(class_tiles[c]) - out.tile_targets[1][c] - out.tile_targets[2][c];
  }

  for (int c = 0; c < 2; ++c) {
    auto works = by_class[c];
    std::sort(works.begin(), works.end(), [](const Work& a, const Work& b) { return a.id < b.id; });
    std::mt19937_64 rng(seed * 2 + static_cast<std::uint64_t>(c));
    std::shuffle(works.begin(), works.end(), rng);
    std::stable_sort(works.begin(), works.end(), [](const Work& a, const Work& b) { return a.tiles > b.tiles; });

    const std::array<int, 3> q{quota[0][c], quota[1][c], quota[2][c]};
    const std::array<double, 3> t{out.tile_targets[0][c], out.tile_targets[1][c], out.tile_targets[2][c]};
    const auto where = assign_class(works, q, t);
    for (size_t i = 0; i < works.size(); ++i) {
      out.assignment[works[i].id] = Split(where[i]);
      ++out.works[where[i]][c];
      out.tiles[where[i]][c] += works[i].tiles;
    }
  }
  return out;
}

}  // namespace attrib
