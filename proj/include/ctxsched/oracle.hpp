#pragma once

// Exact selection on small instances: minimum per-frame covers and the
// temporally coupled objective  sum_t |S_t| + lambda * |S_t xor S_{t-1}|
// (S_0 compared to the empty set), solved by dynamic programming over
// context subsets.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctxsched/detector.hpp"
#include "ctxsched/stream.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

enum class OracleMode { per_frame, sequence };

struct OracleConfig {
  OracleMode mode = OracleMode::sequence;
  /// Largest |S_t| considered per frame in sequence mode.
  std::size_t s_max = 4;
  /// Largest catalog accepted by sequence mode.
  std::size_t subset_cap = 12;
  /// Weight of the switching term.
  double switch_weight = 1.0;
};

inline constexpr std::size_t kSequenceCapLimit = 20;

namespace detail {

/// Fixed-width bitset over the labels of one frame's demand.
class DemandMask {
 public:
  explicit DemandMask(std::size_t bits = 0) : words_((bits + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  void merge(const DemandMask& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
  }
  void unmerge(const std::vector<std::uint64_t>& saved) { words_ = saved; }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

 private:
  std::vector<std::uint64_t> words_;
};

struct CoverSearch {
  std::vector<ContextId> ids;          // candidate ids, ascending
  std::vector<DemandMask> serves;      // per candidate, over demand labels
  std::vector<std::size_t> last_server;  // per demand label: highest candidate index serving it
  std::size_t demand = 0;
  std::size_t max_gain = 0;
  std::vector<std::size_t> picked;

  bool dfs(std::size_t start, std::size_t left, DemandMask& covered) {
    const std::size_t have = covered.count();
    if (have == demand) return true;
    if (left == 0) return false;
    if (demand - have > left * max_gain) return false;
    for (std::size_t l = 0; l < demand; ++l) {
      if (!covered.test(l) && last_server[l] < start) return false;
    }
    for (std::size_t i = start; i < ids.size(); ++i) {
      const auto saved = covered.words();
      covered.merge(serves[i]);
      if (covered.count() == have) {
        covered.unmerge(saved);
        continue;
      }
      picked.push_back(i);
      if (dfs(i + 1, left - 1, covered)) return true;
      picked.pop_back();
      covered.unmerge(saved);
    }
    return false;
  }
};

}  // namespace detail

/// Smallest set of contexts serving every demand label at tau; among those of
/// minimum size, the lexicographically smallest id list. Uncoverable labels
/// raise under UncoverablePolicy::error and are dropped otherwise.
inline Detection per_frame_min_cover(const LabelSet& labels, const QualifiedCatalog& q,
                                     UncoverablePolicy policy = UncoverablePolicy::error) {
  auto dropped = q.uncoverable(labels);
  if (!dropped.empty() && policy == UncoverablePolicy::error) {
    throw InfeasibleError(detail::uncoverable_message(dropped, q.tau()), dropped.values());
  }
  const auto demand = set_difference(labels, dropped);
  if (demand.empty()) return {{}, dropped};

  const auto& dl = demand.values();
  std::vector<std::size_t> positions;
  for (Label l : dl) {
    for (auto p : q.servers(l)) positions.push_back(p);
  }
  std::sort(positions.begin(), positions.end(),
            [&](std::size_t a, std::size_t b) { return q.catalog()[a].id < q.catalog()[b].id; });
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

  detail::CoverSearch s;
  s.demand = dl.size();
  s.last_server.assign(dl.size(), 0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    detail::DemandMask m(dl.size());
    std::size_t gain = 0;
    for (std::size_t j = 0; j < dl.size(); ++j) {
      if (q.serves(positions[i]).contains(dl[j])) {
        m.set(j);
        s.last_server[j] = i;
        ++gain;
      }
    }
    s.ids.push_back(q.catalog()[positions[i]].id);
    s.serves.push_back(std::move(m));
    s.max_gain = std::max(s.max_gain, gain);
  }
  for (std::size_t k = 1; k <= dl.size(); ++k) {
    detail::DemandMask covered(dl.size());
    s.picked.clear();
    if (s.dfs(0, k, covered)) {
      std::vector<ContextId> out;
      for (auto i : s.picked) out.push_back(s.ids[i]);
      return {ContextSet(std::move(out)), dropped};
    }
  }
  // Unreachable: every demand label has a server, so |demand| contexts suffice.
  throw InfeasibleError("no cover found", demand.values());
}

inline Detection per_frame_min_cover(const LabelSet& labels, const ContextCatalog& catalog, const AccuracyTable& acc,
                                     double tau, UncoverablePolicy policy = UncoverablePolicy::error) {
  return per_frame_min_cover(labels, QualifiedCatalog(catalog, acc, tau), policy);
}

/// Per-frame minimum covers of the ground-truth stream.
inline SelectionTrace per_frame_oracle(const LabelStream& truth, const ContextCatalog& catalog,
                                       const AccuracyTable& acc, double tau,
                                       UncoverablePolicy policy = UncoverablePolicy::error) {
  const QualifiedCatalog q(catalog, acc, tau);
  SelectionTrace trace;
  trace.policy = "oracle_per_frame";
  trace.tau = tau;
  ContextSet prev;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    Detection d;
    try {
      d = per_frame_min_cover(truth.labels(t), q, policy);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("frame " + std::to_string(t) + ": " + e.what(), e.labels());
    }
    trace.records.push_back(
        TraceRecord{t, truth.labels(t), truth.labels(t), d.selected, d.selected != prev, d.dropped});
    prev = std::move(d.selected);
  }
  return trace;
}

struct SequenceResult {
  SelectionTrace trace;
  double objective = 0.0;
  /// Per-frame size cap that was in force; optimality holds within it.
  std::size_t s_max = 0;
  bool exact = false;
};

/// Minimises sum_t |S_t| + w * |S_t xor S_{t-1}| over feasible subsets with
/// |S_t| <= s_max, S_0 = {}. The min over predecessors is a weighted L1
/// distance transform on the subset hypercube, one pass per context bit.
inline SequenceResult sequence_oracle(const LabelStream& truth, const ContextCatalog& catalog,
                                      const AccuracyTable& acc, double tau, const OracleConfig& config = {}) {
  const std::size_t n = catalog.size();
  if (n > config.subset_cap) {
    throw ValidationError("catalog has " + std::to_string(n) + " contexts; sequence oracle cap is " +
                          std::to_string(config.subset_cap));
  }
  if (n > kSequenceCapLimit) throw ValidationError("sequence oracle supports at most 20 contexts");
  if (config.s_max == 0) throw ValidationError("s_max must be >= 1");
  if (!(config.switch_weight >= 0.0)) throw ValidationError("switch weight must be >= 0");

  const QualifiedCatalog q(catalog, acc, tau);
  const std::size_t states = std::size_t{1} << n;
  const double inf = std::numeric_limits<double>::infinity();
  const double w = config.switch_weight;

  std::vector<std::uint32_t> small;  // subsets with popcount <= s_max
  for (std::uint32_t m = 0; m < states; ++m) {
    if (static_cast<std::size_t>(std::popcount(m)) <= config.s_max) small.push_back(m);
  }

  std::vector<double> cost(states, inf);
  cost[0] = 0.0;  // virtual frame before the stream: nothing active
  std::vector<std::vector<std::uint32_t>> parent(truth.size(), std::vector<std::uint32_t>(states, 0));
  std::vector<double> dist(states);
  std::vector<std::uint32_t> src(states);

  for (std::size_t t = 0; t < truth.size(); ++t) {
    const auto& labels = truth.labels(t);
    auto missing = q.uncoverable(labels);
    if (!missing.empty()) {
      throw InfeasibleError("frame " + std::to_string(t) + ": labels " + to_string(missing) +
                                " cannot be covered at the accuracy threshold",
                            missing.values());
    }
    // Which positions serve each demand label.
    std::vector<std::uint32_t> need;
    for (Label l : labels) {
      std::uint32_t mask = 0;
      for (auto p : q.servers(l)) mask |= std::uint32_t{1} << p;
      need.push_back(mask);
    }

    for (std::size_t m = 0; m < states; ++m) {
      dist[m] = cost[m];
      src[m] = static_cast<std::uint32_t>(m);
    }
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t bit = std::size_t{1} << b;
      for (std::size_t m0 = 0; m0 < states; ++m0) {
        if (m0 & bit) continue;
        const std::size_t m1 = m0 | bit;
        const double d0 = dist[m0], d1 = dist[m1];
        const auto s0 = src[m0], s1 = src[m1];
        if (d1 + w < d0 || (d1 + w == d0 && s1 < s0)) {
          dist[m0] = d1 + w;
          src[m0] = s1;
        }
        if (d0 + w < d1 || (d0 + w == d1 && s0 < s1)) {
          dist[m1] = d0 + w;
          src[m1] = s0;
        }
      }
    }

    std::vector<double> next(states, inf);
    bool any = false;
    for (auto m : small) {
      bool feasible = true;
      for (auto mask : need) {
        if ((m & mask) == 0) {
          feasible = false;
          break;
        }
      }
      if (!feasible || dist[m] == inf) continue;
      next[m] = static_cast<double>(std::popcount(m)) + dist[m];
      parent[t][m] = src[m];
      any = true;
    }
    if (!any) {
      throw InfeasibleError("frame " + std::to_string(t) + ": no cover with at most " +
                                std::to_string(config.s_max) + " contexts",
                            labels.values());
    }
    cost.swap(next);
  }

  SequenceResult result;
  result.s_max = config.s_max;
  result.exact = config.s_max >= n;
  result.trace.policy = "oracle_sequence";
  result.trace.tau = tau;
  if (truth.empty()) return result;

  std::uint32_t best = 0;
  double best_cost = inf;
  for (std::uint32_t m = 0; m < states; ++m) {
    if (cost[m] < best_cost) {
      best_cost = cost[m];
      best = m;
    }
  }
  result.objective = best_cost;

  std::vector<std::uint32_t> masks(truth.size());
  masks.back() = best;
  for (std::size_t t = truth.size() - 1; t > 0; --t) masks[t - 1] = parent[t][masks[t]];

  ContextSet prev;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    std::vector<ContextId> ids;
    for (std::size_t p = 0; p < n; ++p) {
      if (masks[t] >> p & 1U) ids.push_back(catalog[p].id);
    }
    ContextSet s(std::move(ids));
    const bool changed = s != prev;
    result.trace.records.push_back(TraceRecord{t, truth.labels(t), truth.labels(t), s, changed, {}});
    prev = std::move(s);
  }
  return result;
}

}  // namespace ctxsched
