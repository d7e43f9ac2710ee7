#pragma once

// Random instance generators and brute-force reference solvers shared by the
// unit and acceptance tests. Nothing here calls the library's solvers.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ctxsched/ctxsched.hpp"

namespace testsupport {

using namespace ctxsched;

struct Instance {
  ContextCatalog catalog;
  AccuracyTable acc;
  double tau = 0.0;
  LabelStream stream;
};

/// Random catalog over [0, k) in which every label has at least one context
/// whose accuracy clears tau. Contexts are distinct.
inline Instance random_instance(Rng& rng, std::size_t max_k, std::size_t max_contexts, std::size_t max_t) {
  Instance in;
  const std::size_t k = 1 + rng.below(max_k);
  const std::size_t n = 1 + rng.below(max_contexts);
  in.tau = rng.bernoulli(0.5) ? 0.0 : 0.5;

  std::vector<LabelSet> sets;
  std::size_t guard = 0;
  while (sets.size() < n && guard++ < 200) {
    std::vector<Label> ls;
    for (Label l = 0; l < k; ++l) {
      if (rng.bernoulli(0.35)) ls.push_back(l);
    }
    if (ls.empty()) ls.push_back(static_cast<Label>(rng.below(k)));
    LabelSet s(ls);
    if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
  }
  std::vector<Context> contexts;
  for (std::size_t i = 0; i < sets.size(); ++i) contexts.push_back({static_cast<ContextId>(i), sets[i]});

  for (const auto& c : contexts) {
    for (Label l : c.labels) in.acc.set(c.id, l, rng.uniform());
  }
  // make every label that appears in some context coverable
  for (Label l = 0; l < k; ++l) {
    std::vector<ContextId> owners;
    for (const auto& c : contexts) {
      if (c.labels.contains(l)) owners.push_back(c.id);
    }
    if (owners.empty()) continue;
    const auto pick = owners[rng.below(owners.size())];
    in.acc.set(pick, l, 0.5 + 0.5 * rng.uniform());
  }

  LabelSet coverable;
  for (const auto& c : contexts) {
    for (Label l : c.labels) coverable.insert(l);
  }
  const std::size_t t_len = 1 + rng.below(max_t);
  std::vector<LabelSet> frames;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (t > 0 && rng.bernoulli(0.4)) {
      frames.push_back(frames.back());
      continue;
    }
    std::vector<Label> ls;
    for (Label l : coverable) {
      if (rng.bernoulli(0.3)) ls.push_back(l);
    }
    frames.push_back(LabelSet(ls));
  }
  in.catalog = ContextCatalog(std::move(contexts), k, sets.size(), CatalogVariant::greedy_overlap);
  in.stream = LabelStream::from_sets(k, frames);
  return in;
}

/// Contexts of `catalog` that serve label l at threshold tau.
inline bool serves(const ContextCatalog& catalog, const AccuracyTable& acc, double tau, std::size_t pos, Label l) {
  const auto& c = catalog[pos];
  if (!c.labels.contains(l)) return false;
  auto a = acc.get(c.id, l);
  return a && *a >= tau;
}

/// Does the subset (bitmask over catalog positions) serve every label?
inline bool mask_covers(const ContextCatalog& catalog, const AccuracyTable& acc, double tau, std::uint32_t mask,
                        const LabelSet& labels) {
  for (Label l : labels) {
    bool ok = false;
    for (std::size_t p = 0; p < catalog.size() && !ok; ++p) {
      if ((mask >> p) & 1u) ok = serves(catalog, acc, tau, p, l);
    }
    if (!ok) return false;
  }
  return true;
}

inline std::size_t popcount(std::uint32_t m) {
  std::size_t n = 0;
  for (; m; m &= m - 1) ++n;
  return n;
}

/// Smallest covering subset size by trying all 2^n masks; npos when none.
inline std::size_t brute_min_cover_size(const ContextCatalog& catalog, const AccuracyTable& acc, double tau,
                                        const LabelSet& labels) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::uint32_t m = 0; m < (1u << catalog.size()); ++m) {
    if (mask_covers(catalog, acc, tau, m, labels)) best = std::min(best, popcount(m));
  }
  return best;
}

/// Optimum of sum_t |S_t| + |S_t xor S_{t-1}| by enumerating every sequence of
/// feasible subsets (S_0 empty).
inline double brute_sequence_optimum(const ContextCatalog& catalog, const AccuracyTable& acc, double tau,
                                     const LabelStream& stream) {
  std::vector<std::vector<std::uint32_t>> feasible(stream.size());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    for (std::uint32_t m = 0; m < (1u << catalog.size()); ++m) {
      if (mask_covers(catalog, acc, tau, m, stream.labels(t))) feasible[t].push_back(m);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::uint32_t, double)> go = [&](std::size_t t, std::uint32_t prev, double cost) {
    if (t == stream.size()) {
      best = std::min(best, cost);
      return;
    }
    for (auto m : feasible[t]) go(t + 1, m, cost + static_cast<double>(popcount(m) + popcount(m ^ prev)));
  };
  go(0, 0, 0.0);
  return best;
}

/// Plain triple-loop product.
inline std::vector<double> naive_multiply(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                                          std::size_t k, std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t x = 0; x < k; ++x) s += a[i * k + x] * b[x * m + j];
      c[i * m + j] = s;
    }
  }
  return c;
}

/// Coverage re-scan: predicted labels that some context serves at tau must be
/// served by the selection. Returns the number of violations.
inline std::size_t rescan_coverage(const SelectionTrace& trace, const ContextCatalog& catalog,
                                   const AccuracyTable& acc, bool use_truth = false) {
  std::size_t bad = 0;
  for (const auto& r : trace.records) {
    const auto& demand = use_truth ? r.truth : r.predicted;
    for (Label l : demand) {
      bool coverable = false;
      for (std::size_t p = 0; p < catalog.size(); ++p) coverable = coverable || serves(catalog, acc, trace.tau, p, l);
      if (!coverable) continue;
      bool covered = false;
      for (ContextId id : r.selected) {
        covered = covered || serves(catalog, acc, trace.tau, *catalog.position_of(id), l);
      }
      if (!covered) ++bad;
    }
  }
  return bad;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ctxsched_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Planted-cluster stream used by the structural ordering checks.
inline SyntheticConfig planted_config(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.label_count = 40;
  cfg.frame_count = 600;
  cfg.clusters = consecutive_clusters(10, 4);
  cfg.mean_active_labels = 2.0;
  cfg.mean_dwell_frames = 10.0;
  cfg.in_cluster_presence = 0.5;
  cfg.seed = seed;
  return cfg;
}

inline std::size_t default_max_contexts(std::size_t valid, std::size_t budget, CatalogVariant v) {
  const std::size_t needed = std::max<std::size_t>(1, (valid + budget - 1) / budget);
  return v == CatalogVariant::greedy_overlap ? std::max<std::size_t>(needed, 50) : needed;
}

}  // namespace testsupport
