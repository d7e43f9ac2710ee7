#pragma once

// Greedy construction of label contexts from co-occurrence statistics, with
// the uncovered-label repair pass.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "ctxsched/catalog.hpp"
#include "ctxsched/cooccurrence.hpp"
#include "ctxsched/random.hpp"

namespace ctxsched {

namespace detail {

/// Descending frame frequency, ties by ascending id.
inline std::vector<Label> by_frequency(const CooccurrenceMatrix& m, const LabelSet& labels) {
  std::vector<Label> order(labels.begin(), labels.end());
  std::stable_sort(order.begin(), order.end(), [&](Label a, Label b) { return m.count(a, a) > m.count(b, b); });
  return order;
}

inline InfeasibleError infeasible(const LabelSet& uncovered, std::size_t budget, std::size_t max_contexts) {
  return InfeasibleError("infeasible coverage with B=" + std::to_string(budget) +
                             ", M_max=" + std::to_string(max_contexts) +
                             "; uncovered labels: " + to_string(uncovered),
                         uncovered.values());
}

}  // namespace detail

/// Inserts each uncovered label into the context with free space whose members
/// it co-occurs with most (ties: smaller context, then lower id). Insertions
/// that would duplicate an existing context are skipped. With no space left a
/// new singleton context is opened while below M_max.
inline ContextCatalog repair_uncovered(const ContextCatalog& catalog, const LabelSet& uncovered,
                                       const CooccurrenceMatrix& matrix) {
  if (uncovered.empty()) return catalog;
  std::vector<Context> contexts = catalog.contexts();
  const std::size_t budget = catalog.budget();
  ContextId next_id = 0;
  for (const auto& c : contexts) next_id = std::max<ContextId>(next_id, c.id + 1);

  auto duplicates = [&](const LabelSet& s, std::size_t skip) {
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      if (i != skip && contexts[i].labels == s) return true;
    }
    return false;
  };

  std::vector<Label> failed;
  for (Label l : detail::by_frequency(matrix, uncovered)) {
    std::optional<std::size_t> best;
    std::uint64_t best_score = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      const auto& c = contexts[i];
      if (c.labels.size() >= budget || c.labels.contains(l)) continue;
      LabelSet grown = c.labels;
      grown.insert(l);
      if (duplicates(grown, i)) continue;
      std::uint64_t score = 0;
      for (Label m : c.labels) score += matrix.count(l, m);
      if (!best) {
        best = i;
        best_score = score;
        continue;
      }
      const auto& b = contexts[*best];
      if (score > best_score ||
          (score == best_score && (c.labels.size() < b.labels.size() ||
                                   (c.labels.size() == b.labels.size() && c.id < b.id)))) {
        best = i;
        best_score = score;
      }
    }
    if (best) {
      contexts[*best].labels.insert(l);
    } else if (contexts.size() < catalog.max_contexts()) {
      contexts.push_back(Context{next_id++, LabelSet{l}});
    } else {
      failed.push_back(l);
    }
  }
  if (!failed.empty()) {
    throw detail::infeasible(LabelSet(std::move(failed)), budget, catalog.max_contexts());
  }
  return ContextCatalog(std::move(contexts), budget, catalog.max_contexts(), catalog.variant());
}

struct BuildOptions {
  /// Shuffle seed; used by the basic variant only.
  std::uint64_t seed = 0;
};

/// Builds a catalog over `valid` labels with at most `budget` labels per
/// context and at most `max_contexts` contexts.
///
/// Greedy variants grow a cluster around every valid label, most frequent
/// first, by appending its strongest co-occurring neighbours up to the budget.
/// Clusters identical to an earlier one are dropped. The non-overlapping
/// variant skips seeds and neighbours that already belong to a context.
/// The basic variant shuffles the valid labels and chunks them.
inline ContextCatalog build_contexts(const CooccurrenceMatrix& matrix, const LabelSet& valid, std::size_t budget,
                                     std::size_t max_contexts, CatalogVariant variant,
                                     const BuildOptions& options = {}) {
  if (budget == 0) throw ValidationError("context budget B must be >= 1");
  if (max_contexts == 0) throw ValidationError("M_max must be >= 1");
  if (!valid.empty() && valid.back() >= matrix.label_count()) {
    throw ValidationError("valid label " + std::to_string(valid.back()) + " outside co-occurrence universe");
  }

  if (variant == CatalogVariant::basic) {
    std::vector<Label> labels(valid.begin(), valid.end());
    Rng rng(options.seed);
    rng.shuffle(labels);
    std::vector<Context> contexts;
    std::vector<Label> overflow;
    for (std::size_t start = 0; start < labels.size(); start += budget) {
      const auto stop = std::min(labels.size(), start + budget);
      if (contexts.size() == max_contexts) {
        overflow.insert(overflow.end(), labels.begin() + static_cast<std::ptrdiff_t>(start), labels.end());
        break;
      }
      contexts.push_back(Context{static_cast<ContextId>(contexts.size()),
                                 LabelSet(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                          labels.begin() + static_cast<std::ptrdiff_t>(stop))});
    }
    if (!overflow.empty()) throw detail::infeasible(LabelSet(std::move(overflow)), budget, max_contexts);
    return ContextCatalog(std::move(contexts), budget, max_contexts, variant);
  }

  const bool overlap = variant == CatalogVariant::greedy_overlap;
  std::vector<Context> contexts;
  LabelSet assigned;
  for (Label seed : detail::by_frequency(matrix, valid)) {
    if (!overlap && assigned.contains(seed)) continue;
    LabelSet cluster{seed};
    for (Label n : top_neighbors(matrix, seed, matrix.label_count())) {
      if (cluster.size() >= budget) break;
      if (!valid.contains(n)) continue;
      if (!overlap && assigned.contains(n)) continue;
      cluster.insert(n);
    }
    const bool unique = std::none_of(contexts.begin(), contexts.end(),
                                     [&](const Context& c) { return c.labels == cluster; });
    if (unique && contexts.size() < max_contexts) {
      if (!overlap) assigned = set_union(assigned, cluster);
      contexts.push_back(Context{static_cast<ContextId>(contexts.size()), std::move(cluster)});
    }
  }
  ContextCatalog catalog(std::move(contexts), budget, max_contexts, variant);
  return repair_uncovered(catalog, set_difference(valid, catalog.label_union()), matrix);
}

}  // namespace ctxsched
