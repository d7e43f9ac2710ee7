#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "ctxsched/accuracy.hpp"
#include "ctxsched/catalog.hpp"
#include "ctxsched/cooccurrence.hpp"
#include "ctxsched/error.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

enum class CoherenceScale {
  /// co(i, j) as a fraction of frames.
  normalized,
  /// Raw pair counts.
  raw_count,
};

/// Mean over contexts of the mean ordered-pair co-occurrence inside each
/// context. Singleton contexts contribute 0.
inline double intra_coherence(const ContextCatalog& catalog, const CooccurrenceMatrix& matrix,
                              CoherenceScale scale = CoherenceScale::normalized) {
  if (catalog.empty()) throw ValidationError("intra-coherence of an empty catalog is undefined");
  double total = 0.0;
  for (const auto& c : catalog.contexts()) {
    const auto n = c.labels.size();
    if (n < 2) continue;
    double sum = 0.0;
    for (Label i : c.labels) {
      for (Label j : c.labels) {
        if (i == j) continue;
        sum += scale == CoherenceScale::normalized ? matrix.value(i, j) : static_cast<double>(matrix.count(i, j));
      }
    }
    total += sum / static_cast<double>(n * (n - 1));
  }
  return total / static_cast<double>(catalog.size());
}

/// Mean number of active contexts per frame.
inline double avg_coverage(const SelectionTrace& trace) {
  if (trace.empty()) throw ValidationError("average coverage of an empty trace is undefined");
  std::size_t sum = 0;
  for (const auto& r : trace.records) sum += r.selected.size();
  return static_cast<double>(sum) / static_cast<double>(trace.size());
}

/// Number of frames t >= 2 whose selection differs from frame t-1.
inline std::size_t switch_penalty(const SelectionTrace& trace) {
  std::size_t n = 0;
  for (std::size_t t = 1; t < trace.records.size(); ++t) {
    if (trace.records[t].selected != trace.records[t - 1].selected) ++n;
  }
  return n;
}

/// Sum over frames of |S_t xor S_{t-1}| with S_0 = {}.
inline std::size_t switch_cost_symdiff(const SelectionTrace& trace) {
  std::size_t n = 0;
  const ContextSet empty;
  for (std::size_t t = 0; t < trace.records.size(); ++t) {
    const auto& prev = t == 0 ? empty : trace.records[t - 1].selected;
    n += symmetric_difference_size(trace.records[t].selected, prev);
  }
  return n;
}

/// Context count plus weighted switching, the quantity the sequence oracle
/// minimises.
inline double selection_objective(const SelectionTrace& trace, double switch_weight = 1.0) {
  std::size_t active = 0;
  for (const auto& r : trace.records) active += r.selected.size();
  return static_cast<double>(active) + switch_weight * static_cast<double>(switch_cost_symdiff(trace));
}

struct ScoreResult {
  /// Mean over (frame, truth label) of the best a_{C,l} among selected
  /// contexts containing l; 0 when uncovered. This is a proxy, not mAP.
  double score = 0.0;
  std::size_t uncovered_label_frames = 0;
  std::size_t label_frames = 0;
};

inline ScoreResult coverage_weighted_score(const SelectionTrace& trace, const AccuracyTable& acc,
                                           const ContextCatalog& catalog) {
  ScoreResult out;
  double sum = 0.0;
  for (const auto& r : trace.records) {
    for (Label l : r.truth) {
      ++out.label_frames;
      double best = 0.0;
      bool hit = false;
      for (ContextId id : r.selected) {
        if (!catalog.by_id(id).labels.contains(l)) continue;
        hit = true;
        best = std::max(best, acc.at(id, l));
      }
      if (!hit) ++out.uncovered_label_frames;
      sum += best;
    }
  }
  if (out.label_frames > 0) out.score = sum / static_cast<double>(out.label_frames);
  return out;
}

struct MetricsReport {
  double intra_coherence = 0.0;
  double intra_coherence_raw = 0.0;
  double avg_coverage = 0.0;
  std::size_t switch_penalty = 0;
  std::size_t switch_cost_symdiff = 0;
  double coverage_weighted_score = 0.0;
  std::size_t uncovered_label_frames = 0;
};

inline MetricsReport compute_metrics(const SelectionTrace& trace, const ContextCatalog& catalog,
                                     const AccuracyTable& acc, const CooccurrenceMatrix& matrix) {
  MetricsReport m;
  m.intra_coherence = intra_coherence(catalog, matrix, CoherenceScale::normalized);
  m.intra_coherence_raw = intra_coherence(catalog, matrix, CoherenceScale::raw_count);
  m.avg_coverage = avg_coverage(trace);
  m.switch_penalty = switch_penalty(trace);
  m.switch_cost_symdiff = switch_cost_symdiff(trace);
  const auto s = coverage_weighted_score(trace, acc, catalog);
  m.coverage_weighted_score = s.score;
  m.uncovered_label_frames = s.uncovered_label_frames;
  return m;
}

}  // namespace ctxsched
