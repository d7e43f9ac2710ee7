#pragma once

// Per-frame greedy selection of the active context set, with the optional
// context-copy fast path, and full-stream replay.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctxsched/accuracy.hpp"
#include "ctxsched/catalog.hpp"
#include "ctxsched/error.hpp"
#include "ctxsched/stream.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

enum class UncoverablePolicy { error, best_effort };

struct DetectorConfig {
  double tau = 0.0;
  bool context_copy = false;
  UncoverablePolicy uncoverable = UncoverablePolicy::best_effort;
};

/// Which labels each context serves at threshold tau, precomputed once per
/// (catalog, accuracy table, tau).
class QualifiedCatalog {
 public:
  QualifiedCatalog(const ContextCatalog& catalog, const AccuracyTable& acc, double tau)
      : catalog_(&catalog), tau_(tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0, 1]");
    serves_.resize(catalog.size());
    for (std::size_t p = 0; p < catalog.size(); ++p) {
      const auto& c = catalog[p];
      std::vector<Label> ok;
      for (Label l : c.labels) {
        auto a = acc.get(c.id, l);
        if (a && *a >= tau) {
          ok.push_back(l);
          servers_[l].push_back(p);
        }
      }
      serves_[p] = LabelSet(std::move(ok));
      by_size_.push_back(p);
    }
    std::stable_sort(by_size_.begin(), by_size_.end(), [&](std::size_t a, std::size_t b) {
      const auto& ca = catalog[a];
      const auto& cb = catalog[b];
      if (ca.labels.size() != cb.labels.size()) return ca.labels.size() < cb.labels.size();
      return ca.id < cb.id;
    });
  }

  const ContextCatalog& catalog() const noexcept { return *catalog_; }
  double tau() const noexcept { return tau_; }

  /// Labels of the context at `position` with a_{C,l} >= tau.
  const LabelSet& serves(std::size_t position) const { return serves_.at(position); }

  bool coverable(Label l) const { return servers_.count(l) != 0; }

  /// Catalog positions whose context serves `l`.
  const std::vector<std::size_t>& servers(Label l) const {
    static const std::vector<std::size_t> none;
    auto it = servers_.find(l);
    return it == servers_.end() ? none : it->second;
  }

  /// Catalog positions ordered by increasing context size, ties by id.
  const std::vector<std::size_t>& by_size() const noexcept { return by_size_; }

  LabelSet uncoverable(const LabelSet& labels) const {
    std::vector<Label> out;
    for (Label l : labels) {
      if (!coverable(l)) out.push_back(l);
    }
    return LabelSet(std::move(out));
  }

  /// True iff every label of `demand` is served by some context in `selected`.
  bool covers(const ContextSet& selected, const LabelSet& demand) const {
    for (Label l : demand) {
      bool hit = false;
      for (ContextId id : selected) {
        auto pos = catalog_->position_of(id);
        if (pos && serves_[*pos].contains(l)) {
          hit = true;
          break;
        }
      }
      if (!hit) return false;
    }
    return true;
  }

 private:
  const ContextCatalog* catalog_;
  double tau_;
  std::vector<LabelSet> serves_;
  std::map<Label, std::vector<std::size_t>> servers_;
  std::vector<std::size_t> by_size_;
};

struct Detection {
  ContextSet selected;
  LabelSet dropped;
};

namespace detail {

inline std::string uncoverable_message(const LabelSet& labels, double tau) {
  return "labels " + to_string(labels) + " have no context with accuracy >= tau=" + std::to_string(tau);
}

}  // namespace detail

/// Greedy pass only: contexts by increasing size; one is taken iff it serves a
/// still-uncovered demand label.
inline ContextSet greedy_cover(const LabelSet& demand, const QualifiedCatalog& q) {
  LabelSet uncovered = demand;
  std::vector<ContextId> chosen;
  for (std::size_t p : q.by_size()) {
    if (uncovered.empty()) break;
    auto provides = set_intersection(q.serves(p), uncovered);
    if (provides.empty()) continue;
    chosen.push_back(q.catalog()[p].id);
    uncovered = set_difference(uncovered, provides);
  }
  return ContextSet(std::move(chosen));
}

inline Detection detect_contexts(const LabelSet& current, const LabelSet& previous, const QualifiedCatalog& q,
                                 const DetectorConfig& config, const ContextSet& prev_selected) {
  for (ContextId id : prev_selected) {
    if (!q.catalog().has(id)) throw ValidationError("previous selection names unknown context " + std::to_string(id));
  }
  auto dropped = q.uncoverable(current);
  if (current == previous) return {prev_selected, dropped};
  if (!dropped.empty() && config.uncoverable == UncoverablePolicy::error) {
    throw InfeasibleError(detail::uncoverable_message(dropped, q.tau()), dropped.values());
  }
  auto demand = set_difference(current, dropped);
  if (config.context_copy && q.covers(prev_selected, demand)) return {prev_selected, dropped};
  return {greedy_cover(demand, q), dropped};
}

/// Convenience overload building the qualification index on the fly.
inline Detection detect_contexts(const LabelSet& current, const LabelSet& previous, const ContextCatalog& catalog,
                                 const AccuracyTable& acc, const DetectorConfig& config,
                                 const ContextSet& prev_selected) {
  return detect_contexts(current, previous, QualifiedCatalog(catalog, acc, config.tau), config, prev_selected);
}

inline std::string policy_name(const DetectorConfig& config) {
  return config.context_copy ? "greedy_copy" : "greedy";
}

/// Replays `predicted` through detect_contexts frame by frame, starting from
/// an empty previous frame and selection. Ground truth is carried along for
/// scoring only.
inline SelectionTrace run_simulation(const LabelStream& truth, const LabelStream& predicted,
                                     const ContextCatalog& catalog, const AccuracyTable& acc,
                                     const DetectorConfig& config) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("ground truth has " + std::to_string(truth.size()) + " frames but prediction has " +
                          std::to_string(predicted.size()));
  }
  if (truth.label_count() != predicted.label_count()) {
    throw ValidationError("ground truth and prediction disagree on label count");
  }
  const QualifiedCatalog q(catalog, acc, config.tau);
  SelectionTrace trace;
  trace.policy = policy_name(config);
  trace.tau = config.tau;
  trace.context_copy = config.context_copy;
  trace.records.reserve(truth.size());

  LabelSet prev_labels;
  ContextSet prev_selected;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const auto& y = predicted.labels(t);
    Detection d;
    try {
      d = detect_contexts(y, prev_labels, q, config, prev_selected);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("frame " + std::to_string(t) + ": " + e.what(), e.labels());
    }
    trace.records.push_back(TraceRecord{t, y, truth.labels(t), d.selected, d.selected != prev_selected, d.dropped});
    prev_labels = y;
    prev_selected = std::move(d.selected);
  }
  return trace;
}

struct CoverageViolation {
  std::size_t t;
  Label label;
};

/// Re-scan: every predicted label that some context serves at tau must be
/// served by the frame's selected set.
inline std::vector<CoverageViolation> audit_coverage(const SelectionTrace& trace, const QualifiedCatalog& q) {
  std::vector<CoverageViolation> out;
  for (const auto& r : trace.records) {
    for (Label l : r.predicted) {
      if (q.coverable(l) && !q.covers(r.selected, LabelSet{l})) out.push_back({r.t, l});
    }
  }
  return out;
}

}  // namespace ctxsched
