#pragma once

#include <string>
#include <vector>

#include "ctxsched/catalog.hpp"
#include "ctxsched/error.hpp"
#include "ctxsched/sorted_set.hpp"

namespace ctxsched {

struct TraceRecord {
  std::size_t t = 0;
  LabelSet predicted;
  LabelSet truth;
  ContextSet selected;
  bool changed = false;
  /// Demand labels no context could serve at the threshold (best-effort policy).
  LabelSet dropped;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Per-frame active context sets of one policy run.
struct SelectionTrace {
  std::string policy;
  double tau = 0.0;
  bool context_copy = false;
  std::vector<TraceRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  friend bool operator==(const SelectionTrace&, const SelectionTrace&) = default;
};

/// Recomputes every `changed` flag from the selected sets (S_0 compared to ∅).
inline void mark_changes(SelectionTrace& trace) {
  const ContextSet empty;
  for (std::size_t t = 0; t < trace.records.size(); ++t) {
    const auto& prev = t == 0 ? empty : trace.records[t - 1].selected;
    trace.records[t].changed = trace.records[t].selected != prev;
  }
}

/// Empty iff all trace invariants hold: contiguous t, ids from the catalog and
/// consistent change flags.
inline std::vector<std::string> check_trace(const SelectionTrace& trace, const ContextCatalog& catalog) {
  std::vector<std::string> problems;
  const ContextSet empty;
  for (std::size_t t = 0; t < trace.records.size(); ++t) {
    const auto& r = trace.records[t];
    if (r.t != t) problems.push_back("record " + std::to_string(t) + " has t=" + std::to_string(r.t));
    for (auto id : r.selected) {
      if (!catalog.has(id)) {
        problems.push_back("frame " + std::to_string(t) + " selects unknown context " + std::to_string(id));
      }
    }
    const auto& prev = t == 0 ? empty : trace.records[t - 1].selected;
    if (r.changed != (r.selected != prev)) {
      problems.push_back("frame " + std::to_string(t) + " has inconsistent change flag");
    }
  }
  return problems;
}

}  // namespace ctxsched
