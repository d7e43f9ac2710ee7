#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctxsched/catalog.hpp"
#include "ctxsched/error.hpp"

namespace ctxsched {

/// Offline accuracy a_{C,l} of each context on each of its own labels.
class AccuracyTable {
 public:
  struct Entry {
    ContextId context;
    Label label;
    double accuracy;
  };

  AccuracyTable() = default;
  explicit AccuracyTable(const std::vector<Entry>& entries) {
    for (const auto& e : entries) set(e.context, e.label, e.accuracy);
  }

  void set(ContextId c, Label l, double a) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ValidationError("accuracy for context " + std::to_string(c) + ", label " + std::to_string(l) +
                            " outside [0, 1]");
    }
    values_[{c, l}] = a;
  }

  std::optional<double> get(ContextId c, Label l) const {
    auto it = values_.find({c, l});
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  /// a_{C,l}, or 0 when no entry exists.
  double at(ContextId c, Label l) const { return get(c, l).value_or(0.0); }

  std::size_t size() const noexcept { return values_.size(); }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(values_.size());
    for (const auto& [key, a] : values_) out.push_back({key.first, key.second, a});
    return out;
  }

  /// Every key must name a context of `catalog` that contains the label.
  void check_against(const ContextCatalog& catalog) const {
    for (const auto& [key, a] : values_) {
      auto pos = catalog.position_of(key.first);
      if (!pos) throw ValidationError("accuracy entry for unknown context " + std::to_string(key.first));
      if (!catalog[*pos].labels.contains(key.second)) {
        throw ValidationError("accuracy entry (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
                              ") names a label outside the context");
      }
    }
  }

 private:
  std::map<std::pair<ContextId, Label>, double> values_;
};

/// a_{C,l} = clamp(a_max - size_slope * (|C| - 1), 0, 1): narrower contexts are
/// more accurate.
struct SyntheticAccuracyModel {
  double a_max = 0.9;
  double size_slope = 0.02;

  double accuracy_for_size(std::size_t size) const {
    const double a = a_max - size_slope * (static_cast<double>(size) - 1.0);
    return std::clamp(a, 0.0, 1.0);
  }
};

inline AccuracyTable synthetic_accuracy(const ContextCatalog& catalog, const SyntheticAccuracyModel& model) {
  if (!(model.a_max >= 0.0 && model.a_max <= 1.0)) throw ValidationError("a_max must be in [0, 1]");
  if (!(model.size_slope >= 0.0)) throw ValidationError("size_slope must be >= 0");
  AccuracyTable table;
  for (const auto& c : catalog.contexts()) {
    const double a = model.accuracy_for_size(c.labels.size());
    for (Label l : c.labels) table.set(c.id, l, a);
  }
  return table;
}

}  // namespace ctxsched
