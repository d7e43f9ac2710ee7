#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxsched/error.hpp"
#include "ctxsched/sorted_set.hpp"

namespace ctxsched {

struct Context {
  ContextId id = 0;
  LabelSet labels;

  friend bool operator==(const Context&, const Context&) = default;
};

enum class CatalogVariant { basic, greedy_nonoverlap, greedy_overlap };

inline std::string to_string(CatalogVariant v) {
  switch (v) {
    case CatalogVariant::basic:
      return "basic";
    case CatalogVariant::greedy_nonoverlap:
      return "greedy_nonoverlap";
    case CatalogVariant::greedy_overlap:
      return "greedy_overlap";
  }
  return "unknown";
}

inline CatalogVariant parse_variant(const std::string& s) {
  if (s == "basic") return CatalogVariant::basic;
  if (s == "greedy_nonoverlap" || s == "greedy" || s == "nonoverlap") return CatalogVariant::greedy_nonoverlap;
  if (s == "greedy_overlap" || s == "overlap") return CatalogVariant::greedy_overlap;
  throw ValidationError("unknown catalog variant '" + s + "'");
}

/// The context collection together with its size budget B and count bound
/// M_max. Ids must be unique; the remaining invariants are checked by
/// validate_catalog so that invalid catalogs can still be loaded and reported.
class ContextCatalog {
 public:
  ContextCatalog() = default;
  ContextCatalog(std::vector<Context> contexts, std::size_t budget, std::size_t max_contexts,
                 CatalogVariant variant)
      : contexts_(std::move(contexts)), budget_(budget), max_contexts_(max_contexts), variant_(variant) {
    for (std::size_t i = 0; i < contexts_.size(); ++i) {
      if (!position_.emplace(contexts_[i].id, i).second) {
        throw ValidationError("duplicate context id " + std::to_string(contexts_[i].id));
      }
    }
  }

  const std::vector<Context>& contexts() const noexcept { return contexts_; }
  std::size_t size() const noexcept { return contexts_.size(); }
  bool empty() const noexcept { return contexts_.empty(); }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t max_contexts() const noexcept { return max_contexts_; }
  CatalogVariant variant() const noexcept { return variant_; }

  const Context& operator[](std::size_t position) const { return contexts_.at(position); }

  std::optional<std::size_t> position_of(ContextId id) const {
    auto it = position_.find(id);
    if (it == position_.end()) return std::nullopt;
    return it->second;
  }

  const Context& by_id(ContextId id) const {
    auto pos = position_of(id);
    if (!pos) throw ValidationError("unknown context id " + std::to_string(id));
    return contexts_[*pos];
  }

  bool has(ContextId id) const { return position_.count(id) != 0; }

  LabelSet label_union() const {
    std::vector<Label> all;
    for (const auto& c : contexts_) all.insert(all.end(), c.labels.begin(), c.labels.end());
    return LabelSet(std::move(all));
  }

  friend bool operator==(const ContextCatalog& a, const ContextCatalog& b) {
    return a.contexts_ == b.contexts_ && a.budget_ == b.budget_ && a.max_contexts_ == b.max_contexts_ &&
           a.variant_ == b.variant_;
  }

 private:
  std::vector<Context> contexts_;
  std::size_t budget_ = 0;
  std::size_t max_contexts_ = 0;
  CatalogVariant variant_ = CatalogVariant::greedy_nonoverlap;
  std::map<ContextId, std::size_t> position_;
};

enum class ViolationKind { size_bound, count_bound, duplicate_context, overlap, coverage };

inline std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::size_bound:
      return "size_bound";
    case ViolationKind::count_bound:
      return "count_bound";
    case ViolationKind::duplicate_context:
      return "duplicate_context";
    case ViolationKind::overlap:
      return "overlap";
    case ViolationKind::coverage:
      return "coverage";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string message;
  std::vector<ContextId> contexts;
  LabelSet labels;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
  }
};

inline ValidationReport validate_catalog(const ContextCatalog& catalog, const LabelSet& valid_labels) {
  ValidationReport report;
  const auto& cs = catalog.contexts();
  for (const auto& c : cs) {
    if (c.labels.empty() || c.labels.size() > catalog.budget()) {
      report.violations.push_back({ViolationKind::size_bound,
                                   "context " + std::to_string(c.id) + " has " + std::to_string(c.labels.size()) +
                                       " labels; allowed 1.." + std::to_string(catalog.budget()),
                                   {c.id},
                                   c.labels});
    }
  }
  if (cs.size() > catalog.max_contexts()) {
    report.violations.push_back({ViolationKind::count_bound,
                                 std::to_string(cs.size()) + " contexts exceed M_max " +
                                     std::to_string(catalog.max_contexts()),
                                 {},
                                 {}});
  }
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      if (cs[i].labels == cs[j].labels) {
        report.violations.push_back({ViolationKind::duplicate_context,
                                     "contexts " + std::to_string(cs[i].id) + " and " + std::to_string(cs[j].id) +
                                         " have identical label sets",
                                     {cs[i].id, cs[j].id},
                                     cs[i].labels});
      } else if (catalog.variant() == CatalogVariant::greedy_nonoverlap) {
        auto shared = set_intersection(cs[i].labels, cs[j].labels);
        if (!shared.empty()) {
          report.violations.push_back({ViolationKind::overlap,
                                       "contexts " + std::to_string(cs[i].id) + " and " +
                                           std::to_string(cs[j].id) + " share labels " + to_string(shared),
                                       {cs[i].id, cs[j].id},
                                       shared});
        }
      }
    }
  }
  auto missing = set_difference(valid_labels, catalog.label_union());
  if (!missing.empty()) {
    report.violations.push_back(
        {ViolationKind::coverage, "labels not covered by any context: " + to_string(missing), {}, missing});
  }
  return report;
}

}  // namespace ctxsched
