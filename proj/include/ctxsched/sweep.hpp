#pragma once

// Parameter sweeps over context budget, catalog variant, threshold and
// selection policy on one stream. Cells run on a worker pool; rows come back
// in grid order regardless of completion order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctxsched/accuracy.hpp"
#include "ctxsched/context_builder.hpp"
#include "ctxsched/cooccurrence.hpp"
#include "ctxsched/cost_model.hpp"
#include "ctxsched/detector.hpp"
#include "ctxsched/metrics.hpp"
#include "ctxsched/oracle.hpp"
#include "ctxsched/stream.hpp"

namespace ctxsched {

enum class Policy { greedy, greedy_copy, oracle_per_frame };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::greedy:
      return "greedy";
    case Policy::greedy_copy:
      return "greedy_copy";
    case Policy::oracle_per_frame:
      return "oracle_per_frame";
  }
  return "unknown";
}

inline Policy parse_policy(const std::string& s) {
  if (s == "greedy") return Policy::greedy;
  if (s == "greedy_copy" || s == "copy" || s == "greedy+copy") return Policy::greedy_copy;
  if (s == "oracle_per_frame" || s == "oracle" || s == "per-frame") return Policy::oracle_per_frame;
  throw ValidationError("unknown policy '" + s + "'");
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

struct SweepGrid {
  std::vector<std::size_t> budgets;
  std::vector<CatalogVariant> variants;
  std::vector<double> taus;
  std::vector<Policy> policies;
  /// Fixed M_max for every cell; by default ceil(|valid| / B), and at least
  /// `overlap_max_contexts` for the overlapping variant.
  std::optional<std::size_t> max_contexts;
  std::size_t overlap_max_contexts = 50;
  double min_frequency = 0.0;

  bool empty() const { return budgets.empty() || variants.empty() || taus.empty() || policies.empty(); }
};

struct SweepInputs {
  const LabelStream* truth = nullptr;
  const LabelStream* predicted = nullptr;
  SyntheticAccuracyModel accuracy;
  CostParams cost;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct ClusteringRow {
  std::size_t budget = 0;
  CatalogVariant variant = CatalogVariant::basic;
  std::size_t max_contexts = 0;
  std::size_t contexts = 0;
  double intra_coherence = 0.0;
  double intra_coherence_raw = 0.0;
  /// Contexts needed per frame: minimum covers of the ground truth.
  double avg_coverage = 0.0;
  std::size_t switch_penalty = 0;
  bool catalog_valid = false;
  std::string error;
};

struct PolicyRow {
  std::size_t budget = 0;
  CatalogVariant variant = CatalogVariant::basic;
  double tau = 0.0;
  Policy policy = Policy::greedy;
  std::size_t max_contexts = 0;
  std::size_t contexts = 0;
  MetricsReport metrics;
  CostSummary cost;
  std::size_t coverage_violations = 0;
  std::size_t dropped_label_frames = 0;
  std::string error;
};

struct SweepResult {
  std::vector<ClusteringRow> clustering;
  std::vector<PolicyRow> policies;
};

inline std::size_t auto_max_contexts(const SweepGrid& grid, std::size_t valid_count, std::size_t budget,
                                     CatalogVariant variant) {
  if (grid.max_contexts) return *grid.max_contexts;
  const std::size_t needed = std::max<std::size_t>(1, (valid_count + budget - 1) / budget);
  if (variant == CatalogVariant::greedy_overlap) return std::max(needed, grid.overlap_max_contexts);
  return needed;
}

inline SweepResult run_sweep(const SweepGrid& grid, const SweepInputs& in) {
  if (grid.empty()) throw ValidationError("sweep grid must be non-empty in every dimension");
  if (!in.truth || !in.predicted) throw ValidationError("sweep needs ground-truth and predicted streams");
  if (in.truth->size() != in.predicted->size() || in.truth->label_count() != in.predicted->label_count()) {
    throw ValidationError("ground truth and prediction streams differ in shape");
  }
  const auto& truth = *in.truth;
  const auto matrix = build_cooccurrence(truth);
  const auto valid = valid_labels(matrix, grid.min_frequency);

  struct Built {
    std::optional<ContextCatalog> catalog;
    std::optional<AccuracyTable> acc;
  };
  const std::size_t n_cat = grid.budgets.size() * grid.variants.size();
  std::vector<Built> built(n_cat);
  SweepResult result;
  result.clustering.resize(n_cat);

  parallel_for(n_cat, in.jobs, [&](std::size_t i) {
    const auto budget = grid.budgets[i / grid.variants.size()];
    const auto variant = grid.variants[i % grid.variants.size()];
    auto& row = result.clustering[i];
    row.budget = budget;
    row.variant = variant;
    try {
      row.max_contexts = auto_max_contexts(grid, valid.size(), budget, variant);
      auto catalog = build_contexts(matrix, valid, budget, row.max_contexts, variant, BuildOptions{in.seed});
      auto acc = synthetic_accuracy(catalog, in.accuracy);
      row.contexts = catalog.size();
      row.catalog_valid = validate_catalog(catalog, valid).ok();
      if (!catalog.empty()) {
        row.intra_coherence = intra_coherence(catalog, matrix, CoherenceScale::normalized);
        row.intra_coherence_raw = intra_coherence(catalog, matrix, CoherenceScale::raw_count);
      }
      if (!truth.empty()) {
        auto needed = per_frame_oracle(truth, catalog, acc, 0.0, UncoverablePolicy::best_effort);
        row.avg_coverage = avg_coverage(needed);
        row.switch_penalty = switch_penalty(needed);
      }
      built[i].catalog = std::move(catalog);
      built[i].acc = std::move(acc);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  const std::size_t per_cat = grid.taus.size() * grid.policies.size();
  result.policies.resize(n_cat * per_cat);
  parallel_for(result.policies.size(), in.jobs, [&](std::size_t i) {
    const std::size_t c = i / per_cat;
    const double tau = grid.taus[(i % per_cat) / grid.policies.size()];
    const Policy policy = grid.policies[i % grid.policies.size()];
    auto& row = result.policies[i];
    row.budget = result.clustering[c].budget;
    row.variant = result.clustering[c].variant;
    row.max_contexts = result.clustering[c].max_contexts;
    row.tau = tau;
    row.policy = policy;
    if (!built[c].catalog) {
      row.error = "catalog: " + result.clustering[c].error;
      return;
    }
    try {
      const auto& catalog = *built[c].catalog;
      const auto& acc = *built[c].acc;
      row.contexts = catalog.size();
      SelectionTrace trace;
      if (policy == Policy::oracle_per_frame) {
        trace = per_frame_oracle(truth, catalog, acc, tau, UncoverablePolicy::best_effort);
      } else {
        DetectorConfig cfg{tau, policy == Policy::greedy_copy, UncoverablePolicy::best_effort};
        trace = run_simulation(truth, *in.predicted, catalog, acc, cfg);
      }
      if (!trace.empty()) row.metrics = compute_metrics(trace, catalog, acc, matrix);
      row.cost = estimate_latency_power(trace, in.cost).summary;
      const QualifiedCatalog q(catalog, acc, tau);
      row.coverage_violations = audit_coverage(trace, q).size();
      for (const auto& r : trace.records) row.dropped_label_frames += r.dropped.size();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return result;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace detail

/// One CSV with a `kind` column: `clustering` rows (one per budget x variant)
/// followed by `policy` rows. Lines starting with '#' carry provenance.
inline std::string sweep_to_csv(const SweepResult& r, const std::vector<std::string>& provenance = {}) {
  using detail::fmt_num;
  std::ostringstream os;
  for (const auto& p : provenance) os << "# " << p << '\n';
  os << "kind,B,variant,tau,policy,M_max,contexts,intra_coherence,intra_coherence_raw,avg_coverage,"
        "switch_penalty,switch_cost_symdiff,score_proxy,uncovered_label_frames,dropped_label_frames,"
        "coverage_violations,mean_latency_ms,mean_power_w,energy_per_frame_j,catalog_valid,error\n";
  for (const auto& c : r.clustering) {
    os << "clustering," << c.budget << ',' << to_string(c.variant) << ",,," << c.max_contexts << ',' << c.contexts
       << ',' << fmt_num(c.intra_coherence) << ',' << fmt_num(c.intra_coherence_raw) << ','
       << fmt_num(c.avg_coverage) << ',' << c.switch_penalty << ",,,,,,,,," << (c.catalog_valid ? 1 : 0) << ','
       << detail::csv_escape(c.error) << '\n';
  }
  for (const auto& p : r.policies) {
    const auto& m = p.metrics;
    os << "policy," << p.budget << ',' << to_string(p.variant) << ',' << fmt_num(p.tau) << ',' << to_string(p.policy)
       << ',' << p.max_contexts << ',' << p.contexts << ',' << fmt_num(m.intra_coherence) << ','
       << fmt_num(m.intra_coherence_raw) << ',' << fmt_num(m.avg_coverage) << ',' << m.switch_penalty << ','
       << m.switch_cost_symdiff << ',' << fmt_num(m.coverage_weighted_score) << ',' << m.uncovered_label_frames
       << ',' << p.dropped_label_frames << ',' << p.coverage_violations << ',' << fmt_num(p.cost.mean_latency_ms)
       << ',' << fmt_num(p.cost.mean_power_w) << ',' << fmt_num(p.cost.energy_per_frame_j) << ",,"
       << detail::csv_escape(p.error) << '\n';
  }
  return os.str();
}

}  // namespace ctxsched
