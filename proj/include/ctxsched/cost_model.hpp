#pragma once

// Analytic parameter / MAC accounting for low-rank adapters and a linear
// latency-power model for selection traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxsched/error.hpp"
#include "ctxsched/metrics.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

struct ArchParams {
  std::size_t layers = 12;
  std::size_t d_model = 192;
  std::size_t lora_rank = 16;
  /// Adapted projections per layer (query and value).
  std::size_t projections_per_layer = 2;
  std::size_t adapted_layers = 2;
  /// Tokens per forward pass (patches + class token).
  std::size_t tokens = 197;
  /// Classes of the per-context classification head.
  std::size_t head_classes = 0;
  double base_params = 0.0;
  double base_macs = 0.0;
};

inline void validate(const ArchParams& a) {
  if (a.layers == 0 || a.d_model == 0 || a.tokens == 0 || a.projections_per_layer == 0) {
    throw ValidationError("architecture dimensions must be positive");
  }
  if (a.lora_rank == 0) throw ValidationError("LoRA rank must be >= 1");
  if (a.adapted_layers > a.layers) throw ValidationError("adapted layers exceed total layers");
  if (a.base_params < 0.0 || a.base_macs < 0.0) throw ValidationError("base params/MACs must be non-negative");
}

/// MACs one adapter adds when applied unmerged: for every token, adapted
/// layer and projection, (x A) costs r*d_in and (xA) B costs r*d_out.
inline std::uint64_t adapter_mac_overhead(const ArchParams& a) {
  validate(a);
  return static_cast<std::uint64_t>(a.tokens) * a.adapted_layers * a.projections_per_layer * a.lora_rank *
         (2 * a.d_model);
}

/// Parameters of one adapter: both low-rank factors on every adapted
/// projection plus its own classification head (weights and bias).
inline std::uint64_t adapter_param_count(const ArchParams& a) {
  validate(a);
  const std::uint64_t factors =
      static_cast<std::uint64_t>(a.adapted_layers) * a.projections_per_layer * 2 * a.d_model * a.lora_rank;
  const std::uint64_t head = static_cast<std::uint64_t>(a.head_classes) * (a.d_model + 1);
  return factors + head;
}

struct CostParams {
  double base_latency_ms = 0.0;
  double per_adapter_latency_ms = 0.0;
  double base_power_w = 0.0;
  double per_adapter_power_w = 0.0;
  double switch_cost_ms = 0.0;
  double fps = 5.0;
};

inline void validate(const CostParams& c) {
  const bool non_negative = c.base_latency_ms >= 0.0 && c.per_adapter_latency_ms >= 0.0 && c.base_power_w >= 0.0 &&
                            c.per_adapter_power_w >= 0.0 && c.switch_cost_ms >= 0.0;
  if (!non_negative) throw ValidationError("cost parameters must be non-negative");
  if (!(c.fps > 0.0)) throw ValidationError("fps must be positive");
}

struct CostSummary {
  double mean_latency_ms = 0.0;
  double mean_power_w = 0.0;
  /// Mean power divided by frame rate.
  double energy_per_frame_j = 0.0;
  double total_energy_j = 0.0;
  std::size_t frames = 0;
};

struct CostEstimate {
  std::vector<double> latency_ms;
  std::vector<double> power_w;
  CostSummary summary;
};

/// latency_t = base + |S_t| * per_adapter + [changed_t] * switch_cost
/// power_t   = base + |S_t| * per_adapter
inline CostEstimate estimate_latency_power(const SelectionTrace& trace, const CostParams& cost) {
  validate(cost);
  CostEstimate out;
  out.latency_ms.reserve(trace.size());
  out.power_w.reserve(trace.size());
  double lat = 0.0, pow = 0.0;
  for (const auto& r : trace.records) {
    const auto k = static_cast<double>(r.selected.size());
    const double l = cost.base_latency_ms + k * cost.per_adapter_latency_ms + (r.changed ? cost.switch_cost_ms : 0.0);
    const double p = cost.base_power_w + k * cost.per_adapter_power_w;
    out.latency_ms.push_back(l);
    out.power_w.push_back(p);
    lat += l;
    pow += p;
  }
  auto& s = out.summary;
  s.frames = trace.size();
  if (s.frames > 0) {
    s.mean_latency_ms = lat / static_cast<double>(s.frames);
    s.mean_power_w = pow / static_cast<double>(s.frames);
  }
  s.energy_per_frame_j = s.mean_power_w / cost.fps;
  s.total_energy_j = s.energy_per_frame_j * static_cast<double>(s.frames);
  return out;
}

/// Reference value to compare a computed row against.
struct ReferenceRow {
  std::string name;
  double params = 0.0;
  double memory_mb = 0.0;
  double macs = 0.0;
};

struct Calibration {
  std::string source;
  std::map<std::string, CostParams> profiles;
  std::map<std::string, ArchParams> presets;
  std::vector<ReferenceRow> references;

  const CostParams& profile(const std::string& name) const {
    auto it = profiles.find(name);
    if (it == profiles.end()) throw ValidationError("calibration has no profile '" + name + "'");
    return it->second;
  }
  const ArchParams& preset(const std::string& name) const {
    auto it = presets.find(name);
    if (it == presets.end()) throw ValidationError("calibration has no architecture preset '" + name + "'");
    return it->second;
  }
  std::optional<ReferenceRow> reference(const std::string& name) const {
    for (const auto& r : references) {
      if (r.name == name) return r;
    }
    return std::nullopt;
  }
};

inline constexpr double kBytesPerParam = 4.0;
inline constexpr double kBytesPerMb = 1e6;
inline constexpr double kBytesPerMib = 1024.0 * 1024.0;

struct SizeRow {
  std::string name;
  double params = 0.0;
  double memory_mb = 0.0;
  double memory_mib = 0.0;
  double macs = 0.0;
  std::optional<ReferenceRow> reference;
};

struct Discrepancy {
  std::string row;
  std::string field;
  double computed = 0.0;
  double reference = 0.0;
  double relative = 0.0;
};

struct ProfileReport {
  std::vector<SizeRow> rows;
  std::uint64_t adapter_params = 0;
  std::uint64_t catalog_params = 0;
  std::uint64_t mac_overhead_per_adapter = 0;
  std::size_t contexts = 0;
  std::optional<CostSummary> trace_cost;
  std::optional<double> mean_macs_per_frame;
  std::vector<Discrepancy> discrepancies;
  std::string calibration_source;
};

/// Relative deviation above which a computed row is flagged against its
/// reference.
inline constexpr double kDiscrepancyTolerance = 0.01;

/// Size rows for the base model and base + catalog (one adapter per context,
/// one adapter active for MACs), plus trace cost when a trace is given.
inline ProfileReport profile_report(const ArchParams& arch, std::size_t contexts, const SelectionTrace* trace,
                                    const CostParams& cost, const Calibration* calibration = nullptr,
                                    const std::string& adapted_row_name = "adaptive") {
  validate(arch);
  ProfileReport rep;
  rep.contexts = contexts;
  rep.adapter_params = adapter_param_count(arch);
  rep.catalog_params = rep.adapter_params * contexts;
  rep.mac_overhead_per_adapter = adapter_mac_overhead(arch);

  auto row = [](std::string name, double params, double macs) {
    return SizeRow{std::move(name), params, params * kBytesPerParam / kBytesPerMb,
                   params * kBytesPerParam / kBytesPerMib, macs, std::nullopt};
  };
  rep.rows.push_back(row("base", arch.base_params, arch.base_macs));
  if (contexts > 0) {
    const double p = arch.base_params + static_cast<double>(rep.catalog_params);
    rep.rows.push_back(row(adapted_row_name, p, arch.base_macs + static_cast<double>(rep.mac_overhead_per_adapter)));
  }
  if (trace) {
    rep.trace_cost = estimate_latency_power(*trace, cost).summary;
    if (!trace->empty()) {
      rep.mean_macs_per_frame =
          arch.base_macs + avg_coverage(*trace) * static_cast<double>(rep.mac_overhead_per_adapter);
    }
  }
  if (calibration) {
    rep.calibration_source = calibration->source;
    for (auto& row : rep.rows) {
      auto ref = calibration->reference(row.name);
      if (!ref) continue;
      row.reference = *ref;
      auto flag = [&](const char* field, double computed, double reference) {
        if (reference == 0.0) return;
        const double rel = (computed - reference) / reference;
        if (std::abs(rel) > kDiscrepancyTolerance) rep.discrepancies.push_back({row.name, field, computed, reference, rel});
      };
      flag("params", row.params, ref->params);
      flag("memory_mb", row.memory_mb, ref->memory_mb);
      flag("macs", row.macs, ref->macs);
    }
  }
  return rep;
}

}  // namespace ctxsched
