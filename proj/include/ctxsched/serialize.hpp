#pragma once

// JSON / CSV forms of catalogs, accuracy tables, traces, metric and cost
// reports, and calibration files.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ctxsched/accuracy.hpp"
#include "ctxsched/catalog.hpp"
#include "ctxsched/cost_model.hpp"
#include "ctxsched/digest.hpp"
#include "ctxsched/metrics.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename T>
Json to_array(const SortedSet<T>& s) {
  Json a = Json::array();
  for (const auto& v : s) a.push_back(v);
  return a;
}

template <typename T>
T field(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback, const char* where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key, where);
}

inline LabelSet label_array(const Json& j, const char* where) {
  if (!j.is_array()) throw SchemaError(std::string(where) + ": expected an array of label ids");
  std::vector<Label> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw SchemaError(std::string(where) + ": label ids must be non-negative integers");
    }
    out.push_back(v.get<Label>());
  }
  return LabelSet(std::move(out));
}

}  // namespace detail

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(what + ": malformed JSON: " + e.what());
  }
}

inline Json load_json_file(const std::string& path) { return parse_json_text(read_file(path), path); }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

// --- catalog ---------------------------------------------------------------

inline Json catalog_to_json(const ContextCatalog& c) {
  Json j;
  j["B"] = c.budget();
  j["M_max"] = c.max_contexts();
  j["variant"] = to_string(c.variant());
  j["realized_contexts"] = c.size();
  Json arr = Json::array();
  for (const auto& ctx : c.contexts()) {
    Json e;
    e["id"] = ctx.id;
    e["labels"] = detail::to_array(ctx.labels);
    arr.push_back(std::move(e));
  }
  j["contexts"] = std::move(arr);
  return j;
}

inline ContextCatalog catalog_from_json(const Json& j) {
  const char* where = "catalog";
  const auto budget = detail::field<std::size_t>(j, "B", where);
  const auto max_contexts = detail::field<std::size_t>(j, "M_max", where);
  CatalogVariant variant;
  try {
    variant = parse_variant(detail::field<std::string>(j, "variant", where));
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("catalog: ") + e.what());
  }
  if (!j.contains("contexts") || !j["contexts"].is_array()) throw SchemaError("catalog: missing 'contexts' array");
  std::vector<Context> contexts;
  for (const auto& e : j["contexts"]) {
    const auto id = detail::field<ContextId>(e, "id", "catalog context");
    if (!e.contains("labels")) throw SchemaError("catalog context: missing field 'labels'");
    contexts.push_back(Context{id, detail::label_array(e["labels"], "catalog context")});
  }
  try {
    return ContextCatalog(std::move(contexts), budget, max_contexts, variant);
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("catalog: ") + e.what());
  }
}

/// Digest of the canonical catalog serialization.
inline std::string catalog_hash(const ContextCatalog& c) { return hex_digest(catalog_to_json(c).dump()); }

// --- accuracy ----------------------------------------------------------------

inline Json accuracy_to_json(const AccuracyTable& t) {
  Json arr = Json::array();
  for (const auto& e : t.entries()) {
    Json r;
    r["context"] = e.context;
    r["label"] = e.label;
    r["accuracy"] = e.accuracy;
    arr.push_back(std::move(r));
  }
  Json j;
  j["entries"] = std::move(arr);
  return j;
}

inline AccuracyTable accuracy_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw SchemaError("accuracy table: missing 'entries' array");
  }
  AccuracyTable t;
  for (const auto& e : j["entries"]) {
    const auto c = detail::field<ContextId>(e, "context", "accuracy entry");
    const auto l = detail::field<Label>(e, "label", "accuracy entry");
    const auto a = detail::field<double>(e, "accuracy", "accuracy entry");
    try {
      t.set(c, l, a);
    } catch (const ValidationError& err) {
      throw SchemaError(err.what());
    }
  }
  return t;
}

// --- trace -------------------------------------------------------------------

inline Json trace_to_json(const SelectionTrace& trace, const std::string& catalog_digest) {
  Json header;
  header["policy"] = trace.policy;
  header["tau"] = trace.tau;
  header["context_copy"] = trace.context_copy;
  header["catalog_hash"] = catalog_digest;
  header["frames"] = trace.size();
  Json frames = Json::array();
  for (const auto& r : trace.records) {
    Json f;
    f["t"] = r.t;
    f["pred"] = detail::to_array(r.predicted);
    f["truth"] = detail::to_array(r.truth);
    f["S"] = detail::to_array(r.selected);
    f["changed"] = r.changed;
    f["dropped"] = detail::to_array(r.dropped);
    frames.push_back(std::move(f));
  }
  Json j;
  j["header"] = std::move(header);
  j["frames"] = std::move(frames);
  return j;
}

inline SelectionTrace trace_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("header") || !j.contains("frames") || !j["frames"].is_array()) {
    throw SchemaError("trace: expected an object with 'header' and 'frames'");
  }
  SelectionTrace trace;
  const auto& h = j["header"];
  trace.policy = detail::field<std::string>(h, "policy", "trace header");
  trace.tau = detail::field<double>(h, "tau", "trace header");
  trace.context_copy = detail::field_or<bool>(h, "context_copy", false, "trace header");
  for (const auto& f : j["frames"]) {
    TraceRecord r;
    r.t = detail::field<std::size_t>(f, "t", "trace frame");
    if (!f.contains("pred") || !f.contains("truth") || !f.contains("S")) {
      throw SchemaError("trace frame: missing 'pred', 'truth' or 'S'");
    }
    r.predicted = detail::label_array(f["pred"], "trace frame");
    r.truth = detail::label_array(f["truth"], "trace frame");
    r.selected = ContextSet(detail::label_array(f["S"], "trace frame").values());
    r.changed = detail::field<bool>(f, "changed", "trace frame");
    if (f.contains("dropped")) r.dropped = detail::label_array(f["dropped"], "trace frame");
    trace.records.push_back(std::move(r));
  }
  return trace;
}

/// One row per frame; set-valued columns are space-separated ids.
inline std::string trace_to_csv(const SelectionTrace& trace) {
  auto join = [](const auto& s) {
    std::string out;
    for (auto v : s) {
      if (!out.empty()) out += ' ';
      out += std::to_string(v);
    }
    return out;
  };
  std::ostringstream os;
  os << "t,pred,truth,S,changed,dropped\n";
  for (const auto& r : trace.records) {
    os << r.t << ',' << join(r.predicted) << ',' << join(r.truth) << ',' << join(r.selected) << ','
       << (r.changed ? 1 : 0) << ',' << join(r.dropped) << '\n';
  }
  return os.str();
}

// --- metrics / cost ----------------------------------------------------------

inline Json metrics_to_json(const MetricsReport& m) {
  Json j;
  j["intra_coherence"] = m.intra_coherence;
  j["intra_coherence_raw"] = m.intra_coherence_raw;
  j["avg_coverage"] = m.avg_coverage;
  j["switch_penalty"] = m.switch_penalty;
  j["switch_cost_symdiff"] = m.switch_cost_symdiff;
  j["coverage_weighted_score"] = m.coverage_weighted_score;
  j["coverage_weighted_score_is_proxy"] = true;
  j["uncovered_label_frames"] = m.uncovered_label_frames;
  return j;
}

inline Json cost_params_to_json(const CostParams& c) {
  Json j;
  j["base_latency_ms"] = c.base_latency_ms;
  j["per_adapter_latency_ms"] = c.per_adapter_latency_ms;
  j["base_power_w"] = c.base_power_w;
  j["per_adapter_power_w"] = c.per_adapter_power_w;
  j["switch_cost_ms"] = c.switch_cost_ms;
  j["fps"] = c.fps;
  return j;
}

inline CostParams cost_params_from_json(const Json& j) {
  const char* where = "cost profile";
  CostParams c;
  c.base_latency_ms = detail::field<double>(j, "base_latency_ms", where);
  c.per_adapter_latency_ms = detail::field_or<double>(j, "per_adapter_latency_ms", 0.0, where);
  c.base_power_w = detail::field<double>(j, "base_power_w", where);
  c.per_adapter_power_w = detail::field_or<double>(j, "per_adapter_power_w", 0.0, where);
  c.switch_cost_ms = detail::field_or<double>(j, "switch_cost_ms", 0.0, where);
  c.fps = detail::field_or<double>(j, "fps", 5.0, where);
  return c;
}

inline Json arch_to_json(const ArchParams& a) {
  Json j;
  j["layers"] = a.layers;
  j["d_model"] = a.d_model;
  j["lora_rank"] = a.lora_rank;
  j["projections_per_layer"] = a.projections_per_layer;
  j["adapted_layers"] = a.adapted_layers;
  j["tokens"] = a.tokens;
  j["head_classes"] = a.head_classes;
  j["base_params"] = a.base_params;
  j["base_macs"] = a.base_macs;
  return j;
}

inline ArchParams arch_from_json(const Json& j) {
  const char* where = "architecture preset";
  ArchParams a;
  a.layers = detail::field<std::size_t>(j, "layers", where);
  a.d_model = detail::field<std::size_t>(j, "d_model", where);
  a.lora_rank = detail::field<std::size_t>(j, "lora_rank", where);
  a.projections_per_layer = detail::field_or<std::size_t>(j, "projections_per_layer", 2, where);
  a.adapted_layers = detail::field<std::size_t>(j, "adapted_layers", where);
  a.tokens = detail::field<std::size_t>(j, "tokens", where);
  a.head_classes = detail::field_or<std::size_t>(j, "head_classes", 0, where);
  a.base_params = detail::field<double>(j, "base_params", where);
  a.base_macs = detail::field<double>(j, "base_macs", where);
  return a;
}

inline Calibration calibration_from_json(const Json& j) {
  Calibration c;
  c.source = detail::field_or<std::string>(j, "source", "", "calibration");
  if (j.contains("profiles")) {
    for (const auto& [name, p] : j["profiles"].items()) c.profiles.emplace(name, cost_params_from_json(p));
  }
  if (j.contains("presets")) {
    for (const auto& [name, p] : j["presets"].items()) c.presets.emplace(name, arch_from_json(p));
  }
  if (j.contains("references")) {
    for (const auto& r : j["references"]) {
      ReferenceRow row;
      row.name = detail::field<std::string>(r, "name", "reference row");
      row.params = detail::field_or<double>(r, "params", 0.0, "reference row");
      row.memory_mb = detail::field_or<double>(r, "memory_mb", 0.0, "reference row");
      row.macs = detail::field_or<double>(r, "macs", 0.0, "reference row");
      c.references.push_back(std::move(row));
    }
  }
  return c;
}

inline Calibration load_calibration(const std::string& path) { return calibration_from_json(load_json_file(path)); }

inline Json cost_summary_to_json(const CostSummary& s) {
  Json j;
  j["frames"] = s.frames;
  j["mean_latency_ms"] = s.mean_latency_ms;
  j["mean_power_w"] = s.mean_power_w;
  j["energy_per_frame_j"] = s.energy_per_frame_j;
  j["total_energy_j"] = s.total_energy_j;
  return j;
}

inline Json profile_report_to_json(const ProfileReport& r) {
  Json j;
  j["calibration_source"] = r.calibration_source;
  j["contexts"] = r.contexts;
  j["adapter_params"] = r.adapter_params;
  j["catalog_params"] = r.catalog_params;
  j["mac_overhead_per_adapter"] = r.mac_overhead_per_adapter;
  j["bytes_per_param"] = kBytesPerParam;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json e;
    e["name"] = row.name;
    e["params"] = row.params;
    e["memory_mb"] = row.memory_mb;
    e["memory_mib"] = row.memory_mib;
    e["macs"] = row.macs;
    if (row.reference) {
      e["reference"] = {{"params", row.reference->params},
                        {"memory_mb", row.reference->memory_mb},
                        {"macs", row.reference->macs}};
    }
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  if (r.trace_cost) j["trace_cost"] = cost_summary_to_json(*r.trace_cost);
  if (r.mean_macs_per_frame) j["mean_macs_per_frame"] = *r.mean_macs_per_frame;
  Json disc = Json::array();
  for (const auto& d : r.discrepancies) {
    Json e;
    e["row"] = d.row;
    e["field"] = d.field;
    e["computed"] = d.computed;
    e["reference"] = d.reference;
    e["relative"] = d.relative;
    disc.push_back(std::move(e));
  }
  j["discrepancies"] = std::move(disc);
  return j;
}

}  // namespace ctxsched
