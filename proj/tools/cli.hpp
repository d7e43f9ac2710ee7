#pragma once

// Command-line front end. Every command reads its declared inputs, writes one
// report file and prints a one-line summary.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 schema, 4 infeasibility, 5 internal.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctxsched/ctxsched.hpp"

namespace ctxsched::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kSchema = 3, kInfeasible = 4, kInternal = 5 };

#ifndef CTXSCHED_DEFAULT_CALIBRATION
#define CTXSCHED_DEFAULT_CALIBRATION "config/calibration.json"
#endif

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out_dir = ".";
  std::string format = "json";
  std::string calibration = CTXSCHED_DEFAULT_CALIBRATION;
};

struct StreamInput {
  std::string path;
  std::string format = "jsonl";
  bool reindex = false;
};

struct PredictionInput {
  std::string predicted;
  double fn = 0.0;
  double fp = 0.0;
  std::optional<std::uint64_t> noise_seed;
};

struct AccuracyInput {
  std::string table;
  double a_max = 0.9;
  double size_slope = 0.02;
};

namespace detail {

inline std::string out_path(const GlobalOptions& g, const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(g.out_dir) / name).string();
}

inline StreamFormat parse_format(const std::string& s) {
  if (s == "jsonl") return StreamFormat::jsonl;
  if (s == "csv") return StreamFormat::csv;
  throw ValidationError("unknown stream format '" + s + "'");
}

/// Loads a stream file; content problems become schema errors.
inline LabelStream load_stream_file(const StreamInput& in) {
  try {
    return load_stream(in.path, parse_format(in.format), LoadOptions{std::nullopt, in.reindex});
  } catch (const ValidationError& e) {
    throw SchemaError(in.path + ": " + e.what());
  } catch (const ParseError& e) {
    throw SchemaError(in.path + ": " + e.what());
  }
}

inline ContextCatalog load_catalog_file(const std::string& path) { return catalog_from_json(load_json_file(path)); }

inline SelectionTrace load_trace_file(const std::string& path) { return trace_from_json(load_json_file(path)); }

inline AccuracyTable resolve_accuracy(const AccuracyInput& a, const ContextCatalog& catalog) {
  if (a.table.empty()) return synthetic_accuracy(catalog, SyntheticAccuracyModel{a.a_max, a.size_slope});
  auto table = accuracy_from_json(load_json_file(a.table));
  try {
    table.check_against(catalog);
  } catch (const ValidationError& e) {
    throw SchemaError(a.table + ": " + e.what());
  }
  return table;
}

inline LabelStream resolve_prediction(const PredictionInput& p, const LabelStream& truth, std::uint64_t seed) {
  if (!p.predicted.empty()) {
    auto pred = load_stream_file(StreamInput{p.predicted, "jsonl", false});
    if (pred.size() != truth.size() || pred.label_count() != truth.label_count()) {
      throw SchemaError("predicted stream does not match ground truth in K or T");
    }
    return pred;
  }
  if (p.fn == 0.0 && p.fp == 0.0) return truth;
  return apply_prediction_noise(truth, NoiseConfig{p.fn, p.fp, p.noise_seed.value_or(seed + 1)});
}

inline Json provenance(const GlobalOptions& g, const std::string& command) {
  Json j;
  j["tool"] = "ctxsched";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = g.seed;
  j["inputs"] = Json::object();
  return j;
}

inline void add_input(Json& prov, const std::string& role, const std::string& path) {
  if (path.empty()) return;
  Json e;
  e["path"] = path;
  e["digest"] = file_digest(path);
  prov["inputs"][role] = std::move(e);
}

inline void write_json(const std::string& path, const Json& j) {
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  write_text_file(path, j.dump(2) + "\n");
}

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

inline void add_stream_options(CLI::App* cmd, StreamInput& s, const std::string& flag = "--stream") {
  cmd->add_option(flag, s.path, "ground-truth stream file")->required();
  cmd->add_option("--stream-format", s.format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  cmd->add_flag("--reindex", s.reindex, "map frame indices with gaps onto 0..T-1");
}

inline void add_prediction_options(CLI::App* cmd, PredictionInput& p) {
  cmd->add_option("--predicted", p.predicted, "predicted (base-model) stream, JSONL");
  cmd->add_option("--noise-fn", p.fn, "false-negative rate used to synthesise predictions")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--noise-fp", p.fp, "false-positive rate used to synthesise predictions")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--noise-seed", p.noise_seed, "noise seed (default: --seed + 1)");
}

inline void add_accuracy_options(CLI::App* cmd, AccuracyInput& a) {
  cmd->add_option("--accuracy", a.table, "accuracy table JSON; synthetic model when omitted");
  cmd->add_option("--a-max", a.a_max, "synthetic model: accuracy of singleton contexts")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--size-slope", a.size_slope, "synthetic model: accuracy loss per extra label")
      ->check(CLI::NonNegativeNumber);
}

inline Json accuracy_provenance(const AccuracyInput& a) {
  Json j;
  if (a.table.empty()) {
    j["mode"] = "synthetic";
    j["a_max"] = a.a_max;
    j["size_slope"] = a.size_slope;
  } else {
    j["mode"] = "table_file";
    j["digest"] = file_digest(a.table);
  }
  return j;
}

inline std::vector<std::vector<Label>> parse_clusters(const std::string& text) {
  if (text.empty()) return {};
  const auto x = text.find('x');
  if (x == std::string::npos) throw ValidationError("--clusters expects NxS, e.g. 4x5");
  try {
    std::size_t pos1 = 0, pos2 = 0;
    const auto n = std::stoul(text.substr(0, x), &pos1);
    const auto s = std::stoul(text.substr(x + 1), &pos2);
    if (pos1 != x || pos2 != text.size() - x - 1) throw std::invalid_argument("trailing");
    return consecutive_clusters(n, s);
  } catch (const std::logic_error&) {
    throw ValidationError("--clusters expects NxS, e.g. 4x5");
  }
}

}  // namespace detail

/// Runs one command line. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Context-aware adapter scheduling simulator"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--jobs", g.jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "directory for default output paths");
  app.add_option("--format", g.format, "json or csv where applicable")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--calibration", g.calibration, "calibration JSON");

  // gen-stream
  auto* gen = app.add_subcommand("gen-stream", "generate a seeded synthetic label stream");
  SyntheticConfig syn;
  std::string clusters_spec, gen_out, gen_fmt = "jsonl", pred_out;
  NoiseConfig gen_noise;
  std::optional<std::uint64_t> gen_noise_seed;
  gen->add_option("--K", syn.label_count, "label universe size")->required();
  gen->add_option("--T", syn.frame_count, "frame count")->required();
  gen->add_option("--clusters", clusters_spec, "planted clusters NxS over consecutive labels");
  gen->add_option("--mean-active", syn.mean_active_labels, "expected labels per frame");
  gen->add_option("--dwell", syn.mean_dwell_frames, "expected frames a label persists");
  gen->add_option("--presence", syn.in_cluster_presence, "member on-probability while its cluster is on");
  gen->add_flag("--exclusive", syn.exclusive_clusters, "at most one planted cluster per frame");
  gen->add_option("--out", gen_out, "output stream path");
  gen->add_option("--stream-format", gen_fmt, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  gen->add_option("--predicted-out", pred_out, "also write a noisy prediction stream (JSONL)");
  gen->add_option("--noise-fn", gen_noise.false_negative_rate, "false-negative rate")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise-fp", gen_noise.false_positive_rate, "false-positive rate")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise-seed", gen_noise_seed, "noise seed (default: --seed + 1)");

  // build-contexts
  auto* build = app.add_subcommand("build-contexts", "build a context catalog from co-occurrence");
  StreamInput build_stream;
  std::size_t budget = 0, max_contexts = 0;
  std::string algo = "greedy", build_out;
  double min_frequency = 0.0;
  add_stream_options(build, build_stream);
  build->add_option("--B", budget, "maximum labels per context")->required()->check(CLI::PositiveNumber);
  build->add_option("--Mmax", max_contexts, "maximum number of contexts")->required()->check(CLI::PositiveNumber);
  build->add_option("--algo", algo, "greedy|nonoverlap|overlap|basic")
      ->check(CLI::IsMember({"greedy", "nonoverlap", "greedy_nonoverlap", "overlap", "greedy_overlap", "basic"}));
  build->add_option("--min-frequency", min_frequency, "labels at or below this frame frequency are ignored");
  build->add_option("--out", build_out, "catalog output path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "replay a stream through greedy context detection");
  StreamInput sim_stream;
  PredictionInput sim_pred;
  AccuracyInput sim_acc;
  std::string sim_catalog, sim_out, sim_policy = "best-effort";
  double sim_tau = 0.0;
  bool sim_copy = false;
  add_stream_options(sim, sim_stream);
  add_prediction_options(sim, sim_pred);
  add_accuracy_options(sim, sim_acc);
  sim->add_option("--catalog", sim_catalog, "catalog JSON")->required();
  sim->add_option("--tau", sim_tau, "accuracy threshold")->check(CLI::Range(0.0, 1.0));
  sim->add_flag("--copy", sim_copy, "enable context copy");
  sim->add_option("--uncoverable", sim_policy, "error or best-effort")
      ->check(CLI::IsMember({"error", "best-effort"}));
  sim->add_option("--out", sim_out, "trace output path");

  // oracle
  auto* orc = app.add_subcommand("oracle", "exact per-frame or whole-sequence selection");
  StreamInput orc_stream;
  AccuracyInput orc_acc;
  std::string orc_catalog, orc_out, orc_mode = "sequence";
  double orc_tau = 0.0;
  OracleConfig orc_cfg;
  add_stream_options(orc, orc_stream);
  add_accuracy_options(orc, orc_acc);
  orc->add_option("--catalog", orc_catalog, "catalog JSON")->required();
  orc->add_option("--tau", orc_tau, "accuracy threshold")->check(CLI::Range(0.0, 1.0));
  orc->add_option("--mode", orc_mode, "per-frame or sequence")->check(CLI::IsMember({"per-frame", "sequence"}));
  orc->add_option("--s-max", orc_cfg.s_max, "max contexts per frame (sequence)")->check(CLI::PositiveNumber);
  orc->add_option("--subset-cap", orc_cfg.subset_cap, "max catalog size (sequence)");
  orc->add_option("--switch-weight", orc_cfg.switch_weight, "weight of the switching term")
      ->check(CLI::NonNegativeNumber);
  orc->add_option("--out", orc_out, "trace output path");

  // metrics
  auto* met = app.add_subcommand("metrics", "clustering and trace metrics");
  StreamInput met_stream;
  AccuracyInput met_acc;
  std::string met_trace, met_catalog, met_out;
  add_stream_options(met, met_stream);
  add_accuracy_options(met, met_acc);
  met->add_option("--trace", met_trace, "trace JSON")->required();
  met->add_option("--catalog", met_catalog, "catalog JSON")->required();
  met->add_option("--out", met_out, "report path");

  // cost
  auto* cost = app.add_subcommand("cost", "latency / power / energy estimate for a trace");
  std::string cost_trace, cost_profile = "adaptive", cost_out;
  std::vector<std::string> cost_compare{"larger"};
  cost->add_option("--trace", cost_trace, "trace JSON")->required();
  cost->add_option("--profile", cost_profile, "calibration profile for the trace");
  cost->add_option("--compare", cost_compare, "fixed profiles to compare against")->delimiter(',');
  cost->add_option("--out", cost_out, "report path");

  // compose-check
  auto* comp = app.add_subcommand("compose-check", "verify merged/unmerged and shared-prefix identities");
  std::size_t comp_instances = 1000, comp_dim = 64, comp_rank = 8, comp_adapters = 5, comp_layers = 10,
              comp_contexts = 3, comp_tokens = 4;
  double comp_fraction = 0.2;
  std::string comp_out;
  comp->add_option("--instances", comp_instances, "random instances")->check(CLI::PositiveNumber);
  comp->add_option("--max-dim", comp_dim, "largest h or d")->check(CLI::PositiveNumber);
  comp->add_option("--max-rank", comp_rank, "largest adapter rank")->check(CLI::PositiveNumber);
  comp->add_option("--max-adapters", comp_adapters, "most adapters per instance");
  comp->add_option("--layers", comp_layers, "layers in the stacked check")->check(CLI::PositiveNumber);
  comp->add_option("--fraction", comp_fraction, "adapted fraction in the stacked check")->check(CLI::Range(0.0, 1.0));
  comp->add_option("--contexts", comp_contexts, "contexts in the stacked check");
  comp->add_option("--tokens", comp_tokens, "input rows")->check(CLI::PositiveNumber);
  comp->add_option("--out", comp_out, "report path");

  // analyze-arch
  auto* arch = app.add_subcommand("analyze-arch", "parameter / memory / MAC accounting");
  std::string arch_preset = "deit-tiny", arch_trace, arch_profile = "adaptive", arch_out;
  std::size_t arch_contexts = 11;
  std::optional<std::size_t> arch_heads;
  arch->add_option("--preset", arch_preset, "architecture preset from the calibration file");
  arch->add_option("--contexts", arch_contexts, "number of deployed contexts");
  arch->add_option("--head-classes", arch_heads, "override classes per context head");
  arch->add_option("--trace", arch_trace, "optional trace for cost summary");
  arch->add_option("--profile", arch_profile, "calibration profile");
  arch->add_option("--out", arch_out, "report path");

  // sweep
  auto* sw = app.add_subcommand("sweep", "cross-product of budgets, variants, thresholds and policies");
  StreamInput sw_stream;
  PredictionInput sw_pred;
  AccuracyInput sw_acc;
  std::vector<std::size_t> sw_budgets;
  std::vector<std::string> sw_variants, sw_policies;
  std::vector<double> sw_taus;
  std::optional<std::size_t> sw_mmax;
  std::size_t sw_mmax_overlap = 50;
  std::string sw_profile = "adaptive", sw_out;
  add_stream_options(sw, sw_stream);
  add_prediction_options(sw, sw_pred);
  add_accuracy_options(sw, sw_acc);
  sw->add_option("--B", sw_budgets, "context budgets, comma separated")->delimiter(',');
  sw->add_option("--variants", sw_variants, "basic,nonoverlap,overlap")->delimiter(',');
  sw->add_option("--tau", sw_taus, "thresholds")->delimiter(',');
  sw->add_option("--policies", sw_policies, "greedy,copy,oracle")->delimiter(',');
  sw->add_option("--Mmax", sw_mmax, "fixed M_max for all cells");
  sw->add_option("--Mmax-overlap", sw_mmax_overlap, "minimum M_max for the overlapping variant");
  sw->add_option("--profile", sw_profile, "calibration profile for cost columns");
  sw->add_option("--out", sw_out, "CSV output path");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*gen) {
      syn.clusters = parse_clusters(clusters_spec);
      syn.seed = g.seed;
      auto stream = generate_synthetic_stream(syn);
      const auto path = out_path(g, gen_out, gen_fmt == "csv" ? "stream.csv" : "stream.jsonl");
      if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      save_stream(path, stream, parse_format(gen_fmt));
      auto prov = provenance(g, "gen-stream");
      Json rep;
      rep["provenance"] = prov;
      rep["K"] = syn.label_count;
      rep["T"] = syn.frame_count;
      rep["clusters"] = clusters_spec;
      rep["mean_active_labels"] = syn.mean_active_labels;
      rep["mean_dwell_frames"] = syn.mean_dwell_frames;
      rep["in_cluster_presence"] = syn.in_cluster_presence;
      rep["exclusive_clusters"] = syn.exclusive_clusters;
      rep["stream_path"] = path;
      rep["stream_digest"] = file_digest(path);
      double mean = 0.0;
      for (const auto& f : stream.frames()) mean += static_cast<double>(f.labels.size());
      if (!stream.empty()) mean /= static_cast<double>(stream.size());
      rep["empirical_mean_active"] = mean;
      if (!pred_out.empty()) {
        gen_noise.seed = gen_noise_seed.value_or(g.seed + 1);
        save_stream(pred_out, apply_prediction_noise(stream, gen_noise), StreamFormat::jsonl);
        rep["predicted_path"] = pred_out;
        rep["predicted_digest"] = file_digest(pred_out);
        rep["noise"] = {{"false_negative_rate", gen_noise.false_negative_rate},
                        {"false_positive_rate", gen_noise.false_positive_rate},
                        {"seed", gen_noise.seed}};
      }
      write_json(path + ".report.json", rep);
      out << "gen-stream: K=" << syn.label_count << " T=" << syn.frame_count << " mean|Y|=" << fmt(mean, 3)
          << " digest=" << rep["stream_digest"].get<std::string>() << " -> " << path << "\n";
      return kOk;
    }

    if (*build) {
      auto stream = load_stream_file(build_stream);
      auto matrix = build_cooccurrence(stream);
      auto valid = valid_labels(matrix, min_frequency);
      const auto variant = parse_variant(algo);
      auto catalog = build_contexts(matrix, valid, budget, max_contexts, variant, BuildOptions{g.seed});
      auto report = validate_catalog(catalog, valid);
      auto j = catalog_to_json(catalog);
      auto prov = provenance(g, "build-contexts");
      add_input(prov, "stream", build_stream.path);
      j["provenance"] = prov;
      j["requested_M_max"] = max_contexts;
      j["valid_labels"] = valid.size();
      j["min_frequency"] = min_frequency;
      j["catalog_hash"] = catalog_hash(catalog);
      Json viol = Json::array();
      for (const auto& v : report.violations) viol.push_back(to_string(v.kind) + ": " + v.message);
      j["violations"] = viol;
      const auto path = out_path(g, build_out, "catalog.json");
      write_json(path, j);
      out << "build-contexts: " << to_string(variant) << " B=" << budget << " M_max=" << max_contexts
          << " realized=" << catalog.size() << " valid=" << (report.ok() ? "yes" : "no") << " -> " << path << "\n";
      return report.ok() ? kOk : kInternal;
    }

    if (*sim) {
      auto truth = load_stream_file(sim_stream);
      auto pred = resolve_prediction(sim_pred, truth, g.seed);
      auto catalog = load_catalog_file(sim_catalog);
      auto acc = resolve_accuracy(sim_acc, catalog);
      DetectorConfig cfg{sim_tau, sim_copy,
                         sim_policy == "error" ? UncoverablePolicy::error : UncoverablePolicy::best_effort};
      auto trace = run_simulation(truth, pred, catalog, acc, cfg);
      const auto hash = catalog_hash(catalog);
      const auto path = out_path(g, sim_out, g.format == "csv" ? "trace.csv" : "trace.json");
      if (g.format == "csv") {
        write_text_file(path, trace_to_csv(trace));
      } else {
        auto j = trace_to_json(trace, hash);
        auto prov = provenance(g, "simulate");
        add_input(prov, "stream", sim_stream.path);
        add_input(prov, "predicted", sim_pred.predicted);
        add_input(prov, "catalog", sim_catalog);
        prov["accuracy"] = accuracy_provenance(sim_acc);
        prov["noise"] = {{"false_negative_rate", sim_pred.fn}, {"false_positive_rate", sim_pred.fp}};
        j["header"]["provenance"] = prov;
        j["header"]["uncoverable_policy"] = sim_policy;
        write_json(path, j);
      }
      out << "simulate: policy=" << trace.policy << " tau=" << fmt(sim_tau, 3) << " frames=" << trace.size()
          << " avg_coverage=" << (trace.empty() ? "n/a" : fmt(avg_coverage(trace))) << " switches="
          << switch_penalty(trace) << " -> " << path << "\n";
      return kOk;
    }

    if (*orc) {
      auto truth = load_stream_file(orc_stream);
      auto catalog = load_catalog_file(orc_catalog);
      auto acc = resolve_accuracy(orc_acc, catalog);
      SelectionTrace trace;
      Json extra;
      if (orc_mode == "per-frame") {
        trace = per_frame_oracle(truth, catalog, acc, orc_tau);
      } else {
        auto res = sequence_oracle(truth, catalog, acc, orc_tau, orc_cfg);
        trace = std::move(res.trace);
        extra["objective"] = res.objective;
        extra["s_max"] = res.s_max;
        extra["exact"] = res.exact;
        extra["switch_weight"] = orc_cfg.switch_weight;
      }
      const auto path = out_path(g, orc_out, g.format == "csv" ? "oracle_trace.csv" : "oracle_trace.json");
      if (g.format == "csv") {
        write_text_file(path, trace_to_csv(trace));
      } else {
        auto j = trace_to_json(trace, catalog_hash(catalog));
        auto prov = provenance(g, "oracle");
        add_input(prov, "stream", orc_stream.path);
        add_input(prov, "catalog", orc_catalog);
        prov["accuracy"] = accuracy_provenance(orc_acc);
        j["header"]["provenance"] = prov;
        if (!extra.is_null()) j["header"]["oracle"] = extra;
        write_json(path, j);
      }
      out << "oracle: policy=" << trace.policy << " frames=" << trace.size()
          << " avg_coverage=" << (trace.empty() ? "n/a" : fmt(avg_coverage(trace)))
          << " objective=" << fmt(selection_objective(trace, orc_cfg.switch_weight), 1) << " -> " << path << "\n";
      return kOk;
    }

    if (*met) {
      auto truth = load_stream_file(met_stream);
      auto catalog = load_catalog_file(met_catalog);
      auto trace = load_trace_file(met_trace);
      auto problems = check_trace(trace, catalog);
      if (!problems.empty()) throw SchemaError("trace does not match catalog: " + problems.front());
      auto acc = resolve_accuracy(met_acc, catalog);
      auto matrix = build_cooccurrence(truth);
      auto m = compute_metrics(trace, catalog, acc, matrix);
      Json j;
      auto prov = provenance(g, "metrics");
      add_input(prov, "stream", met_stream.path);
      add_input(prov, "catalog", met_catalog);
      add_input(prov, "trace", met_trace);
      prov["accuracy"] = accuracy_provenance(met_acc);
      prov["catalog_hash"] = catalog_hash(catalog);
      prov["policy"] = trace.policy;
      prov["tau"] = trace.tau;
      j["provenance"] = prov;
      j["metrics"] = metrics_to_json(m);
      const auto path = out_path(g, met_out, "metrics.json");
      write_json(path, j);
      out << "metrics: intra=" << fmt(m.intra_coherence) << " avg_coverage=" << fmt(m.avg_coverage)
          << " switch_penalty=" << m.switch_penalty << " symdiff=" << m.switch_cost_symdiff
          << " score_proxy=" << fmt(m.coverage_weighted_score) << " -> " << path << "\n";
      return kOk;
    }

    if (*cost) {
      auto trace = load_trace_file(cost_trace);
      auto calib = load_calibration(g.calibration);
      const auto& params = calib.profile(cost_profile);
      auto est = estimate_latency_power(trace, params);
      Json j;
      auto prov = provenance(g, "cost");
      add_input(prov, "trace", cost_trace);
      add_input(prov, "calibration", g.calibration);
      prov["calibration_source"] = calib.source;
      j["provenance"] = prov;
      j["profile"] = cost_profile;
      j["params"] = cost_params_to_json(params);
      j["summary"] = cost_summary_to_json(est.summary);
      j["avg_coverage"] = trace.empty() ? 0.0 : avg_coverage(trace);
      Json cmp = Json::array();
      for (const auto& name : cost_compare) {
        auto other = estimate_latency_power(trace, calib.profile(name)).summary;
        Json e;
        e["profile"] = name;
        e["summary"] = cost_summary_to_json(other);
        e["power_ratio"] = other.mean_power_w > 0 ? est.summary.mean_power_w / other.mean_power_w : 0.0;
        e["energy_ratio"] = other.energy_per_frame_j > 0 ? est.summary.energy_per_frame_j / other.energy_per_frame_j : 0.0;
        e["latency_ratio"] = other.mean_latency_ms > 0 ? est.summary.mean_latency_ms / other.mean_latency_ms : 0.0;
        cmp.push_back(std::move(e));
      }
      j["comparisons"] = cmp;
      Json series = Json::array();
      for (std::size_t t = 0; t < est.latency_ms.size(); ++t) {
        series.push_back({{"t", t}, {"latency_ms", est.latency_ms[t]}, {"power_w", est.power_w[t]}});
      }
      j["series"] = series;
      const auto path = out_path(g, cost_out, "cost.json");
      write_json(path, j);
      out << "cost: profile=" << cost_profile << " mean_power=" << fmt(est.summary.mean_power_w, 3)
          << " W mean_latency=" << fmt(est.summary.mean_latency_ms, 2)
          << " ms energy/frame=" << fmt(est.summary.energy_per_frame_j, 4) << " J -> " << path << "\n";
      return kOk;
    }

    if (*comp) {
      Rng rng(g.seed);
      double worst_merge = 0.0, worst_stack = 0.0;
      for (std::size_t i = 0; i < comp_instances; ++i) {
        const auto h = 1 + rng.below(comp_dim);
        const auto d = 1 + rng.below(comp_dim);
        const auto n = 1 + rng.below(comp_tokens);
        const auto max_r = std::min({comp_rank, h, d});
        const auto k = rng.below(comp_adapters + 1);
        auto x = DenseMatrix::random(n, h, rng);
        auto w = DenseMatrix::random(h, d, rng);
        std::vector<LoraPair> adapters;
        for (std::size_t a = 0; a < k; ++a) adapters.push_back(LoraPair::random(h, d, 1 + rng.below(max_r), rng));
        worst_merge = std::max(worst_merge,
                               max_relative_error(forward_merged(x, w, adapters), forward_unmerged(x, w, adapters)));
      }
      const std::size_t dim = std::min<std::size_t>(comp_dim, 16);
      std::vector<DenseMatrix> weights;
      for (std::size_t l = 0; l < comp_layers; ++l) weights.push_back(DenseMatrix::random(dim, dim, rng, 0.5));
      LayerStack stack(weights, comp_fraction);
      const auto x = DenseMatrix::random(comp_tokens, dim, rng);
      std::vector<ContextAdapters> ctx(comp_contexts);
      for (auto& c : ctx) {
        for (std::size_t l = stack.first_adapted_layer(); l < stack.size(); ++l) {
          c.by_layer[l].push_back(LoraPair::random(dim, dim, std::min(comp_rank, dim), rng));
        }
      }
      auto stacked = stacked_forward(stack, x, ctx);
      for (std::size_t c = 0; c < ctx.size(); ++c) {
        DenseMatrix h = x;
        for (std::size_t l = 0; l < stack.size(); ++l) {
          auto it = ctx[c].by_layer.find(l);
          h = forward_unmerged(h, stack.weight(l), it == ctx[c].by_layer.end() ? std::vector<LoraPair>{} : it->second);
        }
        worst_stack = std::max(worst_stack, max_relative_error(h, stacked.per_context[c]));
      }
      Json j;
      j["provenance"] = provenance(g, "compose-check");
      j["instances"] = comp_instances;
      j["max_relative_error_merged_vs_unmerged"] = worst_merge;
      j["max_relative_error_stacked_vs_naive"] = worst_stack;
      j["stack"] = {{"layers", stack.size()},
                    {"adapted_layers", stack.adapted_layer_count()},
                    {"contexts", comp_contexts},
                    {"prefix_macs", stacked.ops.prefix},
                    {"suffix_base_macs", stacked.ops.suffix_base},
                    {"low_rank_macs", stacked.ops.low_rank},
                    {"total_macs", stacked.ops.total()}};
      const auto path = out_path(g, comp_out, "compose_check.json");
      write_json(path, j);
      out << "compose-check: merged-vs-unmerged max rel err " << worst_merge << ", stacked-vs-naive " << worst_stack
          << ", stacked MACs " << stacked.ops.total() << " -> " << path << "\n";
      const bool ok = worst_merge <= 1e-6 && worst_stack <= 1e-6;
      return ok ? kOk : kInternal;
    }

    if (*arch) {
      auto calib = load_calibration(g.calibration);
      auto params = calib.preset(arch_preset);
      if (arch_heads) params.head_classes = *arch_heads;
      const auto& profile = calib.profile(arch_profile);
      std::optional<SelectionTrace> trace;
      if (!arch_trace.empty()) trace = load_trace_file(arch_trace);
      auto rep = profile_report(params, arch_contexts, trace ? &*trace : nullptr, profile, &calib, arch_profile);
      Json j;
      auto prov = provenance(g, "analyze-arch");
      add_input(prov, "calibration", g.calibration);
      add_input(prov, "trace", arch_trace);
      j["provenance"] = prov;
      j["preset"] = arch_preset;
      j["arch"] = arch_to_json(params);
      j["report"] = profile_report_to_json(rep);
      const auto path = out_path(g, arch_out, "arch.json");
      write_json(path, j);
      const double params_total = rep.rows.back().params;
      out << "analyze-arch: " << arch_preset << " contexts=" << arch_contexts << " params "
          << fmt(params_total / 1e6, 2) << " M (catalog +" << fmt(static_cast<double>(rep.catalog_params) / 1e6, 3)
          << " M), MAC delta " << fmt(static_cast<double>(rep.mac_overhead_per_adapter) / 1e6, 2)
          << " M per adapter -> " << path << "\n";
      return kOk;
    }

    if (*sw) {
      SweepGrid grid;
      grid.budgets = sw_budgets;
      for (const auto& v : sw_variants) grid.variants.push_back(parse_variant(v));
      grid.taus = sw_taus;
      for (const auto& p : sw_policies) grid.policies.push_back(parse_policy(p));
      grid.max_contexts = sw_mmax;
      grid.overlap_max_contexts = sw_mmax_overlap;
      if (grid.empty()) throw ValidationError("sweep grid is empty: give --B, --variants, --tau and --policies");
      for (double t : grid.taus) {
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("tau must lie in [0, 1]");
      }
      for (auto b : grid.budgets) {
        if (b == 0) throw ValidationError("budgets must be positive");
      }
      auto truth = load_stream_file(sw_stream);
      auto pred = resolve_prediction(sw_pred, truth, g.seed);
      auto calib = load_calibration(g.calibration);
      SweepInputs in;
      in.truth = &truth;
      in.predicted = &pred;
      in.accuracy = SyntheticAccuracyModel{sw_acc.a_max, sw_acc.size_slope};
      in.cost = calib.profile(sw_profile);
      in.seed = g.seed;
      in.jobs = g.jobs;
      auto result = run_sweep(grid, in);
      std::vector<std::string> prov{
          std::string("tool=ctxsched ") + kVersion,
          "stream_digest=" + file_digest(sw_stream.path),
          "predicted=" + (sw_pred.predicted.empty() ? std::string("noise fn=") + fmt(sw_pred.fn, 4) +
                                                          " fp=" + fmt(sw_pred.fp, 4) +
                                                          " seed=" + std::to_string(sw_pred.noise_seed.value_or(g.seed + 1))
                                                    : "file digest=" + file_digest(sw_pred.predicted)),
          "seed=" + std::to_string(g.seed),
          "accuracy=synthetic a_max=" + fmt(sw_acc.a_max, 4) + " size_slope=" + fmt(sw_acc.size_slope, 4),
          "calibration=" + file_digest(g.calibration) + " profile=" + sw_profile,
          "score_proxy=coverage-weighted accuracy proxy, not mAP"};
      const auto path = out_path(g, sw_out, "sweep.csv");
      if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      write_text_file(path, sweep_to_csv(result, prov));
      std::size_t failed = 0;
      for (const auto& r : result.clustering) failed += !r.error.empty();
      for (const auto& r : result.policies) failed += !r.error.empty();
      out << "sweep: " << result.clustering.size() << " clustering rows, " << result.policies.size()
          << " policy rows, " << failed << " failed cells -> " << path << "\n";
      return kOk;
    }
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchema;
  } catch (const ParseError& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchema;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace ctxsched::cli
