#pragma once

// Multi-label frame streams: representation, file ingestion (JSONL / CSV),
// seeded synthetic generation and i.i.d. prediction noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctxsched/error.hpp"
#include "ctxsched/random.hpp"
#include "ctxsched/sorted_set.hpp"

namespace ctxsched {

struct Frame {
  std::size_t index = 0;
  LabelSet labels;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Ordered, gap-free sequence of frames over the label universe [0, K).
class LabelStream {
 public:
  LabelStream() = default;

  /// Frame indices must be 0..T-1 in order and every label < label_count.
  LabelStream(std::size_t label_count, std::vector<Frame> frames)
      : label_count_(label_count), frames_(std::move(frames)) {
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      if (frames_[t].index != t) {
        throw ValidationError("frame indices must be contiguous from 0; expected " +
                              std::to_string(t) + ", found " + std::to_string(frames_[t].index));
      }
      if (!frames_[t].labels.empty() && frames_[t].labels.back() >= label_count_) {
        throw ValidationError("frame " + std::to_string(t) + " has label " +
                              std::to_string(frames_[t].labels.back()) +
                              " outside universe of size " + std::to_string(label_count_));
      }
    }
  }

  /// Convenience: frames given as label sets, indexed by position.
  static LabelStream from_sets(std::size_t label_count, const std::vector<LabelSet>& sets) {
    std::vector<Frame> frames;
    frames.reserve(sets.size());
    for (std::size_t t = 0; t < sets.size(); ++t) frames.push_back(Frame{t, sets[t]});
    return LabelStream(label_count, std::move(frames));
  }

  std::size_t label_count() const noexcept { return label_count_; }
  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const LabelSet& labels(std::size_t t) const { return frames_.at(t).labels; }

  friend bool operator==(const LabelStream&, const LabelStream&) = default;

 private:
  std::size_t label_count_ = 0;
  std::vector<Frame> frames_;
};

enum class StreamFormat { jsonl, csv };

struct LoadOptions {
  /// Overrides both inference and any header in the file.
  std::optional<std::size_t> label_count;
  /// Map the distinct frame indices onto 0..T-1 instead of rejecting gaps.
  bool reindex = false;
};

namespace detail {

inline LabelStream assemble_stream(std::map<std::int64_t, std::vector<std::int64_t>>& by_frame,
                                   std::optional<std::size_t> header_k, const LoadOptions& opts) {
  std::int64_t max_label = -1;
  for (auto& [t, labels] : by_frame) {
    for (auto l : labels) max_label = std::max(max_label, l);
  }
  const auto inferred = static_cast<std::size_t>(max_label + 1);
  std::size_t k = inferred;
  if (opts.label_count) {
    k = *opts.label_count;
  } else if (header_k) {
    k = *header_k;
  }
  if (k < inferred) {
    throw ValidationError("label count " + std::to_string(k) + " is smaller than max label id + 1 (" +
                          std::to_string(inferred) + ")");
  }

  std::vector<Frame> frames;
  frames.reserve(by_frame.size());
  std::size_t expected = 0;
  for (auto& [t, labels] : by_frame) {
    if (!opts.reindex && static_cast<std::size_t>(t) != expected) {
      throw ValidationError("non-contiguous frame indices: missing frame " + std::to_string(expected) +
                            " (next present is " + std::to_string(t) + ")");
    }
    std::vector<Label> ls;
    ls.reserve(labels.size());
    for (auto l : labels) ls.push_back(static_cast<Label>(l));
    frames.push_back(Frame{expected, LabelSet(std::move(ls))});
    ++expected;
  }
  return LabelStream(k, std::move(frames));
}

inline std::int64_t require_non_negative(std::int64_t v, std::size_t line, const char* what) {
  if (v < 0) {
    throw ValidationError("line " + std::to_string(line) + ": negative " + what + " " + std::to_string(v));
  }
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line, const char* field) {
  s = trim(s);
  if (s.empty()) throw ParseError(line, std::string("empty ") + field);
  std::int64_t v = 0;
  std::size_t pos = 0;
  try {
    v = std::stoll(std::string(s), &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("invalid integer for ") + field + ": '" + std::string(s) + "'");
  }
  if (pos != s.size()) {
    throw ParseError(line, std::string("invalid integer for ") + field + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Reads one record per line: `{"t":0,"labels":[1,3]}`. An optional first
/// record `{"K":n}` declares the universe size. Repeated frame indices merge.
inline LabelStream read_jsonl(std::istream& in, const LoadOptions& opts = {}) {
  std::map<std::int64_t, std::vector<std::int64_t>> by_frame;
  std::optional<std::size_t> header_k;
  std::string line;
  std::size_t line_no = 0;
  bool seen_record = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record is not an object");
    if (!rec.contains("t")) {
      if (rec.contains("K") && !seen_record && !header_k) {
        if (!rec["K"].is_number_integer()) throw ParseError(line_no, "header K must be an integer");
        header_k = static_cast<std::size_t>(
            detail::require_non_negative(rec["K"].get<std::int64_t>(), line_no, "label count"));
        continue;
      }
      throw ParseError(line_no, "record has no frame index 't'");
    }
    seen_record = true;
    if (!rec["t"].is_number_integer()) throw ParseError(line_no, "'t' must be an integer");
    if (!rec.contains("labels") || !rec["labels"].is_array()) {
      throw ParseError(line_no, "record has no 'labels' array");
    }
    const auto t = detail::require_non_negative(rec["t"].get<std::int64_t>(), line_no, "frame index");
    auto& labels = by_frame[t];
    for (const auto& l : rec["labels"]) {
      if (!l.is_number_integer()) throw ParseError(line_no, "label ids must be integers");
      labels.push_back(detail::require_non_negative(l.get<std::int64_t>(), line_no, "label id"));
    }
  }
  return detail::assemble_stream(by_frame, header_k, opts);
}

/// Reads `t,label` rows. `#K=n` declares the universe size; a row with an
/// empty label (`t,`) records an empty frame.
inline LabelStream read_csv(std::istream& in, const LoadOptions& opts = {}) {
  std::map<std::int64_t, std::vector<std::int64_t>> by_frame;
  std::optional<std::size_t> header_k;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = detail::trim(line);
    if (row.empty()) continue;
    if (row.front() == '#') {
      if (row.substr(0, 3) == "#K=") {
        header_k = static_cast<std::size_t>(detail::require_non_negative(
            detail::parse_int(row.substr(3), line_no, "K"), line_no, "label count"));
      }
      continue;
    }
    if (row == "t,label") continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError(line_no, "expected two columns 't,label'");
    }
    const auto t = detail::require_non_negative(detail::parse_int(row.substr(0, comma), line_no, "t"),
                                                line_no, "frame index");
    auto& labels = by_frame[t];
    const auto label_field = detail::trim(row.substr(comma + 1));
    if (!label_field.empty()) {
      labels.push_back(detail::require_non_negative(detail::parse_int(label_field, line_no, "label"),
                                                    line_no, "label id"));
    }
  }
  return detail::assemble_stream(by_frame, header_k, opts);
}

inline void write_jsonl(std::ostream& out, const LabelStream& stream) {
  out << "{\"K\":" << stream.label_count() << "}\n";
  for (const auto& f : stream.frames()) {
    out << "{\"t\":" << f.index << ",\"labels\":[";
    bool first = true;
    for (auto l : f.labels) {
      if (!first) out << ',';
      out << l;
      first = false;
    }
    out << "]}\n";
  }
}

inline void write_csv(std::ostream& out, const LabelStream& stream) {
  out << "#K=" << stream.label_count() << "\n";
  out << "t,label\n";
  for (const auto& f : stream.frames()) {
    if (f.labels.empty()) {
      out << f.index << ",\n";
      continue;
    }
    for (auto l : f.labels) out << f.index << ',' << l << '\n';
  }
}

inline LabelStream load_stream(const std::string& path, StreamFormat format, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stream file '" + path + "'");
  return format == StreamFormat::jsonl ? read_jsonl(in, opts) : read_csv(in, opts);
}

inline void save_stream(const std::string& path, const LabelStream& stream, StreamFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stream file '" + path + "'");
  if (format == StreamFormat::jsonl) {
    write_jsonl(out, stream);
  } else {
    write_csv(out, stream);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Keeps the streams accepted by `keep`, e.g. a per-video quality filter.
inline std::vector<LabelStream> filter_streams(const std::vector<LabelStream>& streams,
                                               const std::function<bool(const LabelStream&)>& keep) {
  std::vector<LabelStream> out;
  std::copy_if(streams.begin(), streams.end(), std::back_inserter(out), keep);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation

struct SyntheticConfig {
  std::size_t label_count = 0;
  std::size_t frame_count = 0;
  /// Planted label groups; must be pairwise disjoint and inside [0, K).
  std::vector<std::vector<Label>> clusters;
  double mean_active_labels = 1.0;
  /// Expected number of consecutive frames a label (or cluster) stays on.
  double mean_dwell_frames = 10.0;
  /// Stationary probability that a member label is on while its cluster is on.
  double in_cluster_presence = 0.5;
  /// At most one cluster is on per frame: zero cross-cluster co-occurrence.
  bool exclusive_clusters = false;
  std::uint64_t seed = 0;
};

/// `n` consecutive groups of `size` labels starting at label 0.
inline std::vector<std::vector<Label>> consecutive_clusters(std::size_t n, std::size_t size) {
  std::vector<std::vector<Label>> out(n);
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t i = 0; i < size; ++i) out[g].push_back(static_cast<Label>(g * size + i));
  }
  return out;
}

namespace detail {

/// Two-state on/off chain with a given stationary on-probability and mean on-dwell.
struct OnOffChain {
  double p_on_to_off = 0.0;
  double p_off_to_on = 0.0;
  double stationary = 0.0;

  OnOffChain() = default;
  OnOffChain(double stationary_on, double dwell) : stationary(stationary_on) {
    if (stationary_on <= 0.0) {
      p_on_to_off = 1.0;
      p_off_to_on = 0.0;
    } else if (stationary_on >= 1.0) {
      p_on_to_off = 0.0;
      p_off_to_on = 1.0;
    } else {
      p_on_to_off = 1.0 / dwell;
      p_off_to_on = stationary_on * p_on_to_off / (1.0 - stationary_on);
      if (p_off_to_on > 1.0) {
        p_off_to_on = 1.0;
        p_on_to_off = (1.0 - stationary_on) / stationary_on;
      }
    }
  }

  bool initial(Rng& rng) const { return rng.bernoulli(stationary); }
  bool step(bool on, Rng& rng) const {
    return on ? !rng.bernoulli(p_on_to_off) : rng.bernoulli(p_off_to_on);
  }
};

}  // namespace detail

inline void validate(const SyntheticConfig& c) {
  if (!(c.mean_active_labels > 0.0)) throw ValidationError("mean_active_labels must be positive");
  if (c.mean_active_labels > static_cast<double>(c.label_count)) {
    throw ValidationError("mean_active_labels exceeds K");
  }
  if (!(c.mean_dwell_frames >= 1.0)) throw ValidationError("mean_dwell_frames must be >= 1");
  if (!(c.in_cluster_presence > 0.0 && c.in_cluster_presence <= 1.0)) {
    throw ValidationError("in_cluster_presence must be in (0, 1]");
  }
  std::vector<char> used(c.label_count, 0);
  for (const auto& g : c.clusters) {
    if (g.empty()) throw ValidationError("planted cluster is empty");
    for (auto l : g) {
      if (l >= c.label_count) throw ValidationError("planted cluster label " + std::to_string(l) + " >= K");
      if (used[l]) throw ValidationError("label " + std::to_string(l) + " belongs to two planted clusters");
      used[l] = 1;
    }
  }
}

/// Per-label on/off processes modulated by planted cluster membership. Each
/// label has stationary on-probability mean_active_labels / K, so the expected
/// frame size equals mean_active_labels. A clustered label is on only while
/// its cluster's latent process is on, which plants co-occurrence.
inline LabelStream generate_synthetic_stream(const SyntheticConfig& config) {
  validate(config);
  const std::size_t k = config.label_count;
  if (config.frame_count == 0) return LabelStream(k, {});

  const double p = config.mean_active_labels / static_cast<double>(k);
  const std::size_t n_clusters = config.clusters.size();
  double presence = std::max(config.in_cluster_presence, p);
  if (config.exclusive_clusters) {
    presence = std::max(presence, p * static_cast<double>(n_clusters));
    if (presence > 1.0 + 1e-12) {
      throw ValidationError("exclusive clusters cannot reach mean_active_labels");
    }
    presence = std::min(presence, 1.0);
  }
  const double cluster_on = p / presence;

  std::vector<int> cluster_of(k, -1);
  for (std::size_t g = 0; g < n_clusters; ++g) {
    for (auto l : config.clusters[g]) cluster_of[l] = static_cast<int>(g);
  }

  const double dwell = config.mean_dwell_frames;
  const detail::OnOffChain member_chain(presence, dwell);
  const detail::OnOffChain free_chain(p, dwell);
  const detail::OnOffChain cluster_chain(cluster_on, dwell);

  Rng rng(config.seed);
  // Exclusive mode: scene in {-1 (none), 0..G-1}, redrawn from its stationary
  // law with probability 1/dwell per frame.
  auto draw_scene = [&]() -> int {
    double u = rng.uniform();
    for (std::size_t g = 0; g < n_clusters; ++g) {
      if (u < cluster_on) return static_cast<int>(g);
      u -= cluster_on;
    }
    return -1;
  };

  std::vector<char> cluster_state(n_clusters, 0);
  int scene = -1;
  if (config.exclusive_clusters) {
    scene = draw_scene();
  } else {
    for (auto& s : cluster_state) s = cluster_chain.initial(rng);
  }
  std::vector<char> label_state(k, 0);
  for (std::size_t l = 0; l < k; ++l) {
    label_state[l] = (cluster_of[l] >= 0 ? member_chain : free_chain).initial(rng);
  }

  std::vector<Frame> frames;
  frames.reserve(config.frame_count);
  for (std::size_t t = 0; t < config.frame_count; ++t) {
    if (t > 0) {
      if (config.exclusive_clusters) {
        if (rng.bernoulli(1.0 / dwell)) scene = draw_scene();
      } else {
        for (auto& s : cluster_state) s = cluster_chain.step(s, rng);
      }
      for (std::size_t l = 0; l < k; ++l) {
        label_state[l] = (cluster_of[l] >= 0 ? member_chain : free_chain).step(label_state[l], rng);
      }
    }
    std::vector<Label> on;
    for (std::size_t l = 0; l < k; ++l) {
      if (!label_state[l]) continue;
      const int g = cluster_of[l];
      const bool group_on =
          g < 0 || (config.exclusive_clusters ? scene == g : cluster_state[static_cast<std::size_t>(g)] != 0);
      if (group_on) on.push_back(static_cast<Label>(l));
    }
    frames.push_back(Frame{t, LabelSet(std::move(on))});
  }
  return LabelStream(k, std::move(frames));
}

// ---------------------------------------------------------------------------
// Prediction noise

struct NoiseConfig {
  double false_negative_rate = 0.0;
  double false_positive_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Drops each present label with probability p_fn and inserts each absent
/// label with probability p_fp, independently per (frame, label).
inline LabelStream apply_prediction_noise(const LabelStream& stream, const NoiseConfig& noise) {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(noise.false_negative_rate) || !in_unit(noise.false_positive_rate)) {
    throw ValidationError("noise rates must lie in [0, 1]");
  }
  Rng rng(noise.seed);
  std::vector<Frame> frames;
  frames.reserve(stream.size());
  for (const auto& f : stream.frames()) {
    std::vector<Label> out;
    for (std::size_t l = 0; l < stream.label_count(); ++l) {
      const double u = rng.uniform();
      const bool present = f.labels.contains(static_cast<Label>(l));
      if (present ? u >= noise.false_negative_rate : u < noise.false_positive_rate) {
        out.push_back(static_cast<Label>(l));
      }
    }
    frames.push_back(Frame{f.index, LabelSet(std::move(out))});
  }
  return LabelStream(stream.label_count(), std::move(frames));
}

/// Mean over consecutive frame pairs of |Y_t ∩ Y_{t+1}| / max(1, |Y_t|).
inline double temporal_overlap(const LabelStream& stream) {
  if (stream.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
    const auto& a = stream.labels(t);
    const auto common = set_intersection(a, stream.labels(t + 1)).size();
    sum += static_cast<double>(common) / static_cast<double>(std::max<std::size_t>(1, a.size()));
  }
  return sum / static_cast<double>(stream.size() - 1);
}

/// Same frames in a seeded random order; the control for temporal_overlap.
inline LabelStream shuffle_frames(const LabelStream& stream, std::uint64_t seed) {
  std::vector<LabelSet> sets;
  for (const auto& f : stream.frames()) sets.push_back(f.labels);
  Rng rng(seed);
  rng.shuffle(sets);
  return LabelStream::from_sets(stream.label_count(), sets);
}

}  // namespace ctxsched
