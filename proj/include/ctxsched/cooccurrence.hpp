#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <vector>

#include "ctxsched/error.hpp"
#include "ctxsched/stream.hpp"

namespace ctxsched {

/// Frame-level label co-occurrence. co(i, j) is the fraction of frames that
/// contain both i and j; the diagonal holds each label's own frame frequency.
class CooccurrenceMatrix {
 public:
  CooccurrenceMatrix() = default;

  /// Builds from raw pair counts (row-major K*K, symmetric).
  CooccurrenceMatrix(std::size_t label_count, std::size_t frame_count, std::vector<std::uint64_t> counts)
      : k_(label_count), frames_(frame_count), counts_(std::move(counts)) {
    if (counts_.size() != k_ * k_) throw ValidationError("co-occurrence counts must be K*K");
  }

  std::size_t label_count() const noexcept { return k_; }
  std::size_t frame_count() const noexcept { return frames_; }

  std::uint64_t count(Label i, Label j) const { return counts_[index(i, j)]; }

  double value(Label i, Label j) const {
    if (frames_ == 0) return 0.0;
    return static_cast<double>(count(i, j)) / static_cast<double>(frames_);
  }

  /// Frame frequency of a label, co(l, l).
  double frequency(Label l) const { return value(l, l); }

  friend bool operator==(const CooccurrenceMatrix&, const CooccurrenceMatrix&) = default;

 private:
  std::size_t index(Label i, Label j) const {
    if (i >= k_ || j >= k_) {
      throw ValidationError("label out of range for co-occurrence matrix of size " + std::to_string(k_));
    }
    return static_cast<std::size_t>(i) * k_ + j;
  }

  std::size_t k_ = 0;
  std::size_t frames_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline CooccurrenceMatrix build_cooccurrence(const LabelStream& stream) {
  const std::size_t k = stream.label_count();
  std::vector<std::uint64_t> counts(k * k, 0);
  for (const auto& f : stream.frames()) {
    const auto& ls = f.labels.values();
    for (std::size_t a = 0; a < ls.size(); ++a) {
      counts[static_cast<std::size_t>(ls[a]) * k + ls[a]] += 1;
      for (std::size_t b = a + 1; b < ls.size(); ++b) {
        counts[static_cast<std::size_t>(ls[a]) * k + ls[b]] += 1;
        counts[static_cast<std::size_t>(ls[b]) * k + ls[a]] += 1;
      }
    }
  }
  return CooccurrenceMatrix(k, stream.size(), std::move(counts));
}

/// Up to `k` labels j != label with co(label, j) > 0, strongest first, ties by
/// ascending id.
inline std::vector<Label> top_neighbors(const CooccurrenceMatrix& m, Label label, std::size_t k) {
  if (label >= m.label_count()) {
    throw ValidationError("label " + std::to_string(label) + " out of range [0, " +
                          std::to_string(m.label_count()) + ")");
  }
  std::vector<Label> out;
  for (Label j = 0; j < m.label_count(); ++j) {
    if (j != label && m.count(label, j) > 0) out.push_back(j);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](Label a, Label b) { return m.count(label, a) > m.count(label, b); });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Labels whose frame frequency exceeds `min_frequency` (default: seen at
/// least once).
inline LabelSet valid_labels(const CooccurrenceMatrix& m, double min_frequency = 0.0) {
  std::vector<Label> out;
  for (Label l = 0; l < m.label_count(); ++l) {
    if (m.count(l, l) > 0 && m.frequency(l) > min_frequency) out.push_back(l);
  }
  return LabelSet(std::move(out));
}

/// Dense CSV dump: header row with K, then K rows of normalized values.
inline void write_cooccurrence_csv(std::ostream& out, const CooccurrenceMatrix& m) {
  out << "K," << m.label_count() << '\n';
  for (Label i = 0; i < m.label_count(); ++i) {
    for (Label j = 0; j < m.label_count(); ++j) {
      if (j) out << ',';
      out << m.value(i, j);
    }
    out << '\n';
  }
}

}  // namespace ctxsched
