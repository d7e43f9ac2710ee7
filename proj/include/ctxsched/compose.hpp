#pragma once

// Dense linear-algebra kernel for low-rank adapter composition:
//   x (W + sum_i A_i B_i) == x W + sum_i (x A_i) B_i
// and shared-prefix execution where only the last layers carry adapters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxsched/error.hpp"
#include "ctxsched/random.hpp"

namespace ctxsched {

/// Row-major real matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw ValidationError("matrix dimensions must be positive");
  }
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows == 0 || cols == 0) throw ValidationError("matrix dimensions must be positive");
    if (data_.size() != rows * cols) throw ValidationError("matrix value count does not match dimensions");
    for (double v : data_) {
      if (!std::isfinite(v)) throw ValidationError("matrix entries must be finite");
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix random(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (auto& v : m.data_) v = scale * (2.0 * rng.uniform() - 1.0);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw ValidationError("matrix sum dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Multiply-accumulate tally.
using MacCount = std::uint64_t;

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b, MacCount* macs = nullptr) {
  if (a.cols() != b.rows()) {
    throw ValidationError("dimension mismatch: (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          ") * (" + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  if (macs) *macs += static_cast<MacCount>(a.rows()) * a.cols() * b.cols();
  return out;
}

/// max |a - b| / max |a|, or the absolute deviation when a is all zeros.
inline double max_relative_error(const DenseMatrix& reference, const DenseMatrix& other) {
  if (reference.rows() != other.rows() || reference.cols() != other.cols()) {
    throw ValidationError("cannot compare matrices of different shapes");
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < reference.values().size(); ++i) {
    diff = std::max(diff, std::abs(reference.values()[i] - other.values()[i]));
  }
  const double scale = reference.max_abs();
  return scale > 0.0 ? diff / scale : diff;
}

/// Low-rank update A (h x r) * B (r x d).
class LoraPair {
 public:
  LoraPair(DenseMatrix a, DenseMatrix b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.cols() != b_.rows()) throw ValidationError("LoRA factors disagree on rank");
    if (rank() > std::min(a_.rows(), b_.cols())) throw ValidationError("LoRA rank exceeds min(h, d)");
  }

  static LoraPair random(std::size_t h, std::size_t d, std::size_t rank, Rng& rng, double scale = 0.1) {
    if (rank == 0) throw ValidationError("LoRA rank must be >= 1");
    return LoraPair(DenseMatrix::random(h, rank, rng, scale), DenseMatrix::random(rank, d, rng, scale));
  }

  const DenseMatrix& a() const noexcept { return a_; }
  const DenseMatrix& b() const noexcept { return b_; }
  std::size_t rank() const noexcept { return a_.cols(); }
  std::size_t in_dim() const noexcept { return a_.rows(); }
  std::size_t out_dim() const noexcept { return b_.cols(); }

 private:
  DenseMatrix a_;
  DenseMatrix b_;
};

namespace detail {

inline void check_adapters(const DenseMatrix& w, const std::vector<LoraPair>& adapters) {
  for (const auto& p : adapters) {
    if (p.in_dim() != w.rows() || p.out_dim() != w.cols()) {
      throw ValidationError("adapter shape (" + std::to_string(p.in_dim()) + "x" + std::to_string(p.out_dim()) +
                            ") does not match weight (" + std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()) + ")");
    }
  }
}

}  // namespace detail

/// x W + sum_i (x A_i) B_i with the backbone product computed once.
inline DenseMatrix forward_unmerged(const DenseMatrix& x, const DenseMatrix& w, const std::vector<LoraPair>& adapters,
                                    MacCount* macs = nullptr) {
  detail::check_adapters(w, adapters);
  auto h = multiply(x, w, macs);
  for (const auto& p : adapters) h += multiply(multiply(x, p.a(), macs), p.b(), macs);
  return h;
}

/// Materialises W' = W + sum_i A_i B_i and returns x W'.
inline DenseMatrix forward_merged(const DenseMatrix& x, const DenseMatrix& w, const std::vector<LoraPair>& adapters) {
  detail::check_adapters(w, adapters);
  DenseMatrix merged = w;
  for (const auto& p : adapters) merged += multiply(p.a(), p.b());
  return multiply(x, merged);
}

/// Linear layers applied in sequence; adapters may attach only to the final
/// adapted_layer_count() layers.
class LayerStack {
 public:
  LayerStack(std::vector<DenseMatrix> weights, double adapted_fraction)
      : weights_(std::move(weights)), fraction_(adapted_fraction) {
    if (weights_.empty()) throw ValidationError("layer stack is empty");
    if (!(adapted_fraction >= 0.0 && adapted_fraction <= 1.0)) {
      throw ValidationError("adapted fraction must lie in [0, 1]");
    }
    for (std::size_t i = 1; i < weights_.size(); ++i) {
      if (weights_[i - 1].cols() != weights_[i].rows()) throw ValidationError("layer dimensions do not chain");
    }
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double adapted_fraction() const noexcept { return fraction_; }
  const DenseMatrix& weight(std::size_t layer) const { return weights_.at(layer); }

  /// floor(f * L), at least one layer when f > 0.
  std::size_t adapted_layer_count() const {
    if (fraction_ == 0.0) return 0;
    const auto n = static_cast<std::size_t>(std::floor(fraction_ * static_cast<double>(size()) + 1e-9));
    return std::clamp<std::size_t>(n, 1, size());
  }

  std::size_t first_adapted_layer() const { return size() - adapted_layer_count(); }

 private:
  std::vector<DenseMatrix> weights_;
  double fraction_;
};

/// Adapters one context attaches, keyed by layer index.
struct ContextAdapters {
  std::map<std::size_t, std::vector<LoraPair>> by_layer;
};

struct StackedOpCount {
  MacCount prefix = 0;
  /// Backbone products of the suffix layers, summed over base and contexts.
  MacCount suffix_base = 0;
  /// Low-rank (x A) B products, summed over contexts.
  MacCount low_rank = 0;

  MacCount total() const noexcept { return prefix + suffix_base + low_rank; }
};

struct StackedOutput {
  DenseMatrix base;
  std::vector<DenseMatrix> per_context;
  StackedOpCount ops;
};

/// Runs the prefix once, then the adapted suffix once for the base model and
/// once per context with that context's adapters applied unmerged.
inline StackedOutput stacked_forward(const LayerStack& stack, const DenseMatrix& x,
                                     const std::vector<ContextAdapters>& contexts) {
  const std::size_t split = stack.first_adapted_layer();
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    for (const auto& [layer, adapters] : contexts[c].by_layer) {
      if (layer >= stack.size()) throw ValidationError("adapter attached to nonexistent layer " + std::to_string(layer));
      if (layer < split && !adapters.empty()) {
        throw ValidationError("context " + std::to_string(c) + " attaches an adapter to layer " +
                              std::to_string(layer) + " outside the adapted suffix (starts at " +
                              std::to_string(split) + ")");
      }
    }
  }

  StackedOpCount ops;
  DenseMatrix shared = x;
  for (std::size_t l = 0; l < split; ++l) shared = multiply(shared, stack.weight(l), &ops.prefix);

  auto run_suffix = [&](const ContextAdapters* adapters) {
    DenseMatrix h = shared;
    for (std::size_t l = split; l < stack.size(); ++l) {
      DenseMatrix next = multiply(h, stack.weight(l), &ops.suffix_base);
      if (adapters) {
        auto it = adapters->by_layer.find(l);
        if (it != adapters->by_layer.end()) {
          detail::check_adapters(stack.weight(l), it->second);
          for (const auto& p : it->second) next += multiply(multiply(h, p.a(), &ops.low_rank), p.b(), &ops.low_rank);
        }
      }
      h = std::move(next);
    }
    return h;
  };

  StackedOutput out{run_suffix(nullptr), {}, {}};
  out.per_context.reserve(contexts.size());
  for (const auto& c : contexts) out.per_context.push_back(run_suffix(&c));
  out.ops = ops;
  return out;
}

}  // namespace ctxsched
