#include <gtest/gtest.h>

#include "support.hpp"

using namespace ctxsched;

namespace {

DenseMatrix naive(const DenseMatrix& a, const DenseMatrix& b) {
  return DenseMatrix(a.rows(), b.cols(),
                     testsupport::naive_multiply(a.values(), b.values(), a.rows(), a.cols(), b.cols()));
}

// x W + sum (x A) B, written out with the reference product only.
DenseMatrix naive_layer(const DenseMatrix& x, const DenseMatrix& w, const std::vector<LoraPair>& adapters) {
  auto h = naive(x, w);
  for (const auto& p : adapters) h += naive(naive(x, p.a()), p.b());
  return h;
}

}  // namespace

TEST(Compose, NoAdaptersIsPlainProduct) {
  Rng rng(1);
  auto x = DenseMatrix::random(3, 4, rng);
  auto w = DenseMatrix::random(4, 5, rng);
  EXPECT_EQ(forward_unmerged(x, w, {}).values(), multiply(x, w).values());
  EXPECT_EQ(forward_merged(x, w, {}).values(), multiply(x, w).values());
}

TEST(Compose, HandExample) {
  DenseMatrix x(1, 2, std::vector<double>{1, 0});
  LoraPair p(DenseMatrix(2, 1, std::vector<double>{1, 0}), DenseMatrix(1, 2, std::vector<double>{0, 2}));
  auto out = forward_unmerged(x, DenseMatrix::identity(2), {p});
  EXPECT_EQ(out.values(), (std::vector<double>{1, 2}));
  EXPECT_EQ(forward_merged(x, DenseMatrix::identity(2), {p}).values(), (std::vector<double>{1, 2}));
}

TEST(Compose, DuplicateAdapterDoubles) {
  Rng rng(2);
  auto x = DenseMatrix::random(2, 6, rng);
  auto w = DenseMatrix::random(6, 6, rng);
  auto p = LoraPair::random(6, 6, 2, rng);
  auto twice = forward_unmerged(x, w, {p, p});
  auto once = multiply(multiply(x, p.a()), p.b());
  auto expect = multiply(x, w);
  expect += once;
  expect += once;
  EXPECT_LE(max_relative_error(expect, twice), 1e-12);
}

TEST(Compose, RejectsBadShapes) {
  Rng rng(3);
  EXPECT_THROW(LoraPair::random(4, 4, 0, rng), ValidationError);
  EXPECT_THROW(LoraPair(DenseMatrix(4, 2), DenseMatrix(3, 4)), ValidationError);
  EXPECT_THROW(DenseMatrix(0, 3), ValidationError);
  EXPECT_THROW(DenseMatrix(1, 1, std::vector<double>{std::nan("")}), ValidationError);
  auto w = DenseMatrix::random(4, 4, rng);
  auto p = LoraPair::random(5, 4, 1, rng);
  EXPECT_THROW(forward_unmerged(DenseMatrix::random(1, 4, rng), w, {p}), ValidationError);
}

TEST(Compose, MultiplyMatchesNaiveProperty) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto n = 1 + rng.below(8), k = 1 + rng.below(8), m = 1 + rng.below(8);
    auto a = DenseMatrix::random(n, k, rng);
    auto b = DenseMatrix::random(k, m, rng);
    MacCount macs = 0;
    EXPECT_LE(max_relative_error(naive(a, b), multiply(a, b, &macs)), 1e-12);
    EXPECT_EQ(macs, n * k * m);
  }
}

TEST(Compose, MergedEqualsUnmergedProperty) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto h = 1 + rng.below(32), d = 1 + rng.below(32), n = 1 + rng.below(4);
    auto x = DenseMatrix::random(n, h, rng);
    auto w = DenseMatrix::random(h, d, rng);
    std::vector<LoraPair> ad;
    const auto k = rng.below(6);
    for (std::size_t a = 0; a < k; ++a) ad.push_back(LoraPair::random(h, d, 1 + rng.below(std::min({h, d, std::size_t{8}})), rng));
    auto ref = naive_layer(x, w, ad);
    EXPECT_LE(max_relative_error(ref, forward_unmerged(x, w, ad)), 1e-9);
    EXPECT_LE(max_relative_error(ref, forward_merged(x, w, ad)), 1e-9);
  }
}

TEST(LayerStack, AdaptedLayerCount) {
  Rng rng(6);
  std::vector<DenseMatrix> ws12(12, DenseMatrix::identity(2));
  EXPECT_EQ(LayerStack(ws12, 0.2).adapted_layer_count(), 2u);
  EXPECT_EQ(LayerStack(ws12, 0.0).adapted_layer_count(), 0u);
  EXPECT_EQ(LayerStack(ws12, 0.01).adapted_layer_count(), 1u);
  EXPECT_EQ(LayerStack(ws12, 1.0).adapted_layer_count(), 12u);
  std::vector<DenseMatrix> ws10(10, DenseMatrix::identity(2));
  EXPECT_EQ(LayerStack(ws10, 0.2).adapted_layer_count(), 2u);
  EXPECT_EQ(LayerStack(ws10, 0.2).first_adapted_layer(), 8u);
  EXPECT_THROW(LayerStack(ws10, 1.5), ValidationError);
  EXPECT_THROW(LayerStack({DenseMatrix(2, 3), DenseMatrix(2, 3)}, 0.5), ValidationError);
}

namespace {

struct Stack {
  LayerStack stack;
  DenseMatrix x;
  std::vector<ContextAdapters> contexts;
};

Stack random_stack(Rng& rng, std::size_t layers, double fraction, std::size_t k, std::size_t dim) {
  std::vector<DenseMatrix> ws;
  for (std::size_t l = 0; l < layers; ++l) ws.push_back(DenseMatrix::random(dim, dim, rng, 0.5));
  Stack s{LayerStack(ws, fraction), DenseMatrix::random(3, dim, rng), {}};
  for (std::size_t c = 0; c < k; ++c) {
    ContextAdapters ca;
    for (std::size_t l = s.stack.first_adapted_layer(); l < layers; ++l) {
      const auto n = 1 + rng.below(2);
      for (std::size_t i = 0; i < n; ++i) ca.by_layer[l].push_back(LoraPair::random(dim, dim, 1 + rng.below(std::min<std::size_t>(dim, 4)), rng));
    }
    s.contexts.push_back(std::move(ca));
  }
  return s;
}

DenseMatrix naive_full(const Stack& s, const ContextAdapters* ca) {
  DenseMatrix h = s.x;
  for (std::size_t l = 0; l < s.stack.size(); ++l) {
    std::vector<LoraPair> ad;
    if (ca) {
      auto it = ca->by_layer.find(l);
      if (it != ca->by_layer.end()) ad = it->second;
    }
    h = naive_layer(h, s.stack.weight(l), ad);
  }
  return h;
}

}  // namespace

TEST(Stacked, ZeroContexts) {
  Rng rng(7);
  auto s = random_stack(rng, 6, 0.5, 0, 5);
  auto out = stacked_forward(s.stack, s.x, {});
  EXPECT_TRUE(out.per_context.empty());
  EXPECT_LE(max_relative_error(naive_full(s, nullptr), out.base), 1e-12);
  EXPECT_EQ(out.ops.total(), 6u * 3 * 5 * 5);
  EXPECT_EQ(out.ops.low_rank, 0u);
}

TEST(Stacked, FullFractionOneContext) {
  Rng rng(8);
  auto s = random_stack(rng, 4, 1.0, 1, 6);
  auto out = stacked_forward(s.stack, s.x, s.contexts);
  DenseMatrix h = s.x;
  for (std::size_t l = 0; l < 4; ++l) h = forward_unmerged(h, s.stack.weight(l), s.contexts[0].by_layer.at(l));
  EXPECT_LE(max_relative_error(h, out.per_context[0]), 1e-12);
  EXPECT_EQ(out.ops.prefix, 0u);
}

TEST(Stacked, SharedPrefixCountedOnceProperty) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const std::size_t k = rng.below(5), dim = 2 + rng.below(8);
    auto s = random_stack(rng, 10, 0.2, k, dim);
    auto out = stacked_forward(s.stack, s.x, s.contexts);
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_LE(max_relative_error(naive_full(s, &s.contexts[c]), out.per_context[c]), 1e-6);
    }
    const MacCount per_layer = 3 * dim * dim;
    EXPECT_EQ(out.ops.prefix, 8 * per_layer);
    EXPECT_EQ(out.ops.suffix_base, (k + 1) * 2 * per_layer);
    MacCount low = 0;
    for (const auto& c : s.contexts) {
      for (const auto& [l, ad] : c.by_layer) {
        for (const auto& p : ad) low += 3 * p.rank() * (dim + dim);
      }
    }
    EXPECT_EQ(out.ops.low_rank, low);
    auto none = stacked_forward(s.stack, s.x, {});
    EXPECT_EQ(out.ops.total() - none.ops.total(), k * 2 * per_layer + low);
  }
}

TEST(Stacked, RejectsAdapterInPrefix) {
  Rng rng(10);
  auto s = random_stack(rng, 10, 0.2, 1, 4);
  s.contexts[0].by_layer[0].push_back(LoraPair::random(4, 4, 1, rng));
  EXPECT_THROW(stacked_forward(s.stack, s.x, s.contexts), ValidationError);
}

TEST(Stacked, OpCountsMatchClosedForm) {
  // a stack shaped like one adapter on p projections of L_a layers
  ArchParams arch;
  arch.layers = 5;
  arch.adapted_layers = 1;
  arch.projections_per_layer = 1;
  arch.d_model = 6;
  arch.lora_rank = 2;
  arch.tokens = 7;
  Rng rng(11);
  std::vector<DenseMatrix> ws(5, DenseMatrix::random(6, 6, rng));
  LayerStack stack(ws, 0.2);
  ContextAdapters ca;
  ca.by_layer[4].push_back(LoraPair::random(6, 6, 2, rng));
  auto x = DenseMatrix::random(7, 6, rng);
  auto with = stacked_forward(stack, x, {ca});
  EXPECT_EQ(with.ops.low_rank, adapter_mac_overhead(arch));
}
