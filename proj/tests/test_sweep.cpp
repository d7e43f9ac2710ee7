#include <gtest/gtest.h>

#include <atomic>

#include "support.hpp"

using namespace ctxsched;

namespace {

SweepGrid grid() {
  SweepGrid g;
  g.budgets = {2, 5, 15};
  g.variants = {CatalogVariant::basic, CatalogVariant::greedy_nonoverlap, CatalogVariant::greedy_overlap};
  g.taus = {0.0, 0.85};
  g.policies = {Policy::greedy, Policy::greedy_copy, Policy::oracle_per_frame};
  return g;
}

}  // namespace

TEST(Sweep, RowShapeAndOrder) {
  auto truth = generate_synthetic_stream(testsupport::planted_config(4));
  auto pred = apply_prediction_noise(truth, NoiseConfig{0.1, 0.02, 5});
  SweepInputs in;
  in.truth = &truth;
  in.predicted = &pred;
  in.cost = CostParams{39, 1.5, 1.42345, 0.035, 0, 5};
  auto r = run_sweep(grid(), in);
  ASSERT_EQ(r.clustering.size(), 9u);
  ASSERT_EQ(r.policies.size(), 54u);
  EXPECT_EQ(r.clustering[0].budget, 2u);
  EXPECT_EQ(r.clustering[0].variant, CatalogVariant::basic);
  EXPECT_EQ(r.clustering[8].variant, CatalogVariant::greedy_overlap);
  EXPECT_EQ(r.clustering[8].max_contexts, 50u);
  for (const auto& c : r.clustering) {
    EXPECT_TRUE(c.error.empty()) << c.error;
    EXPECT_TRUE(c.catalog_valid);
  }
  for (const auto& p : r.policies) {
    EXPECT_TRUE(p.error.empty()) << p.error;
    EXPECT_EQ(p.coverage_violations, 0u);
  }
  EXPECT_EQ(r.policies[1].policy, Policy::greedy_copy);
  EXPECT_EQ(r.policies[3].tau, 0.85);
}

TEST(Sweep, JobsDoNotChangeOutput) {
  auto truth = generate_synthetic_stream(testsupport::planted_config(6));
  auto pred = apply_prediction_noise(truth, NoiseConfig{0.1, 0.02, 7});
  SweepInputs in;
  in.truth = &truth;
  in.predicted = &pred;
  in.seed = 3;
  auto one = sweep_to_csv(run_sweep(grid(), in));
  in.jobs = 4;
  EXPECT_EQ(sweep_to_csv(run_sweep(grid(), in)), one);
  in.jobs = 16;
  EXPECT_EQ(sweep_to_csv(run_sweep(grid(), in)), one);
}

TEST(Sweep, CellFailuresAreRecorded) {
  auto truth = generate_synthetic_stream(testsupport::planted_config(1));
  SweepInputs in;
  in.truth = &truth;
  in.predicted = &truth;
  auto g = grid();
  g.max_contexts = 1;  // too few for every budget here
  auto r = run_sweep(g, in);
  for (const auto& c : r.clustering) EXPECT_FALSE(c.error.empty());
  for (const auto& p : r.policies) EXPECT_FALSE(p.error.empty());
  auto csv = sweep_to_csv(r);
  EXPECT_NE(csv.find("infeasible"), std::string::npos);
}

TEST(Sweep, EmptyGridRejected) {
  auto truth = generate_synthetic_stream(testsupport::planted_config(1));
  SweepInputs in;
  in.truth = &truth;
  in.predicted = &truth;
  auto g = grid();
  g.taus.clear();
  EXPECT_THROW(run_sweep(g, in), ValidationError);
}

TEST(Sweep, ParallelForVisitsEachIndexOnce) {
  for (std::size_t jobs : {1u, 2u, 7u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Sweep, PolicyNames) {
  EXPECT_EQ(parse_policy("copy"), Policy::greedy_copy);
  EXPECT_EQ(parse_policy("oracle"), Policy::oracle_per_frame);
  EXPECT_EQ(parse_policy("greedy"), Policy::greedy);
  EXPECT_THROW(parse_policy("nope"), ValidationError);
}
