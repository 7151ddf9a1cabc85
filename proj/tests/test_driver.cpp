#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rgdcl/driver.hpp"

using namespace rgdcl;

namespace {

Suite small_suite(std::uint64_t seed = 3) {
  SuiteConfig sc;
  sc.num_tasks = 3;
  sc.train_per_task = 40;
  sc.eval_per_task = 10;
  sc.rgd_per_task = 6;
  sc.seed = seed;
  return make_suite(sc);
}

RunConfig small_run(Strategy s, std::size_t order = 0) {
  RunConfig rc;
  rc.dims = ModelDims{8, 6, 16, false};
  rc.train.epochs = 3;
  rc.strategy = s;
  rc.order_index = order;
  rc.run_seed = 11;
  rc.budget_fraction = 0.1;
  rc.max_decode = 16;
  return rc;
}

const Suite& shared_suite() {
  static const Suite s = small_suite();
  return s;
}

}  // namespace

TEST(RunSequence, MatrixShapeAndLabels) {
  const auto& suite = shared_suite();
  const auto res = run_sequence(suite, small_run(Strategy::rgd_mean));
  ASSERT_EQ(res.matrix.num_tasks(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(res.matrix.a[i].size(), i + 1);
    EXPECT_EQ(res.matrix.order[i], suite.tasks[suite.orders[0][i]].task_id);
    for (double x : res.matrix.a[i]) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 100.0);
    }
  }
  EXPECT_EQ(res.checkpoints.size(), 3u);
  EXPECT_EQ(res.stage_rgd.size(), 3u);
  EXPECT_EQ(res.stage_rgd[2].size(), 3u);
  ASSERT_EQ(res.plans.size(), 2u);
  // 10% of the 40 and 80 prior examples.
  EXPECT_EQ(res.plans[0].total(), 4u);
  EXPECT_EQ(res.plans[1].total(), 8u);
  EXPECT_EQ(res.plans[0].strategy, "rgd-mean");
}

TEST(RunSequence, Deterministic) {
  const auto& suite = shared_suite();
  const auto a = run_sequence(suite, small_run(Strategy::equal));
  const auto b = run_sequence(suite, small_run(Strategy::equal));
  EXPECT_EQ(a.matrix, b.matrix);
  ASSERT_EQ(a.plans.size(), b.plans.size());
  for (std::size_t i = 0; i < a.plans.size(); ++i) EXPECT_EQ(a.plans[i].counts, b.plans[i].counts);
  EXPECT_EQ(a.checkpoints.back(), b.checkpoints.back());
}

TEST(RunSequence, NoReplayHasNoPlans) {
  const auto res = run_sequence(shared_suite(), small_run(Strategy::none, 1));
  EXPECT_TRUE(res.plans.empty());
  EXPECT_EQ(res.matrix.order.front(), shared_suite().tasks[shared_suite().orders[1][0]].task_id);
}

TEST(RunSequence, ZeroBudgetMatchesNoReplay) {
  auto cfg = small_run(Strategy::equal);
  cfg.budget = 0;
  const auto a = run_sequence(shared_suite(), cfg);
  const auto b = run_sequence(shared_suite(), small_run(Strategy::none));
  EXPECT_EQ(a.matrix.a, b.matrix.a);
}

TEST(RunSequence, InvalidConfig) {
  auto cfg = small_run(Strategy::none);
  cfg.order_index = 2;
  EXPECT_THROW((void)run_sequence(shared_suite(), cfg), Error);
  cfg = small_run(Strategy::none);
  cfg.budget_fraction = 1.5;
  EXPECT_THROW((void)run_sequence(shared_suite(), cfg), Error);
}

TEST(PlanStage, StrategiesUseOnlyPreviousTasks) {
  const auto& suite = shared_suite();
  auto cfg = small_run(Strategy::inscl);
  const auto plan = plan_stage(suite, cfg, 2, {});
  ASSERT_EQ(plan.tasks.size(), 2u);
  EXPECT_EQ(plan.tasks[0], suite.tasks[suite.orders[0][0]].task_id);
  EXPECT_EQ(plan.total(), 8u);

  cfg.strategy = Strategy::rgd_mean;
  EXPECT_THROW((void)plan_stage(suite, cfg, 2, {}), Error);
  cfg.strategy = Strategy::none;
  EXPECT_THROW((void)plan_stage(suite, cfg, 2, {}), Error);
}

TEST(Baselines, ShapesAndRange) {
  const auto& suite = shared_suite();
  const auto single = run_single_baselines(suite, small_run(Strategy::none));
  const auto multi = run_multitask(suite, small_run(Strategy::none));
  ASSERT_EQ(single.size(), 3u);
  ASSERT_EQ(multi.size(), 3u);
  for (double x : single) EXPECT_LE(x, 100.0);
  EXPECT_EQ(in_order(single, suite.orders[1]).front(), single[suite.orders[1][0]]);
}

TEST(Probes, PartialRationaleAndTap) {
  const auto& suite = shared_suite();
  const auto res = run_sequence(suite, small_run(Strategy::none));
  const auto& model = res.checkpoints.back();
  const auto points = probe_partial_rationale(model, suite, 0, default_k_grid(), 16);
  ASSERT_EQ(points.size(), default_k_grid().size());
  EXPECT_EQ(points.front().k, 0.0);
  EXPECT_EQ(points.front().accuracy, evaluate_examples(model, suite.eval[0], 16));

  TapConfig tc;
  tc.demo_counts = {1, 2};
  tc.draws = 2;
  tc.max_decode = 16;
  const auto tap = probe_tap(model, suite, 0, {1, 2}, tc);
  EXPECT_EQ(tap.grid.size(), 5u);
  EXPECT_EQ(tap.grid.front().demo_count, 0u);
  for (const auto& arm : tap.grid) EXPECT_LE(arm.accuracy, tap.best.accuracy);
  EXPECT_GE(tap.best.accuracy, tap.instruction_only);
  for (const auto& arm : tap.grid) {
    for (const auto& id : arm.demo_ids) EXPECT_EQ(id.rfind(suite.tasks[0].task_id, 0), std::string::npos);
  }
  EXPECT_THROW((void)probe_tap(model, suite, 0, {0, 1}, tc), Error);
  EXPECT_THROW((void)probe_tap(model, suite, 0, {}, tc), Error);

  const auto top = most_forgotten(res.matrix, 3);
  EXPECT_EQ(top.size(), 2u);
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> up{10, 20, 30, 40};
  const std::vector<double> down{4, 3, 2, 1};
  const std::vector<double> flat{5, 5, 5, 5};
  EXPECT_NEAR(spearman(x, up), 1.0, 1e-12);
  EXPECT_NEAR(spearman(x, down), -1.0, 1e-12);
  EXPECT_EQ(spearman(x, flat), 0.0);
  const std::vector<double> ties{1, 1, 2, 2};
  EXPECT_NEAR(spearman(ties, up), std::sqrt(0.8), 1e-12);
  EXPECT_THROW((void)spearman(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST(Strategies, NamesRoundTrip) {
  for (Strategy s : {Strategy::none, Strategy::equal, Strategy::inscl, Strategy::rgd_mean,
                     Strategy::rgd_mean_minus_std}) {
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  }
  EXPECT_THROW((void)parse_strategy("random"), Error);
}
