#pragma once

// Sequential continual-learning runs, baselines and the two probing
// experiments, all in memory. File output lives in experiment.hpp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rgdcl/clmetrics.hpp"
#include "rgdcl/error.hpp"
#include "rgdcl/replay.hpp"
#include "rgdcl/rgd.hpp"
#include "rgdcl/rng.hpp"
#include "rgdcl/taskgen.hpp"
#include "rgdcl/tinylm.hpp"

namespace rgdcl {

enum class Strategy { none, equal, inscl, rgd_mean, rgd_mean_minus_std };

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::equal: return "equal";
    case Strategy::inscl: return "inscl";
    case Strategy::rgd_mean: return "rgd-mean";
    case Strategy::rgd_mean_minus_std: return "rgd-mean-minus-std";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::none, Strategy::equal, Strategy::inscl, Strategy::rgd_mean,
                     Strategy::rgd_mean_minus_std}) {
    if (strategy_name(s) == name) return s;
  }
  fail(Errc::invalid_config, "unknown replay strategy '" + std::string(name) + "'");
}

inline bool uses_rgd(Strategy s) { return s == Strategy::rgd_mean || s == Strategy::rgd_mean_minus_std; }

inline RgdAggregator aggregator_for(Strategy s) {
  return s == Strategy::rgd_mean_minus_std ? RgdAggregator::mean_minus_std : RgdAggregator::mean;
}

struct ModelDims {
  std::size_t context_len = 16;
  std::size_t embed_dim = 12;
  std::size_t hidden_dim = 64;
  bool direct = false;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct RunConfig {
  ModelDims dims;
  TrainConfig train;
  Strategy strategy = Strategy::none;
  double budget_fraction = 0.05;         // of cumulative previous training data
  std::optional<std::size_t> budget;     // fixed per-stage budget, overrides the fraction
  std::size_t order_index = 0;           // which canonical order of the suite
  std::uint64_t run_seed = 1;
  std::size_t max_decode = 24;

  void validate(const Suite& suite) const {
    train.validate();
    require(order_index < suite.orders.size(), Errc::invalid_config, "order index must be 0 or 1");
    require(budget_fraction >= 0.0 && budget_fraction <= 1.0, Errc::invalid_config,
            "budget_fraction must be in [0, 1]");
    require(!uses_rgd(strategy) || suite.config.rgd_per_task >= 1, Errc::invalid_config,
            "rgd strategies need rgd_per_task >= 1");
    require(max_decode >= 1, Errc::invalid_config, "max_decode must be positive");
  }
};

// ---------------------------------------------------------------------------
// Evaluation

inline std::vector<TrainPair> to_pairs(const Vocab& vocab, std::span<const Example> examples) {
  std::vector<TrainPair> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({vocab.encode(ex.instruction), encode_target(vocab, ex)});
  return out;
}

inline Tokens decode_greedy(const ModelState& model, const Tokens& prompt, std::size_t max_len) {
  return model.vocab().decode(generate(model, model.vocab().encode(prompt), max_len));
}

/// Accuracy (x100) of greedy answers for arbitrary prompts.
inline double prompt_accuracy(const ModelState& model, std::span<const Tokens> prompts,
                              std::span<const Example> examples, std::size_t max_len) {
  std::vector<Tokens> preds;
  std::vector<std::string> gold;
  preds.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    preds.push_back(decode_greedy(model, prompts[i], max_len));
    gold.push_back(examples[i].answer);
  }
  return answer_accuracy(std::span<const Tokens>(preds), gold);
}

/// Instruction-only accuracy.
inline double evaluate_examples(const ModelState& model, std::span<const Example> examples, std::size_t max_len) {
  std::vector<Tokens> prompts;
  prompts.reserve(examples.size());
  for (const auto& ex : examples) prompts.push_back(ex.instruction);
  return prompt_accuracy(model, prompts, examples, max_len);
}

inline std::vector<TaskRgd> score_tasks(const ModelState& model, const Suite& suite,
                                        std::span<const std::size_t> task_indices, RgdAggregator agg) {
  std::vector<TaskRgd> out;
  for (std::size_t t : task_indices) {
    const auto records = score_records(model, suite.rgd[t]);
    out.push_back(task_rgd(records, agg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runs

struct RunResult {
  PerfMatrix matrix;
  std::vector<std::vector<TaskRgd>> stage_rgd;  // after stage i: tasks order[0..i]
  std::vector<AllocationPlan> plans;            // stages 2..T
  std::vector<ModelState> checkpoints;          // after each stage
};

inline std::size_t stage_budget(const Suite& suite, const RunConfig& cfg, std::size_t stage) {
  if (cfg.budget) return *cfg.budget;
  const auto& order = suite.orders[cfg.order_index];
  std::size_t prior = 0;
  for (std::size_t j = 0; j < stage; ++j) prior += suite.train[order[j]].size();
  return static_cast<std::size_t>(std::floor(cfg.budget_fraction * static_cast<double>(prior) + 0.5));
}

inline ModelState fresh_model(const RunConfig& cfg) {
  return init_model(suite_vocab(), cfg.dims.context_len, cfg.dims.embed_dim, cfg.dims.hidden_dim,
                    derive_seed(cfg.run_seed, "model"), cfg.dims.direct);
}

/// Plan for stage `stage` (0-based, > 0) using only what was known after
/// the previous stage.
inline AllocationPlan plan_stage(const Suite& suite, const RunConfig& cfg, std::size_t stage,
                                 const std::vector<TaskRgd>& prev_rgd) {
  const auto& order = suite.orders[cfg.order_index];
  std::vector<std::string> prev;
  std::vector<std::size_t> pools;
  for (std::size_t j = 0; j < stage; ++j) {
    prev.push_back(suite.tasks[order[j]].task_id);
    pools.push_back(suite.train[order[j]].size());
  }
  const auto alpha = static_cast<long long>(stage_budget(suite, cfg, stage));
  AllocationPlan plan;
  switch (cfg.strategy) {
    case Strategy::none:
      fail(Errc::invalid_config, "no plan for strategy none");
    case Strategy::equal:
      plan = allocate_equal(prev, alpha);
      break;
    case Strategy::inscl: {
      auto instructions = [&](std::size_t t) {
        std::vector<Tokens> ins;
        for (const auto& ex : suite.train[t]) ins.push_back(ex.instruction);
        return ins;
      };
      const auto current = instructions(order[stage]);
      std::vector<double> dist;
      for (std::size_t j = 0; j < stage; ++j) dist.push_back(instruction_distance(instructions(order[j]), current));
      plan = allocate_inscl(prev, dist, alpha);
      break;
    }
    case Strategy::rgd_mean:
    case Strategy::rgd_mean_minus_std: {
      require(prev_rgd.size() == stage, Errc::invalid_input, "missing difficulty scores for previous tasks");
      plan = allocate_rgd(prev_rgd, alpha, std::string(strategy_name(cfg.strategy)));
      break;
    }
  }
  return fit_to_pools(std::move(plan), pools);
}

inline RunResult run_sequence(const Suite& suite, const RunConfig& cfg) {
  cfg.validate(suite);
  const auto& order = suite.orders[cfg.order_index];
  const std::size_t t_count = order.size();
  const RgdAggregator agg = aggregator_for(cfg.strategy);

  RunResult out;
  for (std::size_t i = 0; i < t_count; ++i) out.matrix.order.push_back(suite.tasks[order[i]].task_id);

  ModelState model = fresh_model(cfg);
  for (std::size_t stage = 0; stage < t_count; ++stage) {
    std::vector<Example> data = suite.train[order[stage]];
    if (stage > 0 && cfg.strategy != Strategy::none) {
      AllocationPlan plan = plan_stage(suite, cfg, stage, out.stage_rgd.back());
      for (std::size_t j = 0; j < stage; ++j) {
        const auto picked = sample_replay(suite.train[order[j]], plan.counts[j],
                                          derive_seed(cfg.run_seed, "replay", stage * 64 + j));
        data.insert(data.end(), picked.examples.begin(), picked.examples.end());
      }
      out.plans.push_back(std::move(plan));
    }
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.run_seed, "stage", stage);
    const auto pairs = to_pairs(model.vocab(), data);
    try {
      model = train(std::move(model), pairs, tc).model;
    } catch (const Error& e) {
      fail(e.code(), "stage " + std::to_string(stage + 1) + " (" + out.matrix.order[stage] + "): " + e.what());
    }

    std::vector<double> row;
    for (std::size_t j = 0; j <= stage; ++j) row.push_back(evaluate_examples(model, suite.eval[order[j]], cfg.max_decode));
    out.matrix.a.push_back(std::move(row));
    if (suite.config.rgd_per_task > 0) {
      out.stage_rgd.push_back(score_tasks(model, suite, std::span<const std::size_t>(order).first(stage + 1), agg));
    }
    out.checkpoints.push_back(model);
  }
  return out;
}

/// a0 for every task, indexed like suite.tasks: a fresh model per task,
/// trained with the same settings as one stage.
inline std::vector<double> run_single_baselines(const Suite& suite, const RunConfig& cfg) {
  std::vector<double> row;
  for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.run_seed, "single", t);
    const ModelState model = train(fresh_model(cfg), to_pairs(suite_vocab(), suite.train[t]), tc).model;
    row.push_back(evaluate_examples(model, suite.eval[t], cfg.max_decode));
  }
  return row;
}

/// One model on the union of all training data; scores indexed like suite.tasks.
inline std::vector<double> run_multitask(const Suite& suite, const RunConfig& cfg) {
  std::vector<Example> all;
  for (const auto& t : suite.train) all.insert(all.end(), t.begin(), t.end());
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.run_seed, "multitask");
  const ModelState model = train(fresh_model(cfg), to_pairs(suite_vocab(), all), tc).model;
  std::vector<double> row;
  for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
    row.push_back(evaluate_examples(model, suite.eval[t], cfg.max_decode));
  }
  return row;
}

/// Reorders a per-task row into a run's training order.
inline std::vector<double> in_order(const std::vector<double>& by_task, const std::vector<std::size_t>& order) {
  std::vector<double> out;
  for (std::size_t t : order) out.push_back(by_task.at(t));
  return out;
}

/// Task positions (in training order) with the largest forgetting, ties to
/// the earlier task.
inline std::vector<std::size_t> most_forgotten(const PerfMatrix& m, std::size_t count) {
  const auto f = per_task_forgetting(m);
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

// ---------------------------------------------------------------------------
// Probes

inline const std::vector<double>& default_k_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  return grid;
}

struct KPoint {
  double k = 0.0;
  double accuracy = 0.0;
};

inline std::vector<KPoint> probe_partial_rationale(const ModelState& model, const Suite& suite, std::size_t task,
                                                   std::span<const double> k_grid, std::size_t max_decode = 24) {
  require(task < suite.tasks.size(), Errc::invalid_input, "unknown task index");
  const auto& examples = suite.eval[task];
  std::vector<KPoint> out;
  for (double k : k_grid) {
    std::vector<Tokens> prompts;
    for (const auto& ex : examples) prompts.push_back(partial_rationale_prompt(ex, k));
    out.push_back({k, prompt_accuracy(model, prompts, examples, max_decode)});
  }
  return out;
}

struct TapArm {
  std::size_t demo_count = 0;
  std::size_t draw = 0;
  std::vector<std::string> demo_ids;
  double accuracy = 0.0;
};

struct TapResult {
  TapArm best;
  double instruction_only = 0.0;
  std::vector<TapArm> grid;  // includes the 0-demo arm first
};

struct TapConfig {
  std::vector<std::size_t> demo_counts{1, 2, 4, 8};
  std::size_t draws = 3;
  Tokens context_template = default_tap_template();
  std::uint64_t seed = 1;
  std::size_t max_decode = 24;
};

/// Grid search over demonstration count and seeded demonstration draws from
/// `demo_pool` tasks. The 0-demo arm is the plain instruction and always
/// competes; ties go to fewer demonstrations, then the earlier draw.
inline TapResult probe_tap(const ModelState& model, const Suite& suite, std::size_t task,
                           const std::vector<std::size_t>& demo_pool, const TapConfig& cfg) {
  require(task < suite.tasks.size(), Errc::invalid_input, "unknown task index");
  require(!demo_pool.empty(), Errc::invalid_config, "TAP needs a nonempty demonstration pool");
  std::vector<const Example*> pool;
  for (std::size_t t : demo_pool) {
    require(t < suite.tasks.size(), Errc::invalid_input, "unknown demonstration task index");
    require(t != task, Errc::invalid_config, "demonstration pool contains the evaluated task");
    for (const auto& ex : suite.train[t]) pool.push_back(&ex);
  }
  const auto& examples = suite.eval[task];

  TapResult out;
  out.instruction_only = evaluate_examples(model, examples, cfg.max_decode);
  out.grid.push_back(TapArm{0, 0, {}, out.instruction_only});
  out.best = out.grid.front();

  std::vector<std::size_t> counts = cfg.demo_counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  for (std::size_t count : counts) {
    if (count == 0) continue;
    for (std::size_t draw = 0; draw < cfg.draws; ++draw) {
      Rng rng(derive_seed(cfg.seed, "tap-demos", count * 1024 + draw));
      std::vector<Example> demos;
      TapArm arm{count, draw, {}, 0.0};
      for (std::size_t d = 0; d < count; ++d) {
        demos.push_back(*pool[rng.below(pool.size())]);
        arm.demo_ids.push_back(demos.back().id);
      }
      std::vector<Tokens> prompts;
      for (const auto& ex : examples) prompts.push_back(tap_prompt(ex, demos, cfg.context_template));
      arm.accuracy = prompt_accuracy(model, prompts, examples, cfg.max_decode);
      if (arm.accuracy > out.best.accuracy) out.best = arm;
      out.grid.push_back(std::move(arm));
    }
  }
  return out;
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::invalid_input, "spearman needs two equal-length series");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rgdcl
