#pragma once

// Runs a whole experiment (every seed x order x strategy plus baselines and
// probes) and lays it out on disk:
//
//   <out>/config.json
//   <out>/report.csv
//   <out>/seed-<s>/baselines.csv
//   <out>/seed-<s>/order-<o>/<strategy>/{run.json, matrix.csv, plans.jsonl,
//       rgd.jsonl, metrics.json, metrics.csv, probes.csv, checkpoints/stage-<i>.bin}

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rgdcl/checkpoint.hpp"
#include "rgdcl/clmetrics.hpp"
#include "rgdcl/config.hpp"
#include "rgdcl/driver.hpp"
#include "rgdcl/io.hpp"
#include "rgdcl/report.hpp"

namespace rgdcl {

/// Runs `jobs` on up to `threads` workers. The first failure (in job order)
/// is rethrown after all workers stop.
inline void run_parallel(std::vector<std::function<void()>>& jobs, std::size_t threads) {
  threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size() && !stop; i = next++) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
        stop = true;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct ProbeOutcome {
  std::string task_id;
  std::size_t position = 0;  // in training order
  double forgetting = 0.0;
  std::vector<KPoint> partial;
  TapResult tap;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  std::size_t order = 0;
  Strategy strategy = Strategy::none;
  RunResult result;
  MetricsReport metrics;
  std::vector<ProbeOutcome> probes;
};

struct SeedBaselines {
  std::uint64_t seed = 0;
  std::vector<double> single;  // indexed like suite.tasks; empty when skipped
  std::vector<double> multi;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Suite> suites;  // parallel to config.seeds
  std::vector<SeedBaselines> baselines;
  std::vector<RunOutcome> runs;  // seed-major, then order, then strategy
};

inline std::vector<ProbeOutcome> probe_run(const Suite& suite, const RunResult& run, std::size_t order,
                                           const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<ProbeOutcome> out;
  if (run.matrix.num_tasks() < 2) return out;
  const auto forgetting = per_task_forgetting(run.matrix);
  const ModelState& model = run.checkpoints.back();
  TapConfig tc;
  tc.demo_counts = cfg.probe.tap_demo_counts;
  tc.draws = cfg.probe.tap_draws;
  tc.context_template = split_words(cfg.probe.tap_template);
  tc.max_decode = cfg.max_decode;
  for (std::size_t pos : most_forgotten(run.matrix, cfg.probe.top_forgotten)) {
    const std::size_t task = suite.orders[order][pos];
    std::vector<std::size_t> pool;
    for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
      if (t != task) pool.push_back(t);
    }
    tc.seed = derive_seed(seed, "tap", order * 64 + pos);
    ProbeOutcome p;
    p.task_id = suite.tasks[task].task_id;
    p.position = pos;
    p.forgetting = forgetting[pos];
    p.partial = probe_partial_rationale(model, suite, task, cfg.probe.k_grid, cfg.max_decode);
    p.tap = probe_tap(model, suite, task, pool, tc);
    out.push_back(std::move(p));
  }
  return out;
}

/// Everything in memory; `threads` bounds the number of concurrent runs.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  for (auto seed : cfg.seeds) res.suites.push_back(make_suite(cfg.suite_config(seed)));
  res.baselines.resize(cfg.seeds.size());
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    res.baselines[s].seed = cfg.seeds[s];
    for (std::size_t o : cfg.orders) {
      for (Strategy st : cfg.strategies) res.runs.push_back(RunOutcome{cfg.seeds[s], o, st, {}, {}, {}});
    }
  }

  std::vector<std::function<void()>> jobs;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    const RunConfig base = cfg.run_config(Strategy::none, 0, cfg.seeds[s]);
    if (cfg.single_baseline) {
      jobs.emplace_back([&res, s, base] { res.baselines[s].single = run_single_baselines(res.suites[s], base); });
    }
    if (cfg.multitask_baseline) {
      jobs.emplace_back([&res, s, base] { res.baselines[s].multi = run_multitask(res.suites[s], base); });
    }
  }
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    jobs.emplace_back([&res, &cfg, r] {
      RunOutcome& run = res.runs[r];
      const std::size_t s = static_cast<std::size_t>(
          std::find(cfg.seeds.begin(), cfg.seeds.end(), run.seed) - cfg.seeds.begin());
      const Suite& suite = res.suites[s];
      run.result = run_sequence(suite, cfg.run_config(run.strategy, run.order, run.seed));
      if (cfg.probe.enabled && run.strategy == Strategy::none) {
        run.probes = probe_run(suite, run.result, run.order, cfg, run.seed);
      }
    });
  }
  run_parallel(jobs, threads);

  // a0 and metrics need every job finished.
  for (auto& run : res.runs) {
    const std::size_t s = static_cast<std::size_t>(
        std::find(cfg.seeds.begin(), cfg.seeds.end(), run.seed) - cfg.seeds.begin());
    if (!res.baselines[s].single.empty()) {
      run.result.matrix.a0 = in_order(res.baselines[s].single, res.suites[s].orders[run.order]);
    }
    if (run.result.matrix.num_tasks() >= 2) run.metrics = compute_report(run.result.matrix);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Output

inline std::filesystem::path run_dir(const std::filesystem::path& root, const RunOutcome& run) {
  return root / ("seed-" + std::to_string(run.seed)) / ("order-" + std::to_string(run.order)) /
         std::string(strategy_name(run.strategy));
}

inline std::string suite_signature(const SuiteConfig& c) {
  return "tasks=" + std::to_string(c.num_tasks) + ";train=" + std::to_string(c.train_per_task) +
         ";eval=" + std::to_string(c.eval_per_task) + ";rgd=" + std::to_string(c.rgd_per_task) +
         ";input_len=" + std::to_string(c.input_len);
}

inline std::string write_probes_csv(const std::vector<ProbeOutcome>& probes) {
  std::string out = "task,forgetting,probe,k,demos,draw,accuracy,best\n";
  for (const auto& p : probes) {
    const std::string head = p.task_id + "," + format_number(p.forgetting) + ",";
    for (const auto& kp : p.partial) {
      out += head + "partial," + format_number(kp.k) + ",,," + format_number(kp.accuracy) + ",\n";
    }
    for (const auto& arm : p.tap.grid) {
      const bool best = arm.demo_count == p.tap.best.demo_count && arm.draw == p.tap.best.draw;
      out += head + "tap,," + std::to_string(arm.demo_count) + "," + std::to_string(arm.draw) + "," +
             format_number(arm.accuracy) + "," + (best ? "1" : "0") + "\n";
    }
  }
  return out;
}

inline std::vector<ReportEntry> report_entries(const ExperimentResult& res) {
  std::vector<ReportEntry> entries;
  const auto signature = suite_signature(res.config.suite);
  for (const auto& b : res.baselines) {
    if (!b.single.empty()) entries.push_back(baseline_entry("Single", b.seed, signature, b.single));
    if (!b.multi.empty()) entries.push_back(baseline_entry("Multi", b.seed, signature, b.multi));
  }
  for (const auto& run : res.runs) {
    if (run.result.matrix.num_tasks() < 2) continue;
    entries.push_back(run_entry(run.strategy, run.seed, run.order, signature, run.metrics));
  }
  return entries;
}

inline void write_experiment(const ExperimentResult& res, const std::filesystem::path& root) {
  write_text_file(root / "config.json", config_to_json(res.config).dump(2) + "\n");
  const auto signature = suite_signature(res.config.suite);
  for (std::size_t s = 0; s < res.baselines.size(); ++s) {
    const auto& b = res.baselines[s];
    if (b.single.empty() && b.multi.empty()) continue;
    std::string csv = "task,single,multi\n";
    for (std::size_t t = 0; t < res.suites[s].tasks.size(); ++t) {
      csv += res.suites[s].tasks[t].task_id + "," + (b.single.empty() ? "" : format_number(b.single[t])) + "," +
             (b.multi.empty() ? "" : format_number(b.multi[t])) + "\n";
    }
    write_text_file(root / ("seed-" + std::to_string(b.seed)) / "baselines.csv", csv);
  }

  for (const auto& run : res.runs) {
    const auto dir = run_dir(root, run);
    const auto& r = run.result;
    Json meta{{"seed", run.seed},
              {"order", run.order},
              {"strategy", std::string(strategy_name(run.strategy))},
              {"suite", signature},
              {"tasks", r.matrix.order}};
    write_text_file(dir / "run.json", meta.dump(2) + "\n");
    write_text_file(dir / "matrix.csv", write_matrix_csv(r.matrix));

    std::string plans;
    for (std::size_t i = 0; i < r.plans.size(); ++i) {
      Json j{{"stage", i + 2}};
      j.update(plan_to_json(r.plans[i]));
      plans += j.dump() + "\n";
    }
    write_text_file(dir / "plans.jsonl", plans);

    std::string rgd;
    for (std::size_t i = 0; i < r.stage_rgd.size(); ++i) {
      for (const auto& t : r.stage_rgd[i]) {
        Json j{{"stage", i + 1}};
        j.update(rgd_to_json(t));
        rgd += j.dump() + "\n";
      }
    }
    write_text_file(dir / "rgd.jsonl", rgd);

    if (r.matrix.num_tasks() >= 2) {
      write_text_file(dir / "metrics.json", metrics_to_json(run.metrics).dump(2) + "\n");
      write_text_file(dir / "metrics.csv", write_metrics_csv(run.metrics));
    }
    if (!run.probes.empty()) write_text_file(dir / "probes.csv", write_probes_csv(run.probes));
    for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
      write_text_file(dir / "checkpoints" / ("stage-" + std::to_string(i + 1) + ".bin"), serialize_model(r.checkpoints[i]));
    }
  }
  write_text_file(root / "report.csv", emit_report(report_entries(res)));
}

}  // namespace rgdcl
