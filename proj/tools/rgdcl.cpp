// rgdcl: command-line front end for suites, continual-learning runs, probes,
// difficulty scoring, replay plans, metrics and reports.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rgdcl/rgdcl.hpp"

namespace fs = std::filesystem;
using namespace rgdcl;

namespace {

constexpr const char* output_root_env = "RGDCL_OUTPUT_ROOT";

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path), path);
}

// Suite parameters come from a config file when given, else the defaults;
// the seed is always explicit.
Suite suite_for(const std::string& config_path, std::uint64_t seed) {
  SuiteConfig sc;
  if (!config_path.empty()) {
    // A config used only for its suite section still has to name its seeds.
    sc = load_config(config_path).suite;
  }
  sc.seed = seed;
  return make_suite(sc);
}

std::vector<std::size_t> task_indices(const Suite& suite, const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  if (ids.empty()) {
    for (std::size_t t = 0; t < suite.tasks.size(); ++t) out.push_back(t);
  }
  for (const auto& id : ids) out.push_back(suite.task_index(id));
  return out;
}

fs::path resolve_output(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* root = std::getenv(output_root_env); root && *root) return fs::path(root) / cfg.name;
  return fs::path("runs") / cfg.name;
}

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

struct GenSuiteArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

int gen_suite(const GenSuiteArgs& a) {
  const Suite suite = suite_for(a.config, a.seed);
  const fs::path dir = a.out;
  std::vector<Example> train;
  std::vector<Example> eval;
  std::vector<Example> rgd;
  for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
    train.insert(train.end(), suite.train[t].begin(), suite.train[t].end());
    eval.insert(eval.end(), suite.eval[t].begin(), suite.eval[t].end());
    rgd.insert(rgd.end(), suite.rgd[t].begin(), suite.rgd[t].end());
  }
  write_text_file(dir / "train.jsonl", write_corpus(train));
  write_text_file(dir / "eval.jsonl", write_corpus(eval));
  write_text_file(dir / "rgd.jsonl", write_corpus(rgd));

  Json tasks = Json::array();
  for (const auto& spec : suite.tasks) {
    tasks.push_back(Json{{"task", spec.task_id},
                         {"family", std::string(family_name(spec.family))},
                         {"variant", spec.variant},
                         {"instruction_template", join_words(spec.instruction_template)},
                         {"rationale_template", join_words(spec.rationale_template)},
                         {"labels", spec.label_set},
                         {"keyword", spec.keyword}});
  }
  Json orders = Json::array();
  for (const auto& order : suite.orders) {
    Json o = Json::array();
    for (std::size_t t : order) o.push_back(suite.tasks[t].task_id);
    orders.push_back(o);
  }
  write_text_file(dir / "suite.json", Json{{"seed", a.seed}, {"tasks", tasks}, {"orders", orders}}.dump(2) + "\n");
  std::cerr << "wrote " << suite.tasks.size() << " tasks to " << dir.string() << "\n";
  return 0;
}

struct RunSeqArgs {
  std::string config;
  std::string out;
};

int run_seq(const RunSeqArgs& a, std::size_t threads) {
  const ExperimentConfig cfg = load_config(a.config);
  const fs::path root = resolve_output(a.out, cfg);
  const ExperimentResult res = run_experiment(cfg, threads);
  write_experiment(res, root);
  std::cerr << "wrote " << res.runs.size() << " runs to " << root.string() << "\n";
  return 0;
}

struct ProbeArgs {
  std::string checkpoint;
  std::string config;
  std::uint64_t seed = 0;
  std::vector<std::string> tasks;
  std::vector<double> k_grid = default_k_grid();
  std::vector<std::size_t> demo_counts{1, 2, 4, 8};
  std::size_t draws = 3;
  std::uint64_t tap_seed = 0;
  std::size_t max_decode = 24;
  std::string out;
};

int probe(const ProbeArgs& a) {
  const ModelState model = load_model(a.checkpoint);
  const Suite suite = suite_for(a.config, a.seed);
  require(!a.tasks.empty(), Errc::invalid_config, "--task: at least one task to probe");
  TapConfig tc;
  tc.demo_counts = a.demo_counts;
  tc.draws = a.draws;
  tc.max_decode = a.max_decode;
  std::vector<ProbeOutcome> probes;
  for (std::size_t task : task_indices(suite, a.tasks)) {
    std::vector<std::size_t> pool;
    for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
      if (t != task) pool.push_back(t);
    }
    tc.seed = derive_seed(a.tap_seed, "tap", task);
    ProbeOutcome p;
    p.task_id = suite.tasks[task].task_id;
    p.partial = probe_partial_rationale(model, suite, task, a.k_grid, a.max_decode);
    p.tap = probe_tap(model, suite, task, pool, tc);
    probes.push_back(std::move(p));
  }
  emit(write_probes_csv(probes), a.out);
  return 0;
}

struct ScoreArgs {
  std::string checkpoint;
  std::string from_records;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tasks;
  std::string split = "rgd";
  std::string aggregator = "mean";
  std::string records_out;
  std::string out;
};

int score_rgd(const ScoreArgs& a) {
  RgdAggregator agg = RgdAggregator::mean;
  if (a.aggregator == "mean-minus-std") {
    agg = RgdAggregator::mean_minus_std;
  } else {
    require(a.aggregator == "mean", Errc::invalid_config, "--aggregator: expected mean or mean-minus-std");
  }

  std::vector<PplRecord> records;
  if (!a.from_records.empty()) {
    require(a.checkpoint.empty(), Errc::invalid_config, "--from-records and --checkpoint are exclusive");
    records = import_ppl_records(a.from_records);
  } else {
    require(!a.checkpoint.empty(), Errc::invalid_config, "either --checkpoint or --from-records is required");
    require(a.seed.has_value(), Errc::invalid_config, "--seed: scoring a checkpoint needs the suite seed");
    const ModelState model = load_model(a.checkpoint);
    const Suite suite = suite_for(a.config, *a.seed);
    for (std::size_t t : task_indices(suite, a.tasks)) {
      const std::vector<Example>* examples = nullptr;
      if (a.split == "rgd") {
        examples = &suite.rgd[t];
      } else if (a.split == "eval") {
        examples = &suite.eval[t];
      } else if (a.split == "train") {
        examples = &suite.train[t];
      } else {
        fail(Errc::invalid_config, "--split: expected rgd, eval or train");
      }
      const auto scored = score_records(model, *examples);
      records.insert(records.end(), scored.begin(), scored.end());
    }
  }
  if (!a.records_out.empty()) write_text_file(a.records_out, write_ppl_records(records));

  std::string text;
  for (const auto& t : task_rgd_by_task(records, agg)) text += rgd_to_json(t).dump() + "\n";
  emit(text, a.out);
  return 0;
}

struct AllocateArgs {
  std::string strategy;
  long long budget = -1;
  std::vector<std::string> tasks;
  std::vector<double> scores;
  std::string summaries;
  std::vector<double> distances;
  std::vector<std::size_t> pools;
  std::string out;
};

int allocate(AllocateArgs a) {
  auto names_for = [&](std::size_t n) {
    if (a.tasks.empty()) {
      for (std::size_t i = 0; i < n; ++i) a.tasks.push_back("t" + std::to_string(i + 1));
    }
    require(a.tasks.size() == n, Errc::invalid_input,
            "--tasks: expected " + std::to_string(n) + " names, got " + std::to_string(a.tasks.size()));
    return a.tasks;
  };

  AllocationPlan plan;
  if (a.strategy == "equal") {
    require(!a.tasks.empty(), Errc::invalid_input, "--tasks: equal allocation needs the previous tasks");
    plan = allocate_equal(a.tasks, a.budget);
  } else if (a.strategy == "inscl") {
    plan = allocate_inscl(names_for(a.distances.size()), a.distances, a.budget);
  } else if (a.strategy == "rgd" || a.strategy == "rgd-mean" || a.strategy == "rgd-mean-minus-std") {
    const std::string name = a.strategy == "rgd" ? "rgd-mean" : a.strategy;
    if (!a.summaries.empty()) {
      require(a.scores.empty(), Errc::invalid_config, "--scores and --summaries are exclusive");
      const auto agg = name == "rgd-mean" ? RgdAggregator::mean : RgdAggregator::mean_minus_std;
      std::vector<TaskRgd> summaries = read_rgd_summaries(read_text_file(a.summaries), a.summaries);
      for (auto& s : summaries) s.score = summary_scalar(s.summary, agg);
      plan = allocate_rgd(summaries, a.budget, name);
    } else {
      require(!a.scores.empty(), Errc::invalid_input, "--scores or --summaries is required for rgd allocation");
      plan = allocate_rgd(names_for(a.scores.size()), a.scores, a.budget, name);
    }
  } else {
    fail(Errc::invalid_config, "--strategy: expected equal, inscl, rgd, rgd-mean or rgd-mean-minus-std");
  }
  if (!a.pools.empty()) plan = fit_to_pools(std::move(plan), a.pools);
  emit(plan_to_json(plan).dump(2) + "\n", a.out);
  return 0;
}

struct MetricsArgs {
  std::string matrix;
  std::string json_out;
  std::string out;
};

int metrics(const MetricsArgs& a) {
  const PerfMatrix m = read_matrix_csv(read_text_file(a.matrix), a.matrix);
  const MetricsReport r = compute_report(m);
  if (!a.json_out.empty()) write_text_file(a.json_out, metrics_to_json(r).dump(2) + "\n");
  emit(write_metrics_csv(r), a.out);
  return 0;
}

// Reads seed-*/baselines.csv and seed-*/order-*/<strategy>/{run.json,metrics.json}.
std::vector<ReportEntry> collect_entries(const fs::path& root) {
  require(fs::is_directory(root), Errc::io_error, root.string() + " is not a directory");
  std::vector<fs::path> run_files;
  std::vector<fs::path> baseline_files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().filename() == "run.json") run_files.push_back(e.path());
    if (e.path().filename() == "baselines.csv") baseline_files.push_back(e.path());
  }
  std::sort(run_files.begin(), run_files.end());
  std::sort(baseline_files.begin(), baseline_files.end());

  std::vector<ReportEntry> entries;
  std::string signature;
  for (const auto& path : run_files) {
    const Json meta = detail::parse_json(read_text_file(path), path.string());
    const auto metrics_path = path.parent_path() / "metrics.json";
    if (!fs::exists(metrics_path)) continue;
    const MetricsReport m =
        metrics_from_json(detail::parse_json(read_text_file(metrics_path), metrics_path.string()), metrics_path.string());
    const std::string where = path.string();
    signature = detail::string_field(meta, "suite", where);
    entries.push_back(run_entry(parse_strategy(detail::string_field(meta, "strategy", where)),
                                detail::count_field(meta, "seed", where), detail::count_field(meta, "order", where),
                                signature, m));
  }
  for (const auto& path : baseline_files) {
    // The seed is encoded in the directory name.
    const std::string dir = path.parent_path().filename().string();
    require(dir.rfind("seed-", 0) == 0, Errc::parse_error, path.string() + ": expected a seed-<n> directory");
    const auto seed = parse_number(dir.substr(5));
    require(seed.has_value(), Errc::parse_error, path.string() + ": bad seed directory name");
    const std::string text = read_text_file(path);
    const auto lines = split_lines(text);
    std::vector<double> single;
    std::vector<double> multi;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto cells = split_csv_row(lines[i]);
      require(cells.size() == 3, Errc::parse_error, path.string() + ":" + std::to_string(i + 1) + ": expected 3 cells");
      if (auto x = parse_number(cells[1])) single.push_back(*x);
      if (auto x = parse_number(cells[2])) multi.push_back(*x);
    }
    const auto s = static_cast<std::uint64_t>(*seed);
    if (!single.empty()) entries.push_back(baseline_entry("Single", s, signature, single));
    if (!multi.empty()) entries.push_back(baseline_entry("Multi", s, signature, multi));
  }
  return entries;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

int report(const ReportArgs& a) {
  std::vector<ReportEntry> entries;
  for (const auto& dir : a.runs) {
    auto more = collect_entries(dir);
    entries.insert(entries.end(), more.begin(), more.end());
  }
  emit(emit_report(entries), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rationale-guided replay for continual learning on a small language model"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Maximum number of worker threads")->check(CLI::PositiveNumber);

  GenSuiteArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-suite", "Write a synthetic suite as JSON-lines corpora");
  gen_cmd->add_option("--seed", gen.seed, "Suite seed")->required();
  gen_cmd->add_option("--config", gen.config, "Experiment config supplying suite parameters")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  RunSeqArgs seq;
  auto* seq_cmd = app.add_subcommand("run-seq", "Run every seed, order and strategy of an experiment config");
  seq_cmd->add_option("config", seq.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  seq_cmd->add_option("--out", seq.out, std::string("Output directory (default: config output_dir, then $") +
                                            output_root_env + "/<name>, then runs/<name>)");

  ProbeArgs pr;
  auto* probe_cmd = app.add_subcommand("probe", "Partial-rationale and task-agnostic prefix probes on a checkpoint");
  probe_cmd->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--seed", pr.seed, "Suite seed")->required();
  probe_cmd->add_option("--config", pr.config, "Experiment config supplying suite parameters")->check(CLI::ExistingFile);
  probe_cmd->add_option("--task", pr.tasks, "Task id to probe (repeatable)")->required();
  probe_cmd->add_option("--k-grid", pr.k_grid, "Rationale fractions")->delimiter(',');
  probe_cmd->add_option("--demo-counts", pr.demo_counts, "Demonstration counts")->delimiter(',');
  probe_cmd->add_option("--draws", pr.draws, "Demonstration draws per count");
  probe_cmd->add_option("--tap-seed", pr.tap_seed, "Seed for demonstration draws")->required();
  probe_cmd->add_option("--max-decode", pr.max_decode, "Maximum generated tokens");
  probe_cmd->add_option("--out", pr.out, "Output CSV (default: stdout)");

  ScoreArgs sc;
  auto* score_cmd = app.add_subcommand("score-rgd", "Task-level rationale-guidance difficulty");
  score_cmd->add_option("--checkpoint", sc.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  score_cmd->add_option("--from-records", sc.from_records, "PPL-record JSON-lines file")->check(CLI::ExistingFile);
  score_cmd->add_option("--seed", sc.seed, "Suite seed (with --checkpoint)");
  score_cmd->add_option("--config", sc.config, "Experiment config supplying suite parameters")->check(CLI::ExistingFile);
  score_cmd->add_option("--task", sc.tasks, "Task id to score (repeatable; default all)");
  score_cmd->add_option("--split", sc.split, "Examples to score: rgd, eval or train");
  score_cmd->add_option("--aggregator", sc.aggregator, "mean or mean-minus-std");
  score_cmd->add_option("--records-out", sc.records_out, "Also write the per-example PPL records here");
  score_cmd->add_option("--out", sc.out, "Output JSON-lines (default: stdout)");

  AllocateArgs al;
  auto* alloc_cmd = app.add_subcommand("allocate", "Replay allocation plan");
  alloc_cmd->add_option("--strategy", al.strategy, "equal, inscl, rgd, rgd-mean or rgd-mean-minus-std")->required();
  alloc_cmd->add_option("--budget", al.budget, "Total replay examples")->required();
  alloc_cmd->add_option("--tasks", al.tasks, "Previous task ids in sequence order")->delimiter(',');
  alloc_cmd->add_option("--scores", al.scores, "Difficulty scalar per task")->delimiter(',');
  alloc_cmd->add_option("--summaries", al.summaries, "Difficulty summaries (JSON-lines)")->check(CLI::ExistingFile);
  alloc_cmd->add_option("--distances", al.distances, "Instruction distance per task")->delimiter(',');
  alloc_cmd->add_option("--pools", al.pools, "Available examples per task")->delimiter(',');
  alloc_cmd->add_option("--out", al.out, "Output JSON (default: stdout)");

  MetricsArgs me;
  auto* metrics_cmd = app.add_subcommand("metrics", "FAP, F.Ra, BWT, FWT and CAP from a matrix CSV");
  metrics_cmd->add_option("matrix", me.matrix, "Performance matrix CSV")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--json", me.json_out, "Also write the report as JSON");
  metrics_cmd->add_option("--out", me.out, "Output CSV (default: stdout)");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Comparison table over run directories");
  report_cmd->add_option("runs", rp.runs, "Experiment output directories")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", rp.out, "Output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) return gen_suite(gen);
    if (seq_cmd->parsed()) return run_seq(seq, threads);
    if (probe_cmd->parsed()) return probe(pr);
    if (score_cmd->parsed()) return score_rgd(sc);
    if (alloc_cmd->parsed()) return allocate(al);
    if (metrics_cmd->parsed()) return metrics(me);
    if (report_cmd->parsed()) return report(rp);
  } catch (const Error& e) {
    std::cerr << "rgdcl: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rgdcl: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
