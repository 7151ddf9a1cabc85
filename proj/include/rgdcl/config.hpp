#pragma once

// Declarative experiment configuration (JSON). Every key is optional except
// `seeds`; unknown keys are rejected by their dotted path.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rgdcl/driver.hpp"
#include "rgdcl/error.hpp"
#include "rgdcl/io.hpp"

namespace rgdcl {

struct ProbeSettings {
  bool enabled = true;
  std::size_t top_forgotten = 3;
  std::vector<double> k_grid = default_k_grid();
  std::vector<std::size_t> tap_demo_counts{1, 2, 4, 8};
  std::size_t tap_draws = 3;
  std::string tap_template = join_words(default_tap_template());

  friend bool operator==(const ProbeSettings&, const ProbeSettings&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds;  // each seed drives one suite and its runs
  SuiteConfig suite;
  ModelDims model;
  TrainConfig train;
  std::vector<Strategy> strategies{Strategy::none, Strategy::equal, Strategy::inscl, Strategy::rgd_mean};
  std::vector<std::size_t> orders{0, 1};
  double budget_fraction = 0.05;
  std::optional<std::size_t> budget;
  bool single_baseline = true;
  bool multitask_baseline = true;
  ProbeSettings probe;
  std::size_t max_decode = 24;
  std::string output_dir;  // empty: chosen by the caller

  void validate() const {
    require(!name.empty(), Errc::invalid_config, "name: must be nonempty");
    require(name.find_first_of("/\\") == std::string::npos, Errc::invalid_config, "name: must not contain slashes");
    require(!seeds.empty(), Errc::invalid_config, "seeds: at least one explicit seed is required");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        require(seeds[i] != seeds[j], Errc::invalid_config, "seeds: duplicate seed " + std::to_string(seeds[i]));
      }
    }
    try {
      suite.validate();
    } catch (const Error& e) {
      fail(Errc::invalid_config, std::string("suite: ") + e.what());
    }
    require(model.context_len > 0 && model.embed_dim > 0 && model.hidden_dim > 0, Errc::invalid_config,
            "model: dimensions must be positive");
    try {
      train.validate();
    } catch (const Error& e) {
      fail(Errc::invalid_config, std::string("train: ") + e.what());
    }
    require(!strategies.empty(), Errc::invalid_config, "strategies: at least one strategy is required");
    require(!orders.empty(), Errc::invalid_config, "orders: at least one order is required");
    for (std::size_t o : orders) require(o <= 1, Errc::invalid_config, "orders: entries must be 0 or 1");
    require(budget_fraction >= 0.0 && budget_fraction <= 1.0, Errc::invalid_config,
            "budget_fraction: must be in [0, 1]");
    for (Strategy s : strategies) {
      require(!uses_rgd(s) || suite.rgd_per_task >= 1, Errc::invalid_config,
              "suite.rgd_per_task: rgd strategies need at least 1");
    }
    require(max_decode >= 1, Errc::invalid_config, "max_decode: must be positive");
    require(!probe.k_grid.empty(), Errc::invalid_config, "probe.k_grid: must be nonempty");
    for (double k : probe.k_grid) require(k >= 0.0 && k <= 1.0, Errc::invalid_config, "probe.k_grid: k must be in [0, 1]");
    require(probe.tap_draws >= 1, Errc::invalid_config, "probe.tap_draws: must be positive");
    require(probe.top_forgotten >= 1, Errc::invalid_config, "probe.top_forgotten: must be positive");
  }

  RunConfig run_config(Strategy strategy, std::size_t order, std::uint64_t seed) const {
    RunConfig rc;
    rc.dims = model;
    rc.train = train;
    rc.strategy = strategy;
    rc.budget_fraction = budget_fraction;
    rc.budget = budget;
    rc.order_index = order;
    rc.run_seed = seed;
    rc.max_decode = max_decode;
    return rc;
  }

  SuiteConfig suite_config(std::uint64_t seed) const {
    SuiteConfig sc = suite;
    sc.seed = seed;
    return sc;
  }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    require(obj_.is_object(), Errc::invalid_config, where() + "must be an object");
  }

  void finish(std::initializer_list<std::string_view> allowed) const {
    for (const auto& item : obj_.items()) {
      bool known = false;
      for (auto k : allowed) known = known || item.key() == k;
      require(known, Errc::invalid_config, where() + "unknown key '" + key_path(item.key()) + "'");
    }
  }

  const Json* get(std::string_view key) const {
    const auto it = obj_.find(std::string(key));
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string key_path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  void read(std::string_view key, std::size_t& out) const {
    if (const Json* v = get(key)) {
      require(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0), Errc::invalid_config,
              key_path(key) + ": must be a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void read(std::string_view key, double& out) const {
    if (const Json* v = get(key)) {
      require(v->is_number(), Errc::invalid_config, key_path(key) + ": must be a number");
      out = v->get<double>();
    }
  }

  void read(std::string_view key, bool& out) const {
    if (const Json* v = get(key)) {
      require(v->is_boolean(), Errc::invalid_config, key_path(key) + ": must be true or false");
      out = v->get<bool>();
    }
  }

  void read(std::string_view key, std::string& out) const {
    if (const Json* v = get(key)) {
      require(v->is_string(), Errc::invalid_config, key_path(key) + ": must be a string");
      out = v->get<std::string>();
    }
  }

  template <class T>
  void read_list(std::string_view key, std::vector<T>& out) const {
    if (const Json* v = get(key)) {
      require(v->is_array(), Errc::invalid_config, key_path(key) + ": must be a list");
      out.clear();
      for (const auto& e : *v) {
        if constexpr (std::is_same_v<T, double>) {
          require(e.is_number(), Errc::invalid_config, key_path(key) + ": entries must be numbers");
        } else {
          require(e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0), Errc::invalid_config,
                  key_path(key) + ": entries must be nonnegative integers");
        }
        out.push_back(e.get<T>());
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string() : path_ + ": "; }

  const Json& obj_;
  std::string path_;
};

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  const detail::ConfigReader top(j, "");
  top.finish({"name", "seeds", "suite", "model", "train", "strategies", "orders", "budget_fraction", "budget",
              "baselines", "probe", "max_decode", "output_dir"});
  top.read("name", c.name);
  top.read_list("seeds", c.seeds);
  if (const Json* s = top.get("suite")) {
    const detail::ConfigReader r(*s, "suite");
    r.finish({"num_tasks", "train_per_task", "eval_per_task", "rgd_per_task", "input_len"});
    r.read("num_tasks", c.suite.num_tasks);
    r.read("train_per_task", c.suite.train_per_task);
    r.read("eval_per_task", c.suite.eval_per_task);
    r.read("rgd_per_task", c.suite.rgd_per_task);
    r.read("input_len", c.suite.input_len);
  }
  if (const Json* m = top.get("model")) {
    const detail::ConfigReader r(*m, "model");
    r.finish({"context_len", "embed_dim", "hidden_dim", "direct"});
    r.read("context_len", c.model.context_len);
    r.read("embed_dim", c.model.embed_dim);
    r.read("hidden_dim", c.model.hidden_dim);
    r.read("direct", c.model.direct);
  }
  if (const Json* t = top.get("train")) {
    const detail::ConfigReader r(*t, "train");
    r.finish({"learning_rate", "epochs", "batch_size", "momentum", "shuffle"});
    r.read("learning_rate", c.train.learning_rate);
    r.read("epochs", c.train.epochs);
    r.read("batch_size", c.train.batch_size);
    r.read("momentum", c.train.momentum);
    r.read("shuffle", c.train.shuffle);
  }
  if (const Json* s = top.get("strategies")) {
    require(s->is_array(), Errc::invalid_config, "strategies: must be a list");
    c.strategies.clear();
    for (const auto& e : *s) {
      require(e.is_string(), Errc::invalid_config, "strategies: entries must be strings");
      try {
        c.strategies.push_back(parse_strategy(e.get<std::string>()));
      } catch (const Error& err) {
        fail(Errc::invalid_config, std::string("strategies: ") + err.what());
      }
    }
  }
  top.read_list("orders", c.orders);
  top.read("budget_fraction", c.budget_fraction);
  if (const Json* b = top.get("budget"); b && !b->is_null()) {
    std::size_t budget = 0;
    top.read("budget", budget);
    c.budget = budget;
  }
  if (const Json* b = top.get("baselines")) {
    const detail::ConfigReader r(*b, "baselines");
    r.finish({"single", "multi"});
    r.read("single", c.single_baseline);
    r.read("multi", c.multitask_baseline);
  }
  if (const Json* p = top.get("probe")) {
    const detail::ConfigReader r(*p, "probe");
    r.finish({"enabled", "top_forgotten", "k_grid", "tap_demo_counts", "tap_draws", "tap_template"});
    r.read("enabled", c.probe.enabled);
    r.read("top_forgotten", c.probe.top_forgotten);
    r.read_list("k_grid", c.probe.k_grid);
    r.read_list("tap_demo_counts", c.probe.tap_demo_counts);
    r.read("tap_draws", c.probe.tap_draws);
    r.read("tap_template", c.probe.tap_template);
  }
  top.read("max_decode", c.max_decode);
  top.read("output_dir", c.output_dir);
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(std::string_view text, const std::string& source = "config") {
  return config_from_json(detail::parse_json(text, source));
}

/// The fully resolved config, every default spelled out.
inline Json config_to_json(const ExperimentConfig& c) {
  Json strategies = Json::array();
  for (Strategy s : c.strategies) strategies.push_back(std::string(strategy_name(s)));
  return Json{
      {"name", c.name},
      {"seeds", c.seeds},
      {"suite",
       {{"num_tasks", c.suite.num_tasks},
        {"train_per_task", c.suite.train_per_task},
        {"eval_per_task", c.suite.eval_per_task},
        {"rgd_per_task", c.suite.rgd_per_task},
        {"input_len", c.suite.input_len}}},
      {"model",
       {{"context_len", c.model.context_len},
        {"embed_dim", c.model.embed_dim},
        {"hidden_dim", c.model.hidden_dim},
        {"direct", c.model.direct}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"momentum", c.train.momentum},
        {"shuffle", c.train.shuffle}}},
      {"strategies", strategies},
      {"orders", c.orders},
      {"budget_fraction", c.budget_fraction},
      {"budget", c.budget ? Json(*c.budget) : Json(nullptr)},
      {"baselines", {{"single", c.single_baseline}, {"multi", c.multitask_baseline}}},
      {"probe",
       {{"enabled", c.probe.enabled},
        {"top_forgotten", c.probe.top_forgotten},
        {"k_grid", c.probe.k_grid},
        {"tap_demo_counts", c.probe.tap_demo_counts},
        {"tap_draws", c.probe.tap_draws},
        {"tap_template", c.probe.tap_template}}},
      {"max_decode", c.max_decode},
      {"output_dir", c.output_dir},
  };
}

}  // namespace rgdcl
