#pragma once

// Synthetic instruction / rationale / answer tasks.
//
// Every task reads a short sequence of words drawn from one shared content
// vocabulary and labels it by a keyword-pattern rule. A task renders an
// instruction x, a step-by-step rationale r whose final clause is
// "so <answer>", and the answer y. The training target is
// r [RESULT] y <eos>.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/rng.hpp"
#include "rgdcl/vocab.hpp"

namespace rgdcl {

inline constexpr std::string_view result_marker = "[RESULT]";

enum class Family { presence, position, parity, relation, topic };

inline constexpr std::array<Family, 5> all_families{Family::presence, Family::position, Family::parity,
                                                    Family::relation, Family::topic};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::presence: return "presence";
    case Family::position: return "position";
    case Family::parity: return "parity";
    case Family::relation: return "relation";
    case Family::topic: return "topic";
  }
  return "?";
}

/// Topic groups partition the content vocabulary.
inline const std::array<Tokens, 3>& topic_groups() {
  static const std::array<Tokens, 3> groups{Tokens{"oak", "pine", "elm", "fir"},
                                            Tokens{"lake", "reef", "tide", "bay"},
                                            Tokens{"rock", "cliff", "crag", "slate"}};
  return groups;
}

inline const Tokens& content_words() {
  static const Tokens words = [] {
    Tokens w;
    for (const auto& g : topic_groups()) w.insert(w.end(), g.begin(), g.end());
    return w;
  }();
  return words;
}

inline const Tokens& count_words() {
  static const Tokens words{"zero", "one", "two", "three", "four", "five", "six"};
  return words;
}

inline const Tokens& default_tap_template() {
  static const Tokens t{"reason", "step", "by", "step", "then", "answer", "."};
  return t;
}

namespace detail {

struct FamilyVariant {
  std::string_view instruction;
  std::string_view rationale;
  Tokens labels;
  Tokens features;  // family-specific feature words, empty when the feature is copied from the input
};

// Slots: {kw} keyword, {input} the raw words, {feature} a derived feature,
// {first}/{last} copied input words, {answer} the label.
inline const FamilyVariant& family_variant(Family f, int variant) {
  static const std::map<std::pair<Family, int>, FamilyVariant> table{
      {{Family::presence, 0},
       {"does text mention {kw} : {input} ?", "scan words for {kw} : {kw} {feature} so {answer}", {"yes", "no"},
        {"found", "absent"}}},
      {{Family::presence, 1},
       {"is {kw} present : {input} ?", "search text for {kw} : {kw} {feature} so {answer}", {"true", "false"},
        {"found", "absent"}}},
      {{Family::position, 0},
       {"where is {kw} : {input} ?", "locate {kw} : it sits in {feature} half so {answer}", {"first", "second"},
        {"front", "back"}}},
      {{Family::position, 1},
       {"which half holds {kw} : {input} ?", "find {kw} : it lies in {feature} half so {answer}", {"early", "late"},
        {"front", "back"}}},
      {{Family::parity, 0},
       {"parity of {kw} : {input} ?", "count {kw} marks : total {feature} so {answer}", {"even", "odd"}, count_words()}},
      {{Family::parity, 1},
       {"is {kw} count paired : {input} ?", "number {kw} marks : total {feature} so {answer}", {"pair", "lone"},
        count_words()}},
      {{Family::relation, 0},
       {"opening matches closing : {input} ?", "compare opening with closing : {first} vs {last} so {answer}",
        {"same", "different"}, {}}},
      {{Family::relation, 1},
       {"do ends agree : {input} ?", "check both ends : {first} and {last} so {answer}", {"match", "clash"}, {}}},
      {{Family::topic, 0},
       {"main topic : {input} ?", "tally word groups : {feature} lead so {answer}", {"forest", "sea", "mountain"},
        {"trees", "waters", "stones"}}},
      {{Family::topic, 1},
       {"dominant theme : {input} ?", "weigh word kinds : {feature} prevail so {answer}", {"woods", "ocean", "peak"},
        {"trees", "waters", "stones"}}},
  };
  return table.at({f, variant});
}

inline bool is_slot(std::string_view w) { return w.size() > 2 && w.front() == '{' && w.back() == '}'; }

inline bool family_uses_keyword(Family f) {
  return f == Family::presence || f == Family::position || f == Family::parity;
}

}  // namespace detail

inline constexpr std::size_t max_suite_tasks = 10;

struct TaskSpec {
  std::string task_id;
  Family family = Family::presence;
  int variant = 0;
  Tokens instruction_template;
  Tokens rationale_template;
  Tokens label_set;
  std::string keyword;  // empty for families that do not use one
  std::size_t input_len = 6;
};

struct Example {
  std::string task_id;
  std::string id;
  Tokens instruction;
  Tokens rationale;
  std::string answer;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Every token any suite can produce, in a fixed order, so checkpoints from
/// different suite seeds share one vocabulary.
inline Vocab suite_vocab() {
  Tokens words{std::string(result_marker)};
  const auto& content = content_words();
  words.insert(words.end(), content.begin(), content.end());
  for (Family f : all_families) {
    for (int v = 0; v < 2; ++v) {
      const auto& fv = detail::family_variant(f, v);
      for (const auto& w : split_words(fv.instruction)) {
        if (!detail::is_slot(w)) words.push_back(w);
      }
      for (const auto& w : split_words(fv.rationale)) {
        if (!detail::is_slot(w)) words.push_back(w);
      }
      words.insert(words.end(), fv.labels.begin(), fv.labels.end());
      words.insert(words.end(), fv.features.begin(), fv.features.end());
    }
  }
  const auto& tap = default_tap_template();
  words.insert(words.end(), tap.begin(), tap.end());
  return Vocab(words);
}

inline TaskSpec make_task_spec(std::string task_id, Family family, int variant, std::string keyword,
                               std::size_t input_len = 6) {
  require(variant == 0 || variant == 1, Errc::invalid_config, "task variant must be 0 or 1");
  require(input_len >= 2, Errc::invalid_config, "input length must be at least 2");
  const auto& fv = detail::family_variant(family, variant);
  if (detail::family_uses_keyword(family)) {
    const auto& content = content_words();
    require(std::find(content.begin(), content.end(), keyword) != content.end(), Errc::invalid_config,
            "keyword '" + keyword + "' is not a content word");
  } else {
    keyword.clear();
  }
  return TaskSpec{std::move(task_id), family,      variant, split_words(fv.instruction), split_words(fv.rationale),
                  fv.labels,          std::move(keyword), input_len};
}

namespace detail {

struct Labeled {
  std::string answer;
  std::string feature;
};

inline Labeled label_input(const TaskSpec& spec, const Tokens& input) {
  require(input.size() == spec.input_len, Errc::invalid_input,
          "input has " + std::to_string(input.size()) + " words, task expects " + std::to_string(spec.input_len));
  const auto& content = content_words();
  for (const auto& w : input) {
    require(std::find(content.begin(), content.end(), w) != content.end(), Errc::invalid_input,
            "word '" + w + "' is outside the content vocabulary");
  }
  const auto& fv = family_variant(spec.family, spec.variant);
  const auto hits = static_cast<std::size_t>(std::count(input.begin(), input.end(), spec.keyword));
  switch (spec.family) {
    case Family::presence:
      return hits > 0 ? Labeled{fv.labels[0], fv.features[0]} : Labeled{fv.labels[1], fv.features[1]};
    case Family::position: {
      require(hits == 1, Errc::invalid_input, "position task needs the keyword exactly once");
      const auto pos = static_cast<std::size_t>(std::find(input.begin(), input.end(), spec.keyword) - input.begin());
      return pos < input.size() / 2 ? Labeled{fv.labels[0], fv.features[0]} : Labeled{fv.labels[1], fv.features[1]};
    }
    case Family::parity:
      require(hits < fv.features.size(), Errc::invalid_input, "parity count exceeds the count words");
      return Labeled{fv.labels[hits % 2], fv.features[hits]};
    case Family::relation:
      return input.front() == input.back() ? Labeled{fv.labels[0], ""} : Labeled{fv.labels[1], ""};
    case Family::topic: {
      std::array<std::size_t, 3> counts{};
      for (const auto& w : input) {
        for (std::size_t g = 0; g < 3; ++g) {
          const auto& grp = topic_groups()[g];
          if (std::find(grp.begin(), grp.end(), w) != grp.end()) ++counts[g];
        }
      }
      const auto top = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      for (std::size_t g = 0; g < 3; ++g) {
        require(g == top || counts[g] < counts[top], Errc::invalid_input, "topic input has no strictly dominant group");
      }
      return Labeled{fv.labels[top], fv.features[top]};
    }
  }
  fail(Errc::invalid_input, "unknown family");
}

inline Tokens fill(const Tokens& tmpl, const TaskSpec& spec, const Tokens& input, const Labeled& lab) {
  Tokens out;
  for (const auto& w : tmpl) {
    if (w == "{kw}") {
      out.push_back(spec.keyword);
    } else if (w == "{input}") {
      out.insert(out.end(), input.begin(), input.end());
    } else if (w == "{feature}") {
      out.push_back(lab.feature);
    } else if (w == "{first}") {
      out.push_back(input.front());
    } else if (w == "{last}") {
      out.push_back(input.back());
    } else if (w == "{answer}") {
      out.push_back(lab.answer);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace detail

/// The answer a task's rule assigns to `raw_input`.
inline std::string label_of(const TaskSpec& spec, const Tokens& raw_input) {
  return detail::label_input(spec, raw_input).answer;
}

inline Example render_example(const TaskSpec& spec, const Tokens& raw_input, std::string id) {
  const auto lab = detail::label_input(spec, raw_input);
  return Example{spec.task_id, std::move(id), detail::fill(spec.instruction_template, spec, raw_input, lab),
                 detail::fill(spec.rationale_template, spec, raw_input, lab), lab.answer};
}

/// Draws one raw input from the task's grammar, with labels balanced.
inline Tokens sample_input(const TaskSpec& spec, Rng& rng) {
  const auto& content = content_words();
  const std::size_t n = spec.input_len;
  Tokens others;
  for (const auto& w : content) {
    if (w != spec.keyword) others.push_back(w);
  }
  Tokens input(n);
  for (auto& w : input) w = rng.pick(others);
  auto place_keyword = [&](std::size_t count) {
    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    rng.shuffle(slots);
    for (std::size_t i = 0; i < count; ++i) input[slots[i]] = spec.keyword;
  };
  switch (spec.family) {
    case Family::presence:
      if (rng.coin()) place_keyword(1 + rng.below(2));
      break;
    case Family::position: {
      const std::size_t half = n / 2;
      const std::size_t pos = rng.coin() ? rng.below(half) : half + rng.below(n - half);
      input[pos] = spec.keyword;
      break;
    }
    case Family::parity: {
      const std::size_t max_count = std::min(n, count_words().size() - 1);
      std::vector<std::size_t> counts;
      const bool even = rng.coin();
      for (std::size_t c = 0; c <= max_count; ++c) {
        if ((c % 2 == 0) == even) counts.push_back(c);
      }
      place_keyword(rng.pick(counts));
      break;
    }
    case Family::relation: {
      input.front() = rng.pick(content);
      if (rng.coin()) {
        input.back() = input.front();
      } else {
        do {
          input.back() = rng.pick(content);
        } while (input.back() == input.front());
      }
      break;
    }
    case Family::topic: {
      const auto& groups = topic_groups();
      const std::size_t top = rng.below(groups.size());
      for (;;) {
        const std::size_t lead = n / 2 + rng.below(2);
        std::array<std::size_t, 3> counts{};
        counts[top] = lead;
        Tokens words;
        for (std::size_t i = 0; i < lead; ++i) words.push_back(rng.pick(groups[top]));
        while (words.size() < n) {
          std::size_t g = rng.below(groups.size() - 1);
          if (g >= top) ++g;
          ++counts[g];
          words.push_back(rng.pick(groups[g]));
        }
        bool dominant = true;
        for (std::size_t g = 0; g < 3; ++g) dominant = dominant && (g == top || counts[g] < lead);
        if (!dominant) continue;
        rng.shuffle(words);
        input = words;
        break;
      }
      break;
    }
  }
  return input;
}

/// The rendered training target r [RESULT] y (EOS is appended at encoding).
inline Tokens rendered_target(const Example& ex) {
  Tokens t = ex.rationale;
  t.emplace_back(result_marker);
  t.push_back(ex.answer);
  return t;
}

inline TokenIds encode_target(const Vocab& vocab, const Example& ex) {
  TokenIds ids = vocab.encode(rendered_target(ex));
  ids.push_back(Vocab::eos);
  return ids;
}

/// Number of rationale tokens revealed at fraction k: ceil(k |r|), with a
/// 1e-9 guard so k = 0.6 on 10 tokens gives 6 even if k |r| rounds up.
inline std::size_t rationale_prefix_len(std::size_t rationale_len, double k) {
  require(k >= 0.0 && k <= 1.0, Errc::invalid_config, "rationale fraction k must be in [0, 1]");
  const double raw = std::ceil(k * static_cast<double>(rationale_len) - 1e-9);
  return std::min(rationale_len, static_cast<std::size_t>(std::max(0.0, raw)));
}

inline Tokens partial_rationale_prompt(const Example& ex, double k) {
  const std::size_t n = rationale_prefix_len(ex.rationale.size(), k);
  Tokens out = ex.instruction;
  out.insert(out.end(), ex.rationale.begin(), ex.rationale.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

/// Context template, then each demonstration rendered in full, then the
/// instruction. The evaluated example's own rationale never appears.
inline Tokens tap_prompt(const Example& ex, const std::vector<Example>& demos, const Tokens& context_template) {
  Tokens out = context_template;
  for (const auto& d : demos) {
    require(d.task_id != ex.task_id, Errc::invalid_config,
            "demonstration '" + d.id + "' comes from the evaluated task " + ex.task_id);
    out.insert(out.end(), d.instruction.begin(), d.instruction.end());
    const Tokens target = rendered_target(d);
    out.insert(out.end(), target.begin(), target.end());
  }
  out.insert(out.end(), ex.instruction.begin(), ex.instruction.end());
  return out;
}

/// Index of the rationale's final clause (the last "so"); label strings may
/// only occur from here on.
inline std::size_t final_clause_start(const Tokens& rationale) {
  for (std::size_t i = rationale.size(); i > 0; --i) {
    if (rationale[i - 1] == "so") return i - 1;
  }
  return rationale.size();
}

/// True when no label of the task occurs before the rationale's final clause.
inline bool rationale_prefix_is_clean(const TaskSpec& spec, const Example& ex) {
  const std::size_t cut = final_clause_start(ex.rationale);
  for (std::size_t i = 0; i < cut; ++i) {
    if (std::find(spec.label_set.begin(), spec.label_set.end(), ex.rationale[i]) != spec.label_set.end()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteConfig {
  std::size_t num_tasks = 5;
  std::size_t train_per_task = 200;
  std::size_t eval_per_task = 50;
  std::size_t rgd_per_task = 32;
  std::size_t input_len = 6;
  std::uint64_t seed = 1;

  void validate() const {
    require(num_tasks >= 2, Errc::invalid_config, "a suite needs at least 2 tasks");
    require(num_tasks <= max_suite_tasks, Errc::invalid_config,
            "a suite supports at most " + std::to_string(max_suite_tasks) + " tasks");
    require(train_per_task > 0 && eval_per_task > 0, Errc::invalid_config,
            "train_per_task and eval_per_task must be positive");
    require(input_len >= 4 && input_len <= 8, Errc::invalid_config, "input_len must be in [4, 8]");
  }

  friend bool operator==(const SuiteConfig&, const SuiteConfig&) = default;
};

struct Suite {
  SuiteConfig config;
  std::vector<TaskSpec> tasks;
  // Indexed like `tasks`.
  std::vector<std::vector<Example>> train;
  std::vector<std::vector<Example>> eval;
  std::vector<std::vector<Example>> rgd;  // held-out slice V for task-level difficulty
  // Two canonical training orders over task indices; the second reverses the first.
  std::array<std::vector<std::size_t>, 2> orders;

  std::size_t task_index(std::string_view task_id) const {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].task_id == task_id) return i;
    }
    fail(Errc::invalid_input, "unknown task '" + std::string(task_id) + "'");
  }
};

/// Tasks cycle through the five families (in a seeded order), first in
/// variant 0, then variant 1. Keywords are distinct content words. Raw
/// inputs are unique within a task, so train, eval and the difficulty slice
/// are disjoint.
inline Suite make_suite(const SuiteConfig& cfg) {
  cfg.validate();
  Suite suite;
  suite.config = cfg;
  Rng rng(derive_seed(cfg.seed, "suite"));

  std::vector<Family> families(all_families.begin(), all_families.end());
  rng.shuffle(families);
  Tokens keywords = content_words();
  rng.shuffle(keywords);
  std::size_t next_keyword = 0;

  for (std::size_t i = 0; i < cfg.num_tasks; ++i) {
    const Family f = families[i % families.size()];
    const int variant = static_cast<int>(i / families.size());
    std::string id = "t" + std::to_string(i + 1) + "_" + std::string(family_name(f));
    std::string kw;
    if (detail::family_uses_keyword(f)) kw = keywords[next_keyword++ % keywords.size()];
    suite.tasks.push_back(make_task_spec(std::move(id), f, variant, kw, cfg.input_len));
  }

  for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
    const TaskSpec& spec = suite.tasks[i];
    Rng task_rng(derive_seed(cfg.seed, "task-inputs", i));
    std::set<Tokens> seen;
    auto draw = [&](std::size_t count, std::string_view split) {
      std::vector<Example> out;
      std::size_t attempts = 0;
      while (out.size() < count) {
        require(++attempts < 1000 * (count + 10), Errc::invalid_config,
                "cannot draw enough distinct inputs for task " + spec.task_id);
        Tokens input = sample_input(spec, task_rng);
        if (!seen.insert(input).second) continue;
        out.push_back(render_example(spec, input, spec.task_id + "-" + std::string(split) + "-" +
                                                      std::to_string(out.size())));
      }
      return out;
    };
    suite.train.push_back(draw(cfg.train_per_task, "train"));
    suite.eval.push_back(draw(cfg.eval_per_task, "eval"));
    suite.rgd.push_back(draw(cfg.rgd_per_task, "rgd"));
  }

  std::vector<std::size_t> order(cfg.num_tasks);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng order_rng(derive_seed(cfg.seed, "orders"));
  order_rng.shuffle(order);
  suite.orders[0] = order;
  std::reverse(order.begin(), order.end());
  suite.orders[1] = order;
  return suite;
}

}  // namespace rgdcl
