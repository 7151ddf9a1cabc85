#pragma once

// Rationale-guidance difficulty: how much harder the rationale r is to
// produce when the model is prompted with x than when it produces r alone,
//   rgd = PPL(r | x) / PPL(r) = exp(mean NLL(r | x) - mean NLL(r)).
// Above 1 the prompt hurts; below 1 it guides.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/taskgen.hpp"
#include "rgdcl/tinylm.hpp"

namespace rgdcl {

struct PplRecord {
  std::string task_id;
  std::string example_id;
  double nll_cond_sum = 0.0;    // nats, rationale given the instruction
  double nll_uncond_sum = 0.0;  // nats, rationale after BOS only
  std::size_t n_rationale_tokens = 0;

  void validate() const {
    require(n_rationale_tokens >= 1, Errc::invalid_input, "n_rationale_tokens must be at least 1");
    require(std::isfinite(nll_cond_sum) && nll_cond_sum >= 0.0, Errc::invalid_input,
            "nll_cond_sum must be finite and nonnegative");
    require(std::isfinite(nll_uncond_sum) && nll_uncond_sum >= 0.0, Errc::invalid_input,
            "nll_uncond_sum must be finite and nonnegative");
  }

  friend bool operator==(const PplRecord&, const PplRecord&) = default;
};

enum class RgdAggregator { mean, mean_minus_std };

/// Lower bound on the allocator scalar so proportional shares stay defined.
inline constexpr double rgd_floor = 1e-6;

struct RgdSummary {
  std::string task_id;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;

  friend bool operator==(const RgdSummary&, const RgdSummary&) = default;
};

inline double rgd_score(double ppl_cond, double ppl_uncond) {
  require(ppl_cond > 0.0 && ppl_uncond > 0.0, Errc::invalid_ppl, "perplexities must be positive");
  return ppl_cond / ppl_uncond;
}

/// Log-domain form; never overflows for long rationales.
inline double rgd_score(const PplRecord& rec) {
  rec.validate();
  const double n = static_cast<double>(rec.n_rationale_tokens);
  return std::exp(rec.nll_cond_sum / n - rec.nll_uncond_sum / n);
}

struct ScoredExample {
  PplRecord record;
  double rgd = 0.0;
};

inline ScoredExample rgd_from_model(const ModelState& model, const Example& ex) {
  require(!ex.rationale.empty(), Errc::empty_target, "example " + ex.id + " has an empty rationale");
  const TokenIds x = model.vocab().encode(ex.instruction);
  const TokenIds r = model.vocab().encode(ex.rationale);
  const NllResult cond = sequence_nll(model, x, r);
  const NllResult uncond = sequence_nll(model, {}, r);
  ScoredExample out;
  out.record = PplRecord{ex.task_id, ex.id, cond.sum_nll, uncond.sum_nll, r.size()};
  out.rgd = rgd_score(perplexity(cond), perplexity(uncond));
  return out;
}

inline std::vector<PplRecord> score_records(const ModelState& model, std::span<const Example> examples) {
  std::vector<PplRecord> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(rgd_from_model(model, ex).record);
  return out;
}

struct TaskRgd {
  RgdSummary summary;
  double score = 0.0;  // allocator scalar
};

inline double summary_scalar(const RgdSummary& s, RgdAggregator agg) {
  const double raw = agg == RgdAggregator::mean ? s.mean : s.mean - s.std;
  return std::max(raw, rgd_floor);
}

inline TaskRgd task_rgd(std::span<const PplRecord> records, RgdAggregator agg = RgdAggregator::mean) {
  require(!records.empty(), Errc::invalid_input, "task_rgd needs at least one record");
  const std::string& task = records.front().task_id;
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) {
    require(r.task_id == task, Errc::invalid_input,
            "task_rgd got records from both '" + task + "' and '" + r.task_id + "'");
    scores.push_back(rgd_score(r));
  }
  // Sorted summation keeps the result independent of record order.
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double mean = sum / n;
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  TaskRgd out;
  out.summary = RgdSummary{task, mean, scores.size() == 1 ? 0.0 : std::sqrt(sq / n), scores.size()};
  out.score = summary_scalar(out.summary, agg);
  return out;
}

/// Groups records by task, keeping first-appearance order.
inline std::vector<TaskRgd> task_rgd_by_task(std::span<const PplRecord> records,
                                             RgdAggregator agg = RgdAggregator::mean) {
  std::vector<std::string> order;
  std::vector<std::vector<PplRecord>> groups;
  for (const auto& r : records) {
    auto it = std::find(order.begin(), order.end(), r.task_id);
    if (it == order.end()) {
      order.push_back(r.task_id);
      groups.emplace_back();
      groups.back().push_back(r);
    } else {
      groups[static_cast<std::size_t>(it - order.begin())].push_back(r);
    }
  }
  std::vector<TaskRgd> out;
  for (const auto& g : groups) out.push_back(task_rgd(g, agg));
  return out;
}

}  // namespace rgdcl
