#pragma once

// Replay budget allocation across previous tasks and replay sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/rgd.hpp"
#include "rgdcl/rng.hpp"
#include "rgdcl/taskgen.hpp"

namespace rgdcl {

struct Shortfall {
  std::string task_id;
  std::size_t requested = 0;
  std::size_t granted = 0;

  friend bool operator==(const Shortfall&, const Shortfall&) = default;
};

struct AllocationPlan {
  std::size_t budget = 0;
  std::string strategy;
  std::vector<std::string> tasks;   // previous tasks in sequence order
  std::vector<std::size_t> counts;  // parallel to `tasks`
  std::vector<Shortfall> shortfalls;

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

  std::size_t count_for(const std::string& task) const {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i] == task) return counts[i];
    }
    return 0;
  }

  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

/// Hamilton / largest-remainder apportionment of `total` seats by `weights`.
/// Remainders within 1e-9 of each other tie, and ties go to the earlier
/// index; this also makes the result invariant to rescaling the weights.
inline std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  require(!weights.empty(), Errc::invalid_input, "apportionment needs at least one weight");
  double sum = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, Errc::invalid_input, "apportionment weights must be finite and >= 0");
    sum += w;
  }
  require(sum > 0.0, Errc::invalid_input, "apportionment weights sum to zero");

  constexpr double tie = 1e-9;
  std::vector<std::size_t> seats(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * (weights[i] / sum);
    const double whole = std::floor(quota + tie);
    seats[i] = static_cast<std::size_t>(whole);
    remainder[i] = std::max(0.0, quota - whole);
    assigned += seats[i];
  }
  // Guard against floor(quota + tie) overshooting by a seat on pathological inputs.
  while (assigned > total) {
    auto it = std::max_element(seats.begin(), seats.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> rank(weights.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b] + tie;
  });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % rank.size()) {
    ++seats[rank[i]];
    ++assigned;
  }
  return seats;
}

/// floor(budget / n) each, remainder one apiece to the earliest tasks.
inline AllocationPlan allocate_equal(const std::vector<std::string>& prev_tasks, long long budget) {
  require(budget >= 0, Errc::invalid_config, "replay budget must be nonnegative");
  require(!prev_tasks.empty(), Errc::invalid_input, "allocation needs at least one previous task");
  const auto alpha = static_cast<std::size_t>(budget);
  AllocationPlan plan{alpha, "equal", prev_tasks, std::vector<std::size_t>(prev_tasks.size(), alpha / prev_tasks.size()), {}};
  for (std::size_t i = 0; i < alpha % prev_tasks.size(); ++i) ++plan.counts[i];
  return plan;
}

/// Shares proportional to each task's difficulty scalar.
inline AllocationPlan allocate_rgd(const std::vector<std::string>& prev_tasks, std::span<const double> scores,
                                   long long budget, std::string strategy = "rgd-mean") {
  require(budget >= 0, Errc::invalid_config, "replay budget must be nonnegative");
  require(!prev_tasks.empty(), Errc::invalid_input, "allocation needs at least one previous task");
  require(scores.size() == prev_tasks.size(), Errc::invalid_input,
          "expected one difficulty score per previous task (" + std::to_string(prev_tasks.size()) + "), got " +
              std::to_string(scores.size()));
  for (double s : scores) {
    require(std::isfinite(s) && s >= rgd_floor, Errc::invalid_input, "difficulty scores must be finite and >= 1e-6");
  }
  const auto alpha = static_cast<std::size_t>(budget);
  return AllocationPlan{alpha, std::move(strategy), prev_tasks, largest_remainder(scores, alpha), {}};
}

inline AllocationPlan allocate_rgd(std::span<const TaskRgd> summaries, long long budget,
                                   std::string strategy = "rgd-mean") {
  std::vector<std::string> tasks;
  std::vector<double> scores;
  for (const auto& s : summaries) {
    tasks.push_back(s.summary.task_id);
    scores.push_back(s.score);
  }
  return allocate_rgd(tasks, scores, budget, std::move(strategy));
}

/// Unigram distribution of all instruction tokens of a task.
inline std::map<std::string, double> instruction_unigrams(std::span<const Tokens> instructions) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& ins : instructions) {
    for (const auto& w : ins) {
      counts[w] += 1.0;
      total += 1.0;
    }
  }
  require(total > 0.0, Errc::invalid_input, "instruction set has no tokens");
  for (auto& [w, c] : counts) c /= total;
  return counts;
}

/// Wasserstein-1 distance between the two tasks' instruction unigram
/// distributions under the 0/1 ground metric, i.e. total variation
/// 0.5 * sum |p - q|.
inline double instruction_distance(std::span<const Tokens> task_a, std::span<const Tokens> task_b) {
  require(!task_a.empty() && !task_b.empty(), Errc::invalid_input, "instruction_distance needs two nonempty sets");
  const auto p = instruction_unigrams(task_a);
  const auto q = instruction_unigrams(task_b);
  std::map<std::string, double> diff = p;
  for (const auto& [w, mass] : q) diff[w] -= mass;
  double sum = 0.0;
  for (const auto& [w, d] : diff) sum += std::abs(d);
  return std::min(1.0, 0.5 * sum);
}

/// More replay for tasks farther from the current one; all-zero distances
/// fall back to equal allocation.
inline AllocationPlan allocate_inscl(const std::vector<std::string>& prev_tasks, std::span<const double> distances,
                                     long long budget) {
  require(budget >= 0, Errc::invalid_config, "replay budget must be nonnegative");
  require(!prev_tasks.empty(), Errc::invalid_input, "allocation needs at least one previous task");
  require(distances.size() == prev_tasks.size(), Errc::invalid_input, "expected one distance per previous task");
  double sum = 0.0;
  for (double d : distances) {
    require(std::isfinite(d) && d >= 0.0, Errc::invalid_input, "instruction distances must be nonnegative");
    sum += d;
  }
  if (sum == 0.0) {
    AllocationPlan plan = allocate_equal(prev_tasks, budget);
    plan.strategy = "inscl";
    return plan;
  }
  const auto alpha = static_cast<std::size_t>(budget);
  return AllocationPlan{alpha, "inscl", prev_tasks, largest_remainder(distances, alpha), {}};
}

/// Caps every count at its pool size and hands the excess, one example at a
/// time in task order, to tasks that still have spare examples. Every capped
/// task is listed in `shortfalls`; the plan total becomes
/// min(budget, total available).
inline AllocationPlan fit_to_pools(AllocationPlan plan, std::span<const std::size_t> pool_sizes) {
  require(pool_sizes.size() == plan.tasks.size(), Errc::invalid_input, "one pool size per planned task expected");
  std::size_t excess = 0;
  for (std::size_t i = 0; i < plan.counts.size(); ++i) {
    if (plan.counts[i] > pool_sizes[i]) {
      plan.shortfalls.push_back({plan.tasks[i], plan.counts[i], pool_sizes[i]});
      excess += plan.counts[i] - pool_sizes[i];
      plan.counts[i] = pool_sizes[i];
    }
  }
  bool progress = true;
  while (excess > 0 && progress) {
    progress = false;
    for (std::size_t i = 0; i < plan.counts.size() && excess > 0; ++i) {
      if (plan.counts[i] < pool_sizes[i]) {
        ++plan.counts[i];
        --excess;
        progress = true;
      }
    }
  }
  return plan;
}

struct ReplaySample {
  std::vector<Example> examples;
  std::size_t shortfall = 0;  // requested minus delivered
};

/// Uniform sample without replacement (partial Fisher-Yates).
inline ReplaySample sample_replay(std::span<const Example> pool, std::size_t count, std::uint64_t seed) {
  ReplaySample out;
  const std::size_t take = std::min(count, pool.size());
  out.shortfall = count - take;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "replay-sample"));
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  out.examples.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.examples.push_back(pool[idx[i]]);
  return out;
}

}  // namespace rgdcl
