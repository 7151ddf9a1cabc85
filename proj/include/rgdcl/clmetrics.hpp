#pragma once

// Task scoring and continual-learning metrics over a performance matrix.
//
// a[i][j] is the score on task j after training stage i (both 1-based in the
// formulas, 0-based in code), defined for j <= i; a0[t] is the score of a
// model trained on task t alone.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/taskgen.hpp"
#include "rgdcl/vocab.hpp"

namespace rgdcl {

// ---------------------------------------------------------------------------
// Scoring

inline std::string trim_lower(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Text after the last [RESULT] marker, trimmed and lowercased; nullopt when
/// the marker is absent.
inline std::optional<std::string> extract_answer(std::string_view prediction) {
  const auto pos = prediction.rfind(result_marker);
  if (pos == std::string_view::npos) return std::nullopt;
  return trim_lower(prediction.substr(pos + result_marker.size()));
}

inline bool answer_matches(std::string_view prediction, std::string_view gold) {
  const auto got = extract_answer(prediction);
  return got.has_value() && *got == trim_lower(gold);
}

/// Percentage of predictions whose extracted answer equals the gold answer.
inline double answer_accuracy(std::span<const std::string> predictions, std::span<const std::string> gold) {
  require(predictions.size() == gold.size(), Errc::invalid_input, "predictions and gold answers differ in length");
  require(!gold.empty(), Errc::invalid_input, "accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (answer_matches(predictions[i], gold[i])) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
}

inline double answer_accuracy(std::span<const Tokens> predictions, std::span<const std::string> gold) {
  std::vector<std::string> joined;
  joined.reserve(predictions.size());
  for (const auto& p : predictions) joined.push_back(join_words(p));
  return answer_accuracy(std::span<const std::string>(joined), gold);
}

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Rouge-L F1 over tokens.
inline double rouge_l(std::span<const std::string> prediction, std::span<const std::string> reference) {
  require(!reference.empty(), Errc::invalid_input, "rouge_l needs a nonempty reference");
  if (prediction.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(prediction, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(prediction.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Performance matrix

struct PerfMatrix {
  std::vector<std::string> order;     // task ids in training order, length T
  std::vector<std::vector<double>> a;  // a[i] has i + 1 entries
  std::vector<double> a0;              // single-task baselines; empty when unknown

  std::size_t num_tasks() const { return order.size(); }

  double at(std::size_t stage, std::size_t task) const { return a.at(stage).at(task); }

  void validate() const {
    const std::size_t t = order.size();
    require(t >= 1, Errc::invalid_input, "performance matrix has no tasks");
    require(a.size() == t, Errc::invalid_input, "performance matrix needs one row per stage");
    auto in_range = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 100.0; };
    for (std::size_t i = 0; i < t; ++i) {
      require(a[i].size() == i + 1, Errc::invalid_input,
              "stage " + std::to_string(i + 1) + " row must have " + std::to_string(i + 1) + " entries");
      for (double x : a[i]) require(in_range(x), Errc::invalid_input, "matrix entries must lie in [0, 100]");
    }
    require(a0.empty() || a0.size() == t, Errc::invalid_input, "a0 row must have one entry per task");
    for (double x : a0) require(in_range(x), Errc::invalid_input, "a0 entries must lie in [0, 100]");
  }

  friend bool operator==(const PerfMatrix&, const PerfMatrix&) = default;
};

inline double fap(const PerfMatrix& m) {
  m.validate();
  const auto& last = m.a.back();
  double s = 0.0;
  for (double x : last) s += x;
  return s / static_cast<double>(last.size());
}

/// Per-task drop from the best score since the task was learned,
/// max_{k in [t, T-1]} a[k][t] - a[T][t], for t = 1..T-1.
inline std::vector<double> per_task_forgetting(const PerfMatrix& m) {
  m.validate();
  const std::size_t t_count = m.num_tasks();
  require(t_count >= 2, Errc::undefined_metric, "forgetting needs at least 2 tasks");
  std::vector<double> out;
  for (std::size_t t = 0; t + 1 < t_count; ++t) {
    double best = m.a[t][t];
    for (std::size_t k = t; k + 1 < t_count; ++k) best = std::max(best, m.a[k][t]);
    out.push_back(best - m.a[t_count - 1][t]);
  }
  return out;
}

inline double forgetting_rate(const PerfMatrix& m) {
  const auto f = per_task_forgetting(m);
  double s = 0.0;
  for (double x : f) s += x;
  return s / static_cast<double>(f.size());
}

inline double bwt(const PerfMatrix& m) {
  m.validate();
  const std::size_t t_count = m.num_tasks();
  require(t_count >= 2, Errc::undefined_metric, "BWT needs at least 2 tasks");
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < t_count; ++t) s += m.a[t_count - 1][t] - m.a[t][t];
  return s / static_cast<double>(t_count - 1);
}

inline double fwt(const PerfMatrix& m) {
  m.validate();
  require(m.a0.size() == m.num_tasks(), Errc::undefined_metric, "FWT needs the single-task baseline row");
  double s = 0.0;
  for (std::size_t t = 0; t < m.num_tasks(); ++t) s += m.a[t][t] - m.a0[t];
  return s / static_cast<double>(m.num_tasks());
}

inline double cap(const PerfMatrix& m) {
  m.validate();
  double s = 0.0;
  for (std::size_t t = 0; t < m.num_tasks(); ++t) s += m.a[t][t];
  return s / static_cast<double>(m.num_tasks());
}

struct MetricsReport {
  double fap = 0.0;
  double f_ra = 0.0;
  double bwt = 0.0;
  std::optional<double> fwt;  // needs the a0 row
  double cap = 0.0;
  std::vector<std::pair<std::string, double>> forgetting;  // first T-1 tasks, training order

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// All five metrics (FWT only when a0 is present); also checks
/// FAP == CAP + (T-1)/T * BWT to 1e-9.
inline MetricsReport compute_report(const PerfMatrix& m) {
  MetricsReport r;
  r.fap = fap(m);
  r.f_ra = forgetting_rate(m);
  r.bwt = bwt(m);
  if (!m.a0.empty()) r.fwt = fwt(m);
  r.cap = cap(m);
  const auto f = per_task_forgetting(m);
  for (std::size_t t = 0; t < f.size(); ++t) r.forgetting.emplace_back(m.order[t], f[t]);
  const double t_count = static_cast<double>(m.num_tasks());
  const double rhs = r.cap + (t_count - 1.0) / t_count * r.bwt;
  require(std::abs(r.fap - rhs) <= 1e-9 * std::max(1.0, std::abs(r.fap)), Errc::invalid_input,
          "metric identity FAP = CAP + (T-1)/T BWT violated");
  return r;
}

}  // namespace rgdcl
