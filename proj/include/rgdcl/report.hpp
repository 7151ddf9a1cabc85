#pragma once

// Comparison table across strategies: one averaged row per method followed
// by the raw per-run rows it was averaged from.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rgdcl/clmetrics.hpp"
#include "rgdcl/driver.hpp"
#include "rgdcl/error.hpp"
#include "rgdcl/io.hpp"

namespace rgdcl {

struct ReportEntry {
  std::string method;  // Single, Multi, CL, EA, InsCL, RGD, RGD (mean-std)
  std::uint64_t seed = 0;
  std::optional<std::size_t> order;  // empty for order-independent baselines
  std::string suite;                 // suite signature; one table holds one suite shape
  double fap = 0.0;
  std::optional<double> f_ra;
  std::optional<double> bwt;
  std::optional<double> fwt;
  double cap = 0.0;

  friend bool operator==(const ReportEntry&, const ReportEntry&) = default;
};

inline constexpr std::array<std::string_view, 7> report_methods{"Single", "Multi", "CL", "EA", "InsCL", "RGD",
                                                                 "RGD (mean-std)"};

inline std::string_view method_for(Strategy s) {
  switch (s) {
    case Strategy::none: return "CL";
    case Strategy::equal: return "EA";
    case Strategy::inscl: return "InsCL";
    case Strategy::rgd_mean: return "RGD";
    case Strategy::rgd_mean_minus_std: return "RGD (mean-std)";
  }
  return "?";
}

inline ReportEntry run_entry(Strategy s, std::uint64_t seed, std::size_t order, std::string suite,
                             const MetricsReport& m) {
  return ReportEntry{std::string(method_for(s)), seed, order, std::move(suite), m.fap, m.f_ra, m.bwt, m.fwt, m.cap};
}

/// Single and Multi have no sequence, so only FAP and CAP (both the mean
/// per-task score) are defined.
inline ReportEntry baseline_entry(std::string method, std::uint64_t seed, std::string suite,
                                  const std::vector<double>& scores) {
  require(!scores.empty(), Errc::invalid_input, "baseline row is empty");
  double sum = 0.0;
  for (double x : scores) sum += x;
  const double mean = sum / static_cast<double>(scores.size());
  return ReportEntry{std::move(method), seed, std::nullopt, std::move(suite), mean, std::nullopt, std::nullopt,
                     std::nullopt, mean};
}

inline const char* report_header() { return "method,kind,seed,order,runs,FAP,F.Ra,BWT,FWT,CAP"; }

inline std::string emit_report(const std::vector<ReportEntry>& entries) {
  require(!entries.empty(), Errc::invalid_input, "report needs at least one run");
  for (const auto& e : entries) {
    require(e.suite == entries.front().suite, Errc::invalid_input,
            "report mixes different suites ('" + entries.front().suite + "' and '" + e.suite + "')");
    bool known = false;
    for (auto m : report_methods) known = known || e.method == m;
    require(known, Errc::invalid_input, "unknown report method '" + e.method + "'");
  }

  auto cell = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
  auto values = [&](const ReportEntry& e) {
    return format_number(e.fap) + "," + cell(e.f_ra) + "," + cell(e.bwt) + "," + cell(e.fwt) + "," +
           format_number(e.cap);
  };

  std::string out = std::string(report_header()) + "\n";
  for (auto method : report_methods) {
    std::vector<const ReportEntry*> rows;
    for (const auto& e : entries) {
      if (e.method == method) rows.push_back(&e);
    }
    if (rows.empty()) continue;
    std::stable_sort(rows.begin(), rows.end(), [](const ReportEntry* a, const ReportEntry* b) {
      if (a->seed != b->seed) return a->seed < b->seed;
      return a->order.value_or(0) < b->order.value_or(0);
    });

    // A column is averaged only when every run defines it.
    auto average = [&](auto get) -> std::optional<double> {
      double sum = 0.0;
      for (const auto* r : rows) {
        const std::optional<double> x = get(*r);
        if (!x) return std::nullopt;
        sum += *x;
      }
      return sum / static_cast<double>(rows.size());
    };
    ReportEntry mean{std::string(method), 0, std::nullopt, rows.front()->suite,
                     *average([](const ReportEntry& e) { return std::optional<double>(e.fap); }),
                     average([](const ReportEntry& e) { return e.f_ra; }),
                     average([](const ReportEntry& e) { return e.bwt; }),
                     average([](const ReportEntry& e) { return e.fwt; }),
                     *average([](const ReportEntry& e) { return std::optional<double>(e.cap); })};
    out += std::string(method) + ",mean,,," + std::to_string(rows.size()) + "," + values(mean) + "\n";
    for (const auto* r : rows) {
      out += std::string(method) + ",raw," + std::to_string(r->seed) + "," +
             (r->order ? std::to_string(*r->order) : std::string()) + ",1," + values(*r) + "\n";
    }
  }
  return out;
}

}  // namespace rgdcl
