#pragma once

// File formats: corpus and PPL-record JSON-lines, plan and summary JSON,
// performance matrix and metrics CSV.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgdcl/clmetrics.hpp"
#include "rgdcl/error.hpp"
#include "rgdcl/replay.hpp"
#include "rgdcl/rgd.hpp"
#include "rgdcl/taskgen.hpp"

namespace rgdcl {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Files and numbers

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), Errc::io_error, "read failed for " + path.string());
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  require(!ec, Errc::io_error, "cannot create directory for " + path.string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io_error, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  require(static_cast<bool>(out), Errc::io_error, "write failed for " + path.string());
}

/// Shortest text that parses back to the same double.
inline std::string format_number(double x) {
  require(std::isfinite(x), Errc::invalid_input, "cannot format a non-finite number");
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(x)) return std::nullopt;
  return x;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

inline std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string cell(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    while (!cell.empty() && cell.back() == ' ') cell.pop_back();
    out.push_back(std::move(cell));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON field access with schema errors

namespace detail {

inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require(obj.is_object(), Errc::parse_error, where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto k : allowed) known = known || item.key() == k;
    require(known, Errc::parse_error, where + ": unknown field '" + item.key() + "'");
  }
}

inline const Json& field(const Json& obj, std::string_view key, const std::string& where) {
  const auto it = obj.find(std::string(key));
  require(it != obj.end(), Errc::parse_error, where + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline std::string string_field(const Json& obj, std::string_view key, const std::string& where) {
  const Json& v = field(obj, key, where);
  require(v.is_string(), Errc::parse_error, where + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline double number_field(const Json& obj, std::string_view key, const std::string& where) {
  const Json& v = field(obj, key, where);
  require(v.is_number(), Errc::parse_error, where + ": field '" + std::string(key) + "' must be a number");
  const double x = v.get<double>();
  require(std::isfinite(x), Errc::parse_error, where + ": field '" + std::string(key) + "' must be finite");
  return x;
}

inline std::size_t count_field(const Json& obj, std::string_view key, const std::string& where) {
  const Json& v = field(obj, key, where);
  require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0), Errc::parse_error,
          where + ": field '" + std::string(key) + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline Json parse_json(std::string_view text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::parse_error, where + ": " + e.what());
  }
}

inline std::string line_where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

/// Applies `decode` to every nonblank line; the first bad line aborts the load.
template <class T, class Decode>
std::vector<T> read_jsonl(std::string_view text, const std::string& source, Decode decode) {
  std::vector<T> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto where = line_where(source, i + 1);
    try {
      out.push_back(decode(parse_json(lines[i], where), where));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse_error, where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Corpus

inline Json example_to_json(const Example& ex) {
  return Json{{"task", ex.task_id},
              {"id", ex.id},
              {"instruction", join_words(ex.instruction)},
              {"rationale", join_words(ex.rationale)},
              {"answer", ex.answer}};
}

inline Example example_from_json(const Json& j, const std::string& where = "example") {
  detail::check_keys(j, {"task", "id", "instruction", "rationale", "answer"}, where);
  Example ex;
  ex.task_id = detail::string_field(j, "task", where);
  ex.id = detail::string_field(j, "id", where);
  ex.instruction = split_words(detail::string_field(j, "instruction", where));
  ex.rationale = split_words(detail::string_field(j, "rationale", where));
  ex.answer = detail::string_field(j, "answer", where);
  require(!ex.task_id.empty(), Errc::parse_error, where + ": empty task");
  require(!ex.id.empty(), Errc::parse_error, where + ": empty id");
  require(!ex.rationale.empty(), Errc::parse_error, where + ": empty rationale");
  require(!split_words(ex.answer).empty(), Errc::parse_error, where + ": empty answer");
  return ex;
}

inline std::string write_corpus(std::span<const Example> examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += example_to_json(ex).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Example> read_corpus(std::string_view text, const std::string& source = "corpus") {
  return detail::read_jsonl<Example>(text, source,
                                     [](const Json& j, const std::string& where) { return example_from_json(j, where); });
}

// ---------------------------------------------------------------------------
// PPL records

inline Json record_to_json(const PplRecord& r) {
  return Json{{"task", r.task_id},
              {"id", r.example_id},
              {"nll_cond_sum", r.nll_cond_sum},
              {"nll_uncond_sum", r.nll_uncond_sum},
              {"n_rationale_tokens", r.n_rationale_tokens}};
}

inline PplRecord record_from_json(const Json& j, const std::string& where = "record") {
  detail::check_keys(j, {"task", "id", "nll_cond_sum", "nll_uncond_sum", "n_rationale_tokens"}, where);
  PplRecord r;
  r.task_id = detail::string_field(j, "task", where);
  r.example_id = detail::string_field(j, "id", where);
  r.nll_cond_sum = detail::number_field(j, "nll_cond_sum", where);
  r.nll_uncond_sum = detail::number_field(j, "nll_uncond_sum", where);
  r.n_rationale_tokens = detail::count_field(j, "n_rationale_tokens", where);
  try {
    r.validate();
  } catch (const Error& e) {
    fail(Errc::parse_error, where + ": " + e.what());
  }
  return r;
}

inline std::string write_ppl_records(std::span<const PplRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<PplRecord> read_ppl_records(std::string_view text, const std::string& source = "records") {
  return detail::read_jsonl<PplRecord>(
      text, source, [](const Json& j, const std::string& where) { return record_from_json(j, where); });
}

inline std::vector<PplRecord> import_ppl_records(const std::filesystem::path& path) {
  return read_ppl_records(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Plans and difficulty summaries

inline Json plan_to_json(const AllocationPlan& p) {
  Json counts = Json::object();
  for (std::size_t i = 0; i < p.tasks.size(); ++i) counts[p.tasks[i]] = p.counts[i];
  Json shortfalls = Json::array();
  for (const auto& s : p.shortfalls) {
    shortfalls.push_back(Json{{"task", s.task_id}, {"requested", s.requested}, {"granted", s.granted}});
  }
  return Json{{"budget", p.budget}, {"strategy", p.strategy}, {"counts", counts}, {"shortfalls", shortfalls}};
}

inline AllocationPlan plan_from_json(const Json& j, const std::string& where = "plan") {
  detail::check_keys(j, {"budget", "strategy", "counts", "shortfalls", "stage"}, where);
  AllocationPlan p;
  p.budget = detail::count_field(j, "budget", where);
  p.strategy = detail::string_field(j, "strategy", where);
  const Json& counts = detail::field(j, "counts", where);
  require(counts.is_object(), Errc::parse_error, where + ": counts must be an object");
  for (const auto& item : counts.items()) {
    p.tasks.push_back(item.key());
    p.counts.push_back(detail::count_field(counts, item.key(), where + ".counts"));
  }
  const Json& shortfalls = detail::field(j, "shortfalls", where);
  require(shortfalls.is_array(), Errc::parse_error, where + ": shortfalls must be an array");
  for (const auto& s : shortfalls) {
    detail::check_keys(s, {"task", "requested", "granted"}, where + ".shortfalls");
    p.shortfalls.push_back({detail::string_field(s, "task", where), detail::count_field(s, "requested", where),
                            detail::count_field(s, "granted", where)});
  }
  return p;
}

inline Json rgd_to_json(const TaskRgd& t) {
  return Json{{"task", t.summary.task_id},
              {"mean", t.summary.mean},
              {"std", t.summary.std},
              {"n", t.summary.n},
              {"score", t.score}};
}

inline TaskRgd rgd_from_json(const Json& j, const std::string& where = "summary") {
  detail::check_keys(j, {"task", "mean", "std", "n", "score", "stage"}, where);
  TaskRgd t;
  t.summary.task_id = detail::string_field(j, "task", where);
  t.summary.mean = detail::number_field(j, "mean", where);
  t.summary.std = detail::number_field(j, "std", where);
  t.summary.n = detail::count_field(j, "n", where);
  t.score = detail::number_field(j, "score", where);
  require(t.summary.n >= 1 && t.summary.mean > 0.0 && t.summary.std >= 0.0, Errc::parse_error,
          where + ": summary needs n >= 1, mean > 0 and std >= 0");
  return t;
}

inline std::vector<TaskRgd> read_rgd_summaries(std::string_view text, const std::string& source = "summaries") {
  return detail::read_jsonl<TaskRgd>(text, source,
                                     [](const Json& j, const std::string& where) { return rgd_from_json(j, where); });
}

// ---------------------------------------------------------------------------
// Performance matrix CSV: header "stage,<task ids>", one row per stage with
// blank cells above the diagonal, then an optional "a0" row.

inline std::string write_matrix_csv(const PerfMatrix& m) {
  m.validate();
  std::string out = "stage";
  for (const auto& t : m.order) out += "," + t;
  out += '\n';
  for (std::size_t i = 0; i < m.a.size(); ++i) {
    out += std::to_string(i + 1);
    for (std::size_t j = 0; j < m.order.size(); ++j) {
      out += ',';
      if (j <= i) out += format_number(m.a[i][j]);
    }
    out += '\n';
  }
  if (!m.a0.empty()) {
    out += "a0";
    for (double x : m.a0) out += "," + format_number(x);
    out += '\n';
  }
  return out;
}

inline PerfMatrix read_matrix_csv(std::string_view text, const std::string& source = "matrix") {
  PerfMatrix m;
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  const auto raw = split_lines(text);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].find_first_not_of(" \t") != std::string_view::npos) lines.emplace_back(i + 1, raw[i]);
  }
  require(!lines.empty(), Errc::parse_error, source + ": empty matrix file");
  const auto header = split_csv_row(lines[0].second);
  require(header.size() >= 2 && header[0] == "stage", Errc::parse_error,
          detail::line_where(source, lines[0].first) + ": header must be 'stage,<task ids>'");
  m.order.assign(header.begin() + 1, header.end());
  const std::size_t t_count = m.order.size();
  for (const auto& t : m.order) {
    require(!t.empty(), Errc::parse_error, detail::line_where(source, lines[0].first) + ": empty task id");
  }

  auto cell_value = [&](const std::string& cell, const std::string& where) {
    const auto x = parse_number(cell);
    require(x.has_value(), Errc::parse_error, where + ": '" + cell + "' is not a number");
    return *x;
  };
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto where = detail::line_where(source, lines[li].first);
    const auto cells = split_csv_row(lines[li].second);
    require(cells.size() == t_count + 1, Errc::parse_error,
            where + ": expected " + std::to_string(t_count + 1) + " cells, got " + std::to_string(cells.size()));
    if (cells[0] == "a0") {
      require(m.a0.empty(), Errc::parse_error, where + ": duplicate a0 row");
      for (std::size_t j = 0; j < t_count; ++j) m.a0.push_back(cell_value(cells[j + 1], where));
      continue;
    }
    require(m.a0.empty(), Errc::parse_error, where + ": stage rows must precede the a0 row");
    const std::size_t stage = m.a.size() + 1;
    require(cells[0] == std::to_string(stage), Errc::parse_error,
            where + ": expected stage " + std::to_string(stage) + ", got '" + cells[0] + "'");
    require(stage <= t_count, Errc::parse_error, where + ": more stages than tasks");
    std::vector<double> row;
    for (std::size_t j = 0; j < t_count; ++j) {
      if (j < stage) {
        row.push_back(cell_value(cells[j + 1], where));
      } else {
        require(cells[j + 1].empty(), Errc::parse_error, where + ": cells above the diagonal must be blank");
      }
    }
    m.a.push_back(std::move(row));
  }
  try {
    m.validate();
  } catch (const Error& e) {
    fail(Errc::parse_error, source + ": " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Metrics

inline Json metrics_to_json(const MetricsReport& r) {
  Json forgetting = Json::object();
  for (const auto& [task, f] : r.forgetting) forgetting[task] = f;
  return Json{{"fap", r.fap},
              {"f_ra", r.f_ra},
              {"bwt", r.bwt},
              {"fwt", r.fwt ? Json(*r.fwt) : Json(nullptr)},
              {"cap", r.cap},
              {"forgetting", forgetting}};
}

inline MetricsReport metrics_from_json(const Json& j, const std::string& where = "metrics") {
  detail::check_keys(j, {"fap", "f_ra", "bwt", "fwt", "cap", "forgetting"}, where);
  MetricsReport r;
  r.fap = detail::number_field(j, "fap", where);
  r.f_ra = detail::number_field(j, "f_ra", where);
  r.bwt = detail::number_field(j, "bwt", where);
  if (!detail::field(j, "fwt", where).is_null()) r.fwt = detail::number_field(j, "fwt", where);
  r.cap = detail::number_field(j, "cap", where);
  const Json& f = detail::field(j, "forgetting", where);
  require(f.is_object(), Errc::parse_error, where + ": forgetting must be an object");
  for (const auto& item : f.items()) r.forgetting.emplace_back(item.key(), detail::number_field(f, item.key(), where));
  return r;
}

inline const char* metrics_csv_header() { return "FAP,F.Ra,BWT,FWT,CAP"; }

inline std::string metrics_csv_row(const MetricsReport& r) {
  return format_number(r.fap) + "," + format_number(r.f_ra) + "," + format_number(r.bwt) + "," +
         (r.fwt ? format_number(*r.fwt) : std::string()) + "," + format_number(r.cap);
}

inline std::string write_metrics_csv(const MetricsReport& r) {
  return std::string(metrics_csv_header()) + "\n" + metrics_csv_row(r) + "\n";
}

}  // namespace rgdcl
