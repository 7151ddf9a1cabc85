#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rgdcl/config.hpp"
#include "rgdcl/io.hpp"
#include "rgdcl/report.hpp"

using namespace rgdcl;

namespace {

std::string error_text(auto&& f, Errc expected) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(77.5), "77.5");
  EXPECT_EQ(format_number(100.0), "100");
  for (double x : {1.0 / 3.0, 233.0 / 3.0, -12.5, 1e-7, 6.02e23}) EXPECT_EQ(*parse_number(format_number(x)), x);
  EXPECT_FALSE(parse_number("12x").has_value());
  EXPECT_FALSE(parse_number("").has_value());
}

TEST(Corpus, RoundTrip) {
  SuiteConfig sc;
  sc.num_tasks = 2;
  sc.train_per_task = 5;
  sc.eval_per_task = 2;
  const auto suite = make_suite(sc);
  const auto text = write_corpus(suite.train[1]);
  EXPECT_EQ(read_corpus(text), suite.train[1]);
  EXPECT_EQ(write_corpus(read_corpus(text)), text);
  EXPECT_TRUE(read_corpus("").empty());
  EXPECT_TRUE(read_corpus("\n  \n").empty());
}

TEST(Corpus, ErrorsNameTheLine) {
  const std::string good = R"({"task":"t","id":"a","instruction":"x y","rationale":"r s","answer":"yes"})";
  auto msg = error_text([&] { (void)read_corpus(good + "\n{oops\n", "train.jsonl"); }, Errc::parse_error);
  EXPECT_TRUE(contains(msg, "train.jsonl:2")) << msg;
  msg = error_text([&] { (void)read_corpus(R"({"task":"t","id":"a","instruction":"x","rationale":"","answer":"y"})"); },
                   Errc::parse_error);
  EXPECT_TRUE(contains(msg, "rationale")) << msg;
  msg = error_text(
      [&] {
        (void)read_corpus(R"({"task":"t","id":"a","instruction":"x","rationale":"r","answer":"y","extra":1})");
      },
      Errc::parse_error);
  EXPECT_TRUE(contains(msg, "extra")) << msg;
  (void)error_text([&] { (void)read_corpus(R"({"task":"t","id":"a","instruction":"x","rationale":"r"})"); },
                   Errc::parse_error);
}

TEST(PplRecords, RoundTripAndValidation) {
  const std::vector<PplRecord> recs{{"t1", "a", 2.5, 3.25, 4}, {"t2", "b", 0.0, 0.0, 1}};
  EXPECT_EQ(read_ppl_records(write_ppl_records(recs)), recs);
  const auto msg = error_text(
      [] {
        (void)read_ppl_records(
            "\n" R"({"task":"t","id":"a","nll_cond_sum":1,"nll_uncond_sum":1,"n_rationale_tokens":0})", "ppl.jsonl");
      },
      Errc::parse_error);
  EXPECT_TRUE(contains(msg, "ppl.jsonl:2")) << msg;
  (void)error_text(
      [] { (void)read_ppl_records(R"({"task":"t","id":"a","nll_cond_sum":-1,"nll_uncond_sum":1,"n_rationale_tokens":2})"); },
      Errc::parse_error);
  (void)error_text(
      [] { (void)read_ppl_records(R"({"task":"t","id":"a","nll_cond_sum":"1","nll_uncond_sum":1,"n_rationale_tokens":2})"); },
      Errc::parse_error);
  (void)error_text([] { (void)import_ppl_records("/nonexistent/records.jsonl"); }, Errc::io_error);
}

TEST(Plans, RoundTripKeepsOrder) {
  AllocationPlan p{12, "rgd-mean", {"t3", "t1"}, {10, 2}, {{"t3", 14, 10}}};
  const auto back = plan_from_json(plan_to_json(p));
  EXPECT_EQ(back, p);
  auto j = plan_to_json(p);
  j["stage"] = 2;
  EXPECT_EQ(plan_from_json(j), p);
  EXPECT_EQ(plan_to_json(p).dump(),
            R"({"budget":12,"strategy":"rgd-mean","counts":{"t3":10,"t1":2},"shortfalls":[{"task":"t3","requested":14,"granted":10}]})");
}

TEST(Summaries, RoundTrip) {
  const TaskRgd t{RgdSummary{"t2", 0.8, 0.1, 5}, 0.7};
  const auto text = rgd_to_json(t).dump() + "\n";
  const auto back = read_rgd_summaries(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].summary, t.summary);
  EXPECT_EQ(back[0].score, t.score);
  (void)error_text([] { (void)read_rgd_summaries(R"({"task":"t","mean":0,"std":0,"n":1,"score":1})"); },
                   Errc::parse_error);
}

TEST(MatrixCsv, RoundTripAndLayout) {
  const PerfMatrix m{{"t1", "t2", "t3"}, {{80}, {70, 90}, {60, 85, 88}}, {75, 88, 85}};
  const auto text = write_matrix_csv(m);
  EXPECT_EQ(text, "stage,t1,t2,t3\n1,80,,\n2,70,90,\n3,60,85,88\na0,75,88,85\n");
  EXPECT_EQ(read_matrix_csv(text), m);
  PerfMatrix no_a0 = m;
  no_a0.a0.clear();
  EXPECT_EQ(read_matrix_csv(write_matrix_csv(no_a0)), no_a0);
}

TEST(MatrixCsv, StrictErrors) {
  auto msg = error_text([] { (void)read_matrix_csv("stage,a,b\n1,80,\n2,70,x\n", "m.csv"); }, Errc::parse_error);
  EXPECT_TRUE(contains(msg, "m.csv:3")) << msg;
  msg = error_text([] { (void)read_matrix_csv("stage,a,b\n1,80,5\n2,70,60\n", "m.csv"); }, Errc::parse_error);
  EXPECT_TRUE(contains(msg, "m.csv:2")) << msg;
  (void)error_text([] { (void)read_matrix_csv("stage,a,b\n2,80,\n"); }, Errc::parse_error);
  (void)error_text([] { (void)read_matrix_csv("stage,a,b\n1,80\n"); }, Errc::parse_error);
  (void)error_text([] { (void)read_matrix_csv("stage,a,b\n1,180,\n2,70,60\n"); }, Errc::parse_error);
  (void)error_text([] { (void)read_matrix_csv(""); }, Errc::parse_error);
}

TEST(Metrics, JsonAndCsv) {
  const PerfMatrix m{{"t1", "t2", "t3"}, {{80}, {70, 90}, {60, 85, 88}}, {75, 88, 85}};
  const auto r = compute_report(m);
  const auto back = metrics_from_json(metrics_to_json(r));
  EXPECT_EQ(back.fap, r.fap);
  EXPECT_EQ(back.fwt, r.fwt);
  EXPECT_EQ(back.forgetting, r.forgetting);
  PerfMatrix no_a0 = m;
  no_a0.a0.clear();
  const auto r2 = compute_report(no_a0);
  EXPECT_FALSE(metrics_from_json(metrics_to_json(r2)).fwt.has_value());
  EXPECT_EQ(write_metrics_csv(r2).substr(0, 20), "FAP,F.Ra,BWT,FWT,CAP");
  EXPECT_TRUE(contains(metrics_csv_row(r2), "-12.5,,86"));
}

TEST(Config, DefaultsNeedSeeds) {
  const auto msg = error_text([] { (void)parse_config("{}"); }, Errc::invalid_config);
  EXPECT_TRUE(contains(msg, "seeds")) << msg;
  const auto c = parse_config(R"({"seeds":[1,2]})");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(c.budget_fraction, 0.05);
  EXPECT_EQ(c.strategies.size(), 4u);
  EXPECT_FALSE(c.budget.has_value());
}

TEST(Config, UnknownKeysAreNamed) {
  auto msg = error_text([] { (void)parse_config(R"({"seeds":[1],"sede":3})"); }, Errc::invalid_config);
  EXPECT_TRUE(contains(msg, "sede")) << msg;
  msg = error_text([] { (void)parse_config(R"({"seeds":[1],"train":{"lr":0.1}})"); }, Errc::invalid_config);
  EXPECT_TRUE(contains(msg, "train.lr")) << msg;
  msg = error_text([] { (void)parse_config(R"({"seeds":[1],"suite":{"num_tasks":1}})"); }, Errc::invalid_config);
  EXPECT_TRUE(contains(msg, "suite")) << msg;
  msg = error_text([] { (void)parse_config(R"({"seeds":[1],"strategies":["random"]})"); }, Errc::invalid_config);
  EXPECT_TRUE(contains(msg, "strategies")) << msg;
  (void)error_text([] { (void)parse_config(R"({"seeds":[1,1]})"); }, Errc::invalid_config);
  (void)error_text([] { (void)parse_config(R"({"seeds":[1],"orders":[2]})"); }, Errc::invalid_config);
  (void)error_text([] { (void)parse_config("{not json"); }, Errc::parse_error);
}

TEST(Config, ResolvedRoundTrip) {
  const auto c = parse_config(
      R"({"name":"x","seeds":[4],"suite":{"num_tasks":3},"train":{"epochs":2},"strategies":["equal","rgd-mean-minus-std"],"budget":7,"probe":{"k_grid":[0,0.5]}})");
  const auto j = config_to_json(c);
  const auto again = config_to_json(config_from_json(j));
  EXPECT_EQ(j.dump(), again.dump());
  EXPECT_EQ(c.budget, std::optional<std::size_t>(7));
  EXPECT_EQ(c.run_config(Strategy::equal, 1, 4).order_index, 1u);
  EXPECT_EQ(c.suite_config(9).seed, 9u);
}

TEST(Report, MeansAndRawRows) {
  MetricsReport a{80, 10, -5, 2.0, 84, {}};
  MetricsReport b{70, 20, -15, std::nullopt, 80, {}};
  const std::vector<ReportEntry> entries{run_entry(Strategy::rgd_mean, 2, 0, "s", a),
                                         run_entry(Strategy::rgd_mean, 1, 1, "s", b),
                                         baseline_entry("Single", 1, "s", {90, 80})};
  const auto text = emit_report(entries);
  EXPECT_EQ(text,
            "method,kind,seed,order,runs,FAP,F.Ra,BWT,FWT,CAP\n"
            "Single,mean,,,1,85,,,,85\n"
            "Single,raw,1,,1,85,,,,85\n"
            "RGD,mean,,,2,75,15,-10,,82\n"
            "RGD,raw,1,1,1,70,20,-15,,80\n"
            "RGD,raw,2,0,1,80,10,-5,2,84\n");
}

TEST(Report, RejectsMixedSuitesAndUnknownMethods) {
  MetricsReport a{80, 10, -5, 2.0, 84, {}};
  const auto msg = error_text(
      [&] {
        (void)emit_report({run_entry(Strategy::equal, 1, 0, "tasks=5", a), run_entry(Strategy::equal, 2, 0, "tasks=3", a)});
      },
      Errc::invalid_input);
  EXPECT_TRUE(contains(msg, "tasks=3")) << msg;
  auto odd = run_entry(Strategy::equal, 1, 0, "s", a);
  odd.method = "Oracle";
  (void)error_text([&] { (void)emit_report({odd}); }, Errc::invalid_input);
  (void)error_text([&] { (void)emit_report({}); }, Errc::invalid_input);
}

TEST(Files, WriteCreatesParents) {
  const auto dir = std::filesystem::temp_directory_path() / "rgdcl-io-test";
  std::filesystem::remove_all(dir);
  write_text_file(dir / "a" / "b.txt", "hello\n");
  EXPECT_EQ(read_text_file(dir / "a" / "b.txt"), "hello\n");
  std::filesystem::remove_all(dir);
  (void)error_text([&] { (void)read_text_file(dir / "missing"); }, Errc::io_error);
}
