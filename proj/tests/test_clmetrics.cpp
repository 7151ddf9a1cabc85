#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rgdcl/clmetrics.hpp"
#include "rgdcl/rng.hpp"

using namespace rgdcl;

namespace {

PerfMatrix shared_matrix() {
  return PerfMatrix{{"t1", "t2", "t3"}, {{80}, {70, 90}, {60, 85, 88}}, {75, 88, 85}};
}

PerfMatrix random_matrix(Rng& rng, std::size_t t) {
  PerfMatrix m;
  for (std::size_t i = 0; i < t; ++i) {
    m.order.push_back("t" + std::to_string(i));
    std::vector<double> row;
    for (std::size_t j = 0; j <= i; ++j) row.push_back(100.0 * rng.uniform());
    m.a.push_back(row);
    m.a0.push_back(100.0 * rng.uniform());
  }
  return m;
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io_error;
}

}  // namespace

TEST(AnswerAccuracy, MarkerParsing) {
  const std::vector<std::string> gold{"yes", "yes", "yes", "no"};
  const std::vector<std::string> preds{"scan shows Q present [RESULT]yes", "no marker yes", "[RESULT]Yes ",
                                       "[RESULT] yes [RESULT] no"};
  EXPECT_EQ(answer_accuracy(std::span<const std::string>(preds), gold), 75.0);
  EXPECT_TRUE(answer_matches("…scan shows Q present [RESULT]yes", "yes"));
  EXPECT_FALSE(answer_matches("yes", "yes"));
  EXPECT_EQ(code_of([&] { (void)answer_accuracy(std::span<const std::string>(preds).first(2), gold); }),
            Errc::invalid_input);
}

TEST(AnswerAccuracy, TokenPredictions) {
  const std::vector<Tokens> preds{split_words("r so yes [RESULT] yes"), split_words("r so no [RESULT] yes")};
  const std::vector<std::string> gold{"yes", "no"};
  EXPECT_EQ(answer_accuracy(std::span<const Tokens>(preds), gold), 50.0);
}

TEST(RougeL, Examples) {
  const auto abc = split_words("a b c");
  EXPECT_EQ(rouge_l(abc, abc), 1.0);
  EXPECT_EQ(rouge_l(abc, split_words("x y")), 0.0);
  EXPECT_NEAR(rouge_l(abc, split_words("a c")), 0.8, 1e-15);
  EXPECT_EQ(rouge_l(Tokens{}, abc), 0.0);
  EXPECT_EQ(code_of([&] { (void)rouge_l(abc, Tokens{}); }), Errc::invalid_input);
}

TEST(Metrics, SharedMatrix) {
  const auto m = shared_matrix();
  EXPECT_NEAR(fap(m), 233.0 / 3.0, 1e-9);
  EXPECT_NEAR(forgetting_rate(m), 12.5, 1e-9);
  EXPECT_NEAR(bwt(m), -12.5, 1e-9);
  EXPECT_NEAR(fwt(m), 10.0 / 3.0, 1e-9);
  EXPECT_NEAR(cap(m), 86.0, 1e-9);
  const auto r = compute_report(m);
  EXPECT_NEAR(r.fap, 77.667, 1e-3);
  ASSERT_EQ(r.forgetting.size(), 2u);
  EXPECT_EQ(r.forgetting[0].first, "t1");
  EXPECT_NEAR(r.forgetting[0].second, 20.0, 1e-12);
  EXPECT_NEAR(r.forgetting[1].second, 5.0, 1e-12);
  ASSERT_TRUE(r.fwt.has_value());
}

TEST(Metrics, Degenerate) {
  const PerfMatrix one{{"t"}, {{42}}, {40}};
  EXPECT_EQ(fap(one), 42.0);
  EXPECT_EQ(cap(one), 42.0);
  EXPECT_EQ(fwt(one), 2.0);
  EXPECT_EQ(code_of([&] { (void)forgetting_rate(one); }), Errc::undefined_metric);
  EXPECT_EQ(code_of([&] { (void)bwt(one); }), Errc::undefined_metric);

  const PerfMatrix two{{"a", "b"}, {{90}, {70, 50}}, {}};
  EXPECT_EQ(forgetting_rate(two), 20.0);
  EXPECT_EQ(code_of([&] { (void)fwt(two); }), Errc::undefined_metric);
  EXPECT_FALSE(compute_report(two).fwt.has_value());

  const PerfMatrix constant{{"a", "b", "c"}, {{7}, {7, 7}, {7, 7, 7}}, {7, 7, 7}};
  EXPECT_EQ(fap(constant), 7.0);
  EXPECT_EQ(cap(constant), 7.0);
  EXPECT_EQ(bwt(constant), 0.0);
  EXPECT_EQ(fwt(constant), 0.0);
  EXPECT_EQ(forgetting_rate(constant), 0.0);
}

TEST(Metrics, Signs) {
  const PerfMatrix up{{"a", "b", "c"}, {{50}, {60, 50}, {70, 60, 50}}, {}};
  EXPECT_GT(bwt(up), 0.0);
  EXPECT_EQ(forgetting_rate(up), -10.0);  // the final stage is not part of the peak
}

TEST(Metrics, ValidationRejectsBadMatrices) {
  EXPECT_EQ(code_of([] { (void)fap(PerfMatrix{{"a", "b"}, {{50}, {60}}, {}}); }), Errc::invalid_input);
  EXPECT_EQ(code_of([] { (void)fap(PerfMatrix{{"a"}, {{150}}, {}}); }), Errc::invalid_input);
  EXPECT_EQ(code_of([] { (void)fap(PerfMatrix{{"a"}, {{50}}, {1, 2}}); }), Errc::invalid_input);
  EXPECT_EQ(code_of([] { (void)fap(PerfMatrix{{"a"}, {{NAN}}, {}}); }), Errc::invalid_input);
}

TEST(MetricsProperties, IdentityOnRandomMatrices) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 2 + rng.below(14);
    const auto m = random_matrix(rng, t);
    const double lhs = fap(m);
    const double rhs = cap(m) + (static_cast<double>(t) - 1.0) / static_cast<double>(t) * bwt(m);
    ASSERT_NEAR(lhs, rhs, 1e-9) << "trial " << trial;
    EXPECT_NO_THROW((void)compute_report(m));
  }
}

TEST(MetricsProperties, ForgettingBoundsWhenColumnsPeakOnDiagonal) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto m = random_matrix(rng, 2 + rng.below(8));
    // Clamp every column below its diagonal entry.
    for (std::size_t i = 0; i < m.a.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) m.a[i][j] = std::min(m.a[i][j], m.a[j][j]);
    }
    EXPECT_GE(forgetting_rate(m) + 1e-9, -bwt(m));
    EXPECT_GE(forgetting_rate(m), 0.0);
  }
}

TEST(MetricsProperties, RelabelingInvariance) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_matrix(rng, 2 + rng.below(6));
    auto renamed = m;
    for (auto& name : renamed.order) name = "x_" + name;
    const auto a = compute_report(m);
    const auto b = compute_report(renamed);
    EXPECT_EQ(a.fap, b.fap);
    EXPECT_EQ(a.f_ra, b.f_ra);
    EXPECT_EQ(a.bwt, b.bwt);
    EXPECT_EQ(a.fwt, b.fwt);
    EXPECT_EQ(a.cap, b.cap);
  }
}
