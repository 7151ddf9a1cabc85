#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rgdcl/replay.hpp"

using namespace rgdcl;

namespace {

const std::vector<std::string> three{"t1", "t2", "t3"};

using Counts = std::vector<std::size_t>;

std::vector<Tokens> instructions(std::initializer_list<const char*> lines) {
  std::vector<Tokens> out;
  for (const char* l : lines) out.push_back(split_words(l));
  return out;
}

std::vector<Example> pool(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Example{"t", "e" + std::to_string(i), {"x"}, {"r"}, "y"});
  return out;
}

}  // namespace

TEST(AllocateEqual, Examples) {
  EXPECT_EQ(allocate_equal(three, 9).counts, (Counts{3, 3, 3}));
  EXPECT_EQ(allocate_equal(three, 10).counts, (Counts{4, 3, 3}));
  EXPECT_EQ(allocate_equal({"t1"}, 5).counts, (Counts{5}));
  EXPECT_EQ(allocate_equal(three, 0).counts, (Counts{0, 0, 0}));
  try {
    (void)allocate_equal(three, -1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_config);
  }
}

TEST(AllocateRgd, Examples) {
  EXPECT_EQ(allocate_rgd(three, std::vector<double>{2, 1, 1}, 100).counts, (Counts{50, 25, 25}));
  EXPECT_EQ(allocate_rgd(three, std::vector<double>{1, 1, 1}, 9).counts, (Counts{3, 3, 3}));
  EXPECT_EQ(allocate_rgd(three, std::vector<double>{1, 1, 1}, 10).counts, (Counts{4, 3, 3}));
}

TEST(AllocateRgd, MissingScoreIsInvalidInput) {
  try {
    (void)allocate_rgd(three, std::vector<double>{1, 1}, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
  EXPECT_THROW((void)allocate_rgd(three, std::vector<double>{1, 0, 1}, 10), Error);
}

TEST(AllocateRgd, SumsToBudgetAndScaleInvariant) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<std::string> tasks;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      tasks.push_back("t" + std::to_string(i));
      scores.push_back(1e-3 + rng.uniform() * (rng.coin() ? 1.0 : 1000.0));
    }
    const auto budget = static_cast<long long>(rng.below(500));
    const auto plan = allocate_rgd(tasks, scores, budget);
    EXPECT_EQ(plan.total(), static_cast<std::size_t>(budget));
    for (double c : {0.5, 3.0, 1e6}) {
      std::vector<double> scaled;
      for (double s : scores) scaled.push_back(s * c);
      EXPECT_EQ(allocate_rgd(tasks, scaled, budget).counts, plan.counts) << "trial " << trial << " c " << c;
    }
  }
}

TEST(AllocateRgd, RaisingAScoreNeverLowersItsShare) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores{0.1 + rng.uniform(), 0.1 + rng.uniform(), 0.1 + rng.uniform(), 0.1 + rng.uniform()};
    const std::size_t j = rng.below(scores.size());
    auto share = [&](const std::vector<double>& s) {
      double sum = 0.0;
      for (double x : s) sum += x;
      return s[j] / sum;
    };
    const double before = share(scores);
    const std::size_t count_before = allocate_rgd({"a", "b", "c", "d"}, scores, 97).counts[j];
    scores[j] *= 1.0 + rng.uniform();
    EXPECT_GE(share(scores), before);
    // Rounding can move a seat at most one step the other way.
    EXPECT_GE(allocate_rgd({"a", "b", "c", "d"}, scores, 97).counts[j] + 1, count_before);
  }
}

TEST(LargestRemainder, TiesGoToEarlierIndex) {
  EXPECT_EQ(largest_remainder(std::vector<double>{1, 1, 1, 1}, 6), (Counts{2, 2, 1, 1}));
  EXPECT_EQ(largest_remainder(std::vector<double>{0.1, 0.1, 0.1}, 10), (Counts{4, 3, 3}));
  EXPECT_EQ(largest_remainder(std::vector<double>{1, 2}, 0), (Counts{0, 0}));
}

TEST(InstructionDistance, Examples) {
  const auto a = instructions({"x y z", "x y"});
  EXPECT_EQ(instruction_distance(a, a), 0.0);
  EXPECT_EQ(instruction_distance(instructions({"a b"}), instructions({"c d"})), 1.0);
  // p = (0.5, 0.5, 0), q = (0.25, 0.25, 0.5)
  EXPECT_NEAR(instruction_distance(instructions({"a b"}), instructions({"a b c c"})), 0.5, 1e-15);
  try {
    (void)instruction_distance({}, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
}

TEST(InstructionDistance, MetricAxioms) {
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  Rng rng(23);
  auto random_set = [&] {
    std::vector<Tokens> out(1 + rng.below(4));
    for (auto& t : out) {
      for (std::size_t i = 0; i < 1 + rng.below(6); ++i) t.push_back(rng.pick(words));
    }
    return out;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_set();
    const auto y = random_set();
    const auto z = random_set();
    const double xy = instruction_distance(x, y);
    EXPECT_NEAR(xy, instruction_distance(y, x), 1e-15);
    EXPECT_LE(xy, instruction_distance(x, z) + instruction_distance(z, y) + 1e-12);
    EXPECT_GE(xy, 0.0);
    EXPECT_LE(xy, 1.0);
    // Total variation equals one minus the overlapping mass.
    const auto p = instruction_unigrams(x);
    const auto q = instruction_unigrams(y);
    double overlap = 0.0;
    for (const auto& [w, m] : p) {
      if (auto it = q.find(w); it != q.end()) overlap += std::min(m, it->second);
    }
    EXPECT_NEAR(xy, 1.0 - overlap, 1e-12);
  }
  // Same distribution, different sizes: distance zero.
  EXPECT_NEAR(instruction_distance(instructions({"a b"}), instructions({"a b", "b a"})), 0.0, 1e-15);
}

TEST(AllocateInscl, Examples) {
  EXPECT_EQ(allocate_inscl(three, std::vector<double>{0.6, 0.2, 0.2}, 10).counts, (Counts{6, 2, 2}));
  EXPECT_EQ(allocate_inscl(three, std::vector<double>{0, 0, 0}, 6).counts, (Counts{2, 2, 2}));
  EXPECT_EQ(allocate_inscl({"t1", "t2"}, std::vector<double>{1, 0}, 4).counts, (Counts{4, 0}));
  try {
    (void)allocate_inscl(three, std::vector<double>{0.5, -0.1, 0.2}, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
}

TEST(FitToPools, ShortfallsAreReported) {
  auto plan = allocate_rgd(three, std::vector<double>{8, 1, 1}, 100);
  ASSERT_EQ(plan.counts, (Counts{80, 10, 10}));
  const auto fitted = fit_to_pools(plan, std::vector<std::size_t>{50, 100, 100});
  EXPECT_EQ(fitted.counts[0], 50u);
  EXPECT_EQ(fitted.total(), 100u);
  ASSERT_EQ(fitted.shortfalls.size(), 1u);
  EXPECT_EQ(fitted.shortfalls[0], (Shortfall{"t1", 80, 50}));

  const auto starved = fit_to_pools(plan, std::vector<std::size_t>{5, 5, 5});
  EXPECT_EQ(starved.counts, (Counts{5, 5, 5}));
  EXPECT_EQ(starved.total(), 15u);
  EXPECT_EQ(starved.shortfalls.size(), 3u);
}

TEST(SampleReplay, Boundaries) {
  const auto p = pool(20);
  EXPECT_TRUE(sample_replay(p, 0, 1).examples.empty());
  const auto all = sample_replay(p, 20, 1);
  std::set<std::string> ids;
  for (const auto& e : all.examples) ids.insert(e.id);
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(all.shortfall, 0u);
  const auto over = sample_replay(p, 25, 1);
  EXPECT_EQ(over.examples.size(), 20u);
  EXPECT_EQ(over.shortfall, 5u);
}

TEST(SampleReplay, SeededAndUniformish) {
  const auto p = pool(10);
  EXPECT_EQ(sample_replay(p, 4, 9).examples, sample_replay(p, 4, 9).examples);
  EXPECT_NE(sample_replay(p, 4, 9).examples, sample_replay(p, 4, 10).examples);
  std::map<std::string, int> hits;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    for (const auto& e : sample_replay(p, 3, s).examples) ++hits[e.id];
  }
  for (const auto& [id, n] : hits) EXPECT_NEAR(n, 600, 90) << id;
}
