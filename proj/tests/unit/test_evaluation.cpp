#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "nilm/error.hpp"
#include "nilm/evaluation.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nilm {
namespace {

using testing::Gen;

constexpr double kPeriod = 0.02;

std::vector<double> random_power(Gen& gen, std::size_t n) {
  std::vector<double> p(n);
  for (auto& v : p) v = gen.chance(0.3) ? 0.0 : gen.uniform(0.0, 3000.0);
  return p;
}

AccuracyResult row(double e, double de) {
  AccuracyResult r;
  r.e_true = e;
  r.delta_e = de;
  if (e > 0.0) r.acc = 1.0 - de / e;
  return r;
}

TEST(Accuracy, Identities) {
  Gen gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_power(gen, 200);
    std::vector<double> zero(p.size(), 0.0), up(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) up[k] = 1.1 * p[k];
    EXPECT_EQ(accuracy(p, p, kPeriod).acc, 1.0);
    EXPECT_NEAR(*accuracy(zero, p, kPeriod).acc, 0.0, 1e-12);
    EXPECT_NEAR(*accuracy(up, p, kPeriod).acc, 0.9, 1e-12);
    EXPECT_FALSE(accuracy(p, zero, kPeriod).defined());
  }
}

TEST(Accuracy, MatchesNaiveRelativeL1) {
  Gen gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_power(gen, 300);
    const auto e = random_power(gen, 300);
    const auto r = accuracy(e, t, kPeriod);
    EXPECT_NEAR(*r.acc, 1.0 - testing::naive_relative_l1(e, t), 1e-12);
  }
}

TEST(Accuracy, CanBeNegative) {
  const std::vector<double> t{100.0, 100.0}, e{400.0, 400.0};
  EXPECT_NEAR(*accuracy(e, t, kPeriod).acc, -2.0, 1e-12);
}

TEST(Accuracy, ScaleInvariance) {
  Gen gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_power(gen, 100);
    const auto e = random_power(gen, 100);
    const double c = gen.uniform(0.01, 100.0);
    std::vector<double> ts(t), es(e);
    for (auto& v : ts) v *= c;
    for (auto& v : es) v *= c;
    EXPECT_NEAR(*accuracy(es, ts, kPeriod).acc, *accuracy(e, t, kPeriod).acc, 1e-12);
  }
}

TEST(Accuracy, VariableDurationsAgreeWithConstant) {
  Gen gen(4);
  const auto t = random_power(gen, 100);
  const auto e = random_power(gen, 100);
  const std::vector<double> d(t.size(), kPeriod);
  const auto a = accuracy(e, t, kPeriod);
  const auto b = accuracy(e, t, d);
  EXPECT_NEAR(a.delta_e, b.delta_e, 1e-12);
  EXPECT_NEAR(a.e_true, b.e_true, 1e-12);
}

TEST(Energy, Wh) {
  const std::vector<double> p(3600, 1000.0);
  EXPECT_NEAR(energy_wh(p, 1.0), 1000.0, 1e-9);
  const std::vector<double> d(p.size(), 1.0);
  EXPECT_NEAR(energy_wh(p, d), 1000.0, 1e-9);
}

TEST(WeightedAccuracy, DisjointConcatenation) {
  Gen gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t1 = random_power(gen, 80), e1 = random_power(gen, 80);
    const auto t2 = random_power(gen, 120), e2 = random_power(gen, 120);
    std::vector<double> t(t1), e(e1);
    t.insert(t.end(), t2.begin(), t2.end());
    e.insert(e.end(), e2.begin(), e2.end());
    const std::vector<AccuracyResult> parts{accuracy(e1, t1, kPeriod), accuracy(e2, t2, kPeriod)};
    EXPECT_NEAR(weighted_accuracy(parts), *accuracy(e, t, kPeriod).acc, 1e-12);
  }
}

TEST(WeightedAccuracy, ReportedTables) {
  const std::vector<AccuracyResult> thermoform{row(14.2, 1.7), row(16.3, 4.0), row(17.3, 1.2), row(43.5, 4.7),
                                               row(4.1, 0.1)};
  const std::vector<AccuracyResult> milling{row(2.62, 0.63), row(1.85, 0.27), row(0.0, 0.02),
                                            row(0.72, 0.40), row(0.21, 0.03), row(11.53, 0.83)};
  EXPECT_NEAR(weighted_accuracy(thermoform), 0.88, 0.005);
  EXPECT_NEAR(weighted_accuracy(milling), 0.87, 0.005);
  // The undefined row adds only to the numerator.
  EXPECT_NEAR(weighted_accuracy(milling) - weighted_accuracy_including_false_positives(milling), 0.02 / 16.93, 1e-12);
}

TEST(WeightedAccuracy, AllUndefined) {
  const std::vector<AccuracyResult> none{row(0.0, 1.0), row(0.0, 0.0)};
  try {
    weighted_accuracy(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllUndefined);
  }
  EXPECT_THROW(weighted_accuracy_including_false_positives(none), Error);
  EXPECT_THROW(weighted_accuracy({}), Error);
}

TEST(Accuracy, LengthMismatch) {
  const std::vector<double> a(3, 1.0), b(4, 1.0);
  EXPECT_THROW(accuracy(a, b, kPeriod), Error);
  EXPECT_THROW(accuracy(a, a, 0.0), Error);
}

// Truth loads with disjoint-ish activity and estimates that are noisy copies.
struct MatchCase {
  std::vector<NamedSeries> truths;
  std::vector<NamedSeries> estimates;
  std::vector<double> durations;
};

MatchCase noisy_copies(Gen& gen, std::size_t loads, std::size_t n) {
  MatchCase c;
  c.durations.assign(n, kPeriod);
  for (std::size_t j = 0; j < loads; ++j) {
    NamedSeries t{"t" + std::to_string(j), std::vector<double>(n, 0.0), false};
    const double level = gen.uniform(100.0, 2000.0);
    const std::size_t a = static_cast<std::size_t>(gen.integer(0, static_cast<int>(n / 2)));
    const std::size_t b = a + static_cast<std::size_t>(gen.integer(10, static_cast<int>(n / 2)));
    for (std::size_t k = a; k < b; ++k) t.p[k] = level;
    NamedSeries e{"e" + std::to_string(j), t.p, false};
    for (auto& v : e.p) v = std::max(0.0, v * gen.uniform(0.9, 1.1));
    c.truths.push_back(std::move(t));
    c.estimates.push_back(std::move(e));
  }
  std::shuffle(c.estimates.begin(), c.estimates.end(), gen.engine());
  return c;
}

double overlap_ratio(const NamedSeries& e, const NamedSeries& t) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < e.p.size(); ++k) {
    lo += std::min(e.p[k], t.p[k]);
    hi += std::max(e.p[k], t.p[k]);
  }
  return hi > 0.0 ? lo / hi : 0.0;
}

TEST(Matching, IdentityMatchesEverything) {
  Gen gen(6);
  auto c = noisy_copies(gen, 5, 200);
  const auto m = match_estimates_to_truth(c.truths, c.truths, c.durations);
  ASSERT_EQ(m.pairs.size(), 5u);
  for (const auto& p : m.pairs) {
    EXPECT_EQ(p.estimate, p.truth);
    EXPECT_EQ(p.result.acc, 1.0);
    EXPECT_DOUBLE_EQ(p.overlap_ratio, 1.0);
  }
  EXPECT_TRUE(m.false_positives.empty());
  EXPECT_FALSE(m.residual.has_value());
}

TEST(Matching, AgreesWithExhaustiveAssignment) {
  Gen gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = noisy_copies(gen, static_cast<std::size_t>(gen.integer(1, 6)), 150);
    const auto m = match_estimates_to_truth(c.estimates, c.truths, c.durations);
    const auto best = testing::exhaustive_assignment(c.estimates.size(), c.truths.size(), [&](auto i, auto j) {
      return overlap_ratio(c.estimates[i], c.truths[j]);
    });
    std::map<std::size_t, std::size_t> got;
    for (const auto& p : m.pairs) got[p.estimate] = p.truth;
    for (std::size_t i = 0; i < best.size(); ++i) {
      if (best[i]) {
        ASSERT_TRUE(got.count(i)) << "estimate " << i;
        EXPECT_EQ(got[i], *best[i]);
      } else {
        EXPECT_FALSE(got.count(i));
      }
    }
  }
}

TEST(Matching, PermutationInvariance) {
  Gen gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = noisy_copies(gen, static_cast<std::size_t>(gen.integer(2, 6)), 150);
    const auto a = match_estimates_to_truth(c.estimates, c.truths, c.durations);
    auto shuffled = c.estimates;
    std::shuffle(shuffled.begin(), shuffled.end(), gen.engine());
    const auto b = match_estimates_to_truth(shuffled, c.truths, c.durations);
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
      EXPECT_EQ(a.pairs[k].truth, b.pairs[k].truth);
      EXPECT_EQ(c.estimates[a.pairs[k].estimate].id, shuffled[b.pairs[k].estimate].id);
      EXPECT_DOUBLE_EQ(*a.pairs[k].result.acc, *b.pairs[k].result.acc);
    }
  }
}

TEST(Matching, DisjointEstimateIsFalsePositive) {
  const std::size_t n = 100;
  const std::vector<double> d(n, kPeriod);
  NamedSeries t{"heater", std::vector<double>(n, 0.0), false};
  NamedSeries e1{"a", std::vector<double>(n, 0.0), false};
  NamedSeries e2{"b", std::vector<double>(n, 0.0), false};
  for (std::size_t k = 0; k < 50; ++k) t.p[k] = e1.p[k] = 1000.0;
  for (std::size_t k = 60; k < 70; ++k) e2.p[k] = 300.0;
  const auto m = match_estimates_to_truth(std::vector{e1, e2}, std::vector{t}, d);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].estimate, 0u);
  ASSERT_EQ(m.false_positives, std::vector<std::size_t>{1});
  const auto& fp = m.false_positive_results[0];
  EXPECT_FALSE(fp.defined());
  EXPECT_NEAR(fp.delta_e, energy_wh(e2.p, kPeriod), 1e-12);
  EXPECT_EQ(m.all_results().size(), 2u);
}

TEST(Matching, CatchAllAbsorbsUnmatchedTruths) {
  const std::size_t n = 100;
  const std::vector<double> d(n, kPeriod);
  NamedSeries big{"big", std::vector<double>(n, 2000.0), false};
  NamedSeries small1{"small1", std::vector<double>(n, 0.0), false};
  NamedSeries small2{"small2", std::vector<double>(n, 0.0), false};
  for (std::size_t k = 10; k < 30; ++k) small1.p[k] = 40.0;
  for (std::size_t k = 50; k < 90; ++k) small2.p[k] = 60.0;
  NamedSeries rest{"unexplained", std::vector<double>(n, 0.0), true};
  for (std::size_t k = 0; k < n; ++k) rest.p[k] = small1.p[k] + small2.p[k];
  const auto m = match_estimates_to_truth(std::vector{big, rest}, std::vector{big, small1, small2}, d);
  ASSERT_EQ(m.pairs.size(), 1u);
  ASSERT_TRUE(m.residual.has_value());
  EXPECT_EQ(m.residual->truths, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(m.residual->estimate, std::optional<std::size_t>{1});
  EXPECT_EQ(m.residual->result.acc, 1.0);
  EXPECT_TRUE(m.false_positives.empty());
}

TEST(Matching, LengthMismatch) {
  const std::vector<double> d(10, kPeriod);
  const std::vector<NamedSeries> ok{{"a", std::vector<double>(10, 1.0), false}};
  const std::vector<NamedSeries> bad{{"b", std::vector<double>(9, 1.0), false}};
  EXPECT_THROW(match_estimates_to_truth(bad, ok, d), Error);
  EXPECT_THROW(match_estimates_to_truth(ok, bad, d), Error);
}

}  // namespace
}  // namespace nilm
