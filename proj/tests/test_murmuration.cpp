#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fricke/murmuration.hpp"
#include "test_util.hpp"

namespace fricke {
namespace {

using testing::blank_record;

// Straight loop mean, independent of pairwise_sum.
double loop_mean(const Dataset& ds, int cls, int p, bool normalize, bool masked) {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : ds.records) {
    if (r.fricke_sign != cls) continue;
    double v = r.coefficients[p - 1];
    if (masked && std::gcd(p, r.level) != 1) v = 0.0;
    if (normalize && r.parity == 1) v = -v;
    sum += v;
    ++count;
  }
  return sum / count;
}

GeneratorSpec labeled_spec(long long n) {
  GeneratorSpec g;
  g.n = n;
  g.levels = {1, 2, 3, 5, 6, 7, 10, 11, 14, 15, 21, 30};
  g.class_weights = {2, 3, 2, 1, 0, 0};
  return g;
}

TEST(AverageByClass, SingletonClassReproducesCoefficients) {
  Dataset ds;
  auto a = blank_record("a", 1, 1, 1);
  auto b = blank_record("b", 1, 0, -1);
  for (int n = 2; n <= kCoefficientCount; ++n) a.a(n) = 0.01 * n, b.a(n) = -0.5;
  ds.records = {a, b};
  const auto primes = primes_below(50);
  const auto t = average_by_class(ds, by_fricke_sign, primes, false, false);
  ASSERT_EQ(t.rows.size(), primes.size());
  for (const auto& row : t.rows) {
    EXPECT_EQ(row.mean_plus, a.a(row.p));
    EXPECT_EQ(row.mean_minus, -0.5);
    EXPECT_EQ(row.n_plus, 1u);
    EXPECT_EQ(row.n_minus, 1u);
  }
}

TEST(AverageByClass, OpposingValuesCancel) {
  Dataset ds;
  auto a = blank_record("a", 1, 0, 1);
  auto b = blank_record("b", 1, 0, 1);
  auto c = blank_record("c", 1, 0, -1);
  a.a(7) = 0.3;
  b.a(7) = -0.3;
  ds.records = {a, b, c};
  const std::vector<int> p{7};
  EXPECT_EQ(average_by_class(ds, by_fricke_sign, p, false, false).rows[0].mean_plus, 0.0);
}

TEST(AverageByClass, EmptyClassIsAnError) {
  Dataset ds;
  ds.records = {blank_record("a", 1, 0, 1)};
  const std::vector<int> p{2, 3};
  EXPECT_THROW(average_by_class(ds, by_fricke_sign, p, false, false), ArgumentError);
}

TEST(AverageByClass, MatchesLoopOracle) {
  const auto ds = synthesize(31, labeled_spec(50));
  const auto primes = primes_below(1000);
  for (bool normalize : {false, true}) {
    for (bool masked : {false, true}) {
      const auto t = average_by_class(ds, by_fricke_sign, primes, normalize, masked);
      for (const auto& row : t.rows) {
        EXPECT_NEAR(row.mean_plus, loop_mean(ds, 1, row.p, normalize, masked), 1e-12);
        EXPECT_NEAR(row.mean_minus, loop_mean(ds, -1, row.p, normalize, masked), 1e-12);
      }
    }
  }
}

TEST(AverageByClass, WeightedMeanOfDisjointParts) {
  const auto ds = synthesize(32, labeled_spec(120));
  const auto primes = primes_below(200);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    // random partition into A, B, each with both classes present
    std::vector<int> part(ds.size());
    for (auto& x : part) x = static_cast<int>(rng.below(2));
    Dataset a, b;
    for (std::size_t i = 0; i < ds.size(); ++i) (part[i] ? a : b).records.push_back(ds.records[i]);
    const auto whole = average_by_class(ds, by_fricke_sign, primes, true, false);
    const auto ta = average_by_class(a, by_fricke_sign, primes, true, false);
    const auto tb = average_by_class(b, by_fricke_sign, primes, true, false);
    for (std::size_t k = 0; k < primes.size(); ++k) {
      const auto &ra = ta.rows[k], &rb = tb.rows[k];
      const double plus = (ra.mean_plus * ra.n_plus + rb.mean_plus * rb.n_plus) / (ra.n_plus + rb.n_plus);
      const double minus = (ra.mean_minus * ra.n_minus + rb.mean_minus * rb.n_minus) / (ra.n_minus + rb.n_minus);
      EXPECT_NEAR(whole.rows[k].mean_plus, plus, 1e-12);
      EXPECT_NEAR(whole.rows[k].mean_minus, minus, 1e-12);
    }
  }
}

TEST(AverageByClass, NormalizeIsNoOpOnEvenForms) {
  auto g = labeled_spec(60);
  g.class_weights = {1, 0, 1, 0, 0, 0};
  const auto ds = synthesize(33, g);
  const auto primes = primes_below(100);
  const auto a = average_by_class(ds, by_fricke_sign, primes, false, false);
  const auto b = average_by_class(ds, by_fricke_sign, primes, true, false);
  for (std::size_t k = 0; k < primes.size(); ++k) {
    EXPECT_EQ(a.rows[k].mean_plus, b.rows[k].mean_plus);
    EXPECT_EQ(a.rows[k].mean_minus, b.rows[k].mean_minus);
  }
}

TEST(AverageByClass, InvariantUnderRecordOrder) {
  auto ds = synthesize(34, labeled_spec(80));
  const auto primes = primes_below(300);
  const auto before = average_by_class(ds, by_fricke_sign, primes, true, true);
  Rng rng(9);
  rng.shuffle(std::span<MaassFormRecord>(ds.records));
  const auto after = average_by_class(ds, by_fricke_sign, primes, true, true);
  for (std::size_t k = 0; k < primes.size(); ++k) {
    EXPECT_NEAR(before.rows[k].mean_plus, after.rows[k].mean_plus, 1e-12);
    EXPECT_NEAR(before.rows[k].mean_minus, after.rows[k].mean_minus, 1e-12);
  }
}

TEST(CompareMasked, LevelOneOnlyHasNoGap) {
  auto g = labeled_spec(40);
  g.levels = {1};
  const auto cmp = compare_masked(synthesize(35, g));
  EXPECT_EQ(cmp.max_gap(), 0.0);
  EXPECT_EQ(cmp.raw.rows.back().p, 103);  // largest prime <= 105
}

TEST(CompareMasked, GapMatchesLoopOracle) {
  auto g = labeled_spec(200);
  g.levels = {2};  // a_2 = -w/sqrt(2) carries the sign
  const auto ds = synthesize(36, g);
  const auto cmp = compare_masked(ds, 105, true);
  double gap = 0.0;
  for (int p : primes_below(106))
    for (int cls : {1, -1})
      gap = std::max(gap, std::abs(loop_mean(ds, cls, p, true, false) - loop_mean(ds, cls, p, true, true)));
  EXPECT_GT(gap, 0.05);
  EXPECT_NEAR(cmp.max_gap(), gap, 1e-12);
}

TEST(PredictionMurmuration, SingleClassIsFlagged) {
  auto g = labeled_spec(10);
  g.class_weights = {0, 0, 0, 0, 1, 1};
  const auto ds = synthesize(37, g);
  PredictionSet preds;
  for (const auto& r : ds.records) preds.add({r.label, 1, 0.9});
  const auto primes = primes_below(20);
  const auto t = murmuration_of_predictions(ds, preds, primes, true);
  EXPECT_FALSE(t.empty_plus);
  EXPECT_TRUE(t.empty_minus);
  EXPECT_TRUE(std::isnan(t.rows[0].mean_minus));
  EXPECT_EQ(t.rows[0].n_plus, 10u);

  PredictionSet partial;
  partial.add({ds.records[0].label, 1, 0.0});
  EXPECT_THROW(murmuration_of_predictions(ds, partial, primes, true), DataError);
}

TEST(PredictionMurmuration, RandomPredictionsOnSymmetricDataAverageToZero) {
  GeneratorSpec g;
  g.n = 4000;
  g.class_weights = {0, 0, 0, 0, 1, 1};
  g.signal_strength = 0.0;
  g.noise_sigma = 0.5;
  const auto ds = synthesize(38, g);
  Rng coin(123);
  PredictionSet preds;
  for (const auto& r : ds.records) preds.add({r.label, coin.uniform() < 0.5 ? 1 : -1, 0.0});
  const auto primes = primes_below(30);
  const auto t = murmuration_of_predictions(ds, preds, primes, true);
  for (const auto& row : t.rows) {
    EXPECT_LT(std::abs(row.mean_plus), 3 * 0.5 / std::sqrt(row.n_plus)) << row.p;
    EXPECT_LT(std::abs(row.mean_minus), 3 * 0.5 / std::sqrt(row.n_minus)) << row.p;
  }
}

TEST(Render, OneRowTableAndCsvRoundTrip) {
  testing::TempDir dir;
  MurmurationTable t;
  t.rows.push_back({2, 0.1, -0.2, 3, 4});
  render(t, dir.file("one"), "test");
  const auto svg = testing::slurp(dir.file("one.svg"));
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  // two data points plus two legend markers
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 4u);

  const auto ds = synthesize(39, labeled_spec(30));
  const auto primes = primes_below(1000);
  const auto full = average_by_class(ds, by_fricke_sign, primes, true, false);
  render(full, dir.file("full"));
  const auto back = read_murmuration_csv(dir.file("full.csv"));
  ASSERT_EQ(back.rows.size(), full.rows.size());
  for (std::size_t k = 0; k < full.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].p, full.rows[k].p);
    EXPECT_EQ(back.rows[k].mean_plus, full.rows[k].mean_plus);  // bit-equal
    EXPECT_EQ(back.rows[k].mean_minus, full.rows[k].mean_minus);
    EXPECT_EQ(back.rows[k].n_plus, full.rows[k].n_plus);
  }
  EXPECT_THROW(to_svg(MurmurationTable{}), ArgumentError);
}

TEST(PairwiseSum, AgreesWithLoopWithinRounding) {
  Rng rng(4);
  std::vector<double> xs(1001);
  for (auto& x : xs) x = rng.normal();
  double loop = 0.0;
  for (double x : xs) loop += x;
  EXPECT_NEAR(pairwise_sum(xs), loop, 1e-12);
}

}  // namespace
}  // namespace fricke
