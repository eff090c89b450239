#include <gtest/gtest.h>

#include <sstream>

#include "polsar/core/rng.hpp"
#include "polsar/metrics/confusion.hpp"

using namespace polsar;
using metrics::ConfusionMatrix;

namespace {

// Straight textbook formulas over a dense row-major table, independent of the library.
struct Reference {
  double aa, oa, kappa, f1_squared;
};

Reference reference(std::size_t c, const std::vector<std::uint64_t>& h) {
  double n = 0, diag = 0;
  std::vector<double> row(c, 0), col(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row[i] += double(h[i * c + j]);
      col[j] += double(h[i * c + j]);
      n += double(h[i * c + j]);
    }
  double aa = 0, pe = 0, f = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double tp = double(h[i * c + i]);
    diag += tp;
    aa += tp / row[i];
    pe += row[i] * col[i];
    const double prec = col[i] > 0 ? tp / col[i] : 0, rec = tp / row[i];
    f += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
  }
  const double oa = diag / n;
  pe /= n * n;
  f /= double(c);
  return {aa / double(c), oa, (oa - pe) / (1 - pe), f * f};
}

}  // namespace

TEST(Metrics, TwoClassWorkedExample) {
  const auto cm = ConfusionMatrix::from_counts(2, {3, 1, 2, 4});
  const auto acc = metrics::aa_oa(cm);
  EXPECT_NEAR(acc.oa, 0.7, 1e-15);
  EXPECT_NEAR(acc.aa, (3.0 / 4 + 4.0 / 6) / 2, 1e-15);
  EXPECT_NEAR(metrics::kappa(cm), 0.4, 1e-15);
  const double mean_f1 = (6.0 / 9 + 8.0 / 11) / 2;
  EXPECT_NEAR(metrics::f1_macro(cm), mean_f1, 1e-15);
  EXPECT_NEAR(metrics::f1(cm), mean_f1 * mean_f1, 1e-15);
  EXPECT_NEAR(metrics::f1(cm), 0.4858, 5e-5);
}

TEST(Metrics, PerfectAndAntiDiagonal) {
  const auto perfect = ConfusionMatrix::from_counts(3, {5, 0, 0, 0, 7, 0, 0, 0, 2});
  EXPECT_EQ(metrics::aa_oa(perfect).oa, 1.0);
  EXPECT_EQ(metrics::aa_oa(perfect).aa, 1.0);
  EXPECT_EQ(metrics::kappa(perfect), 1.0);
  EXPECT_EQ(metrics::f1(perfect), 1.0);
  const auto wrong = ConfusionMatrix::from_counts(2, {0, 5, 5, 0});
  EXPECT_EQ(metrics::aa_oa(wrong).oa, 0.0);
  EXPECT_EQ(metrics::f1(wrong), 0.0);
  EXPECT_LT(metrics::kappa(wrong), 0.0);
}

TEST(Metrics, RandomTablesMatchReference) {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng.below(14);
    std::vector<std::uint64_t> h(c * c);
    for (auto& v : h) v = rng.below(50);
    for (std::size_t i = 0; i < c; ++i) h[i * c + i] += 1 + rng.below(200);
    const auto cm = ConfusionMatrix::from_counts(c, h);
    const auto ref = reference(c, h);
    const auto acc = metrics::aa_oa(cm);
    EXPECT_NEAR(acc.aa, ref.aa, 1e-12);
    EXPECT_NEAR(acc.oa, ref.oa, 1e-12);
    EXPECT_NEAR(metrics::kappa(cm), ref.kappa, 1e-12);
    EXPECT_NEAR(metrics::f1(cm), ref.f1_squared, 1e-12);
    EXPECT_GE(metrics::f1(cm), 0.0);
    EXPECT_LE(metrics::f1(cm), 1.0);
    EXPECT_LE(metrics::kappa(cm), 1.0);
  }
}

TEST(Metrics, ClassPermutationInvariance) {
  const std::size_t c = 4;
  Rng rng(3);
  std::vector<std::uint64_t> h(c * c);
  for (auto& v : h) v = 1 + rng.below(30);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::uint64_t> hp(c * c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) hp[perm[i] * c + perm[j]] = h[i * c + j];
  const auto a = ConfusionMatrix::from_counts(c, h), b = ConfusionMatrix::from_counts(c, hp);
  EXPECT_NEAR(metrics::aa_oa(a).aa, metrics::aa_oa(b).aa, 1e-15);
  EXPECT_EQ(metrics::aa_oa(a).oa, metrics::aa_oa(b).oa);
  EXPECT_NEAR(metrics::kappa(a), metrics::kappa(b), 1e-15);
  EXPECT_NEAR(metrics::f1(a), metrics::f1(b), 1e-15);
}

TEST(Metrics, RandomGuessingKappaNearZero) {
  Rng rng(8);
  ConfusionMatrix cm(5);
  for (int i = 0; i < 100000; ++i) cm.accumulate(1 + rng.below(5), 1 + rng.below(5));
  EXPECT_LT(std::abs(metrics::kappa(cm)), 0.05);
  EXPECT_NEAR(metrics::aa_oa(cm).oa, 0.2, 0.01);
}

TEST(Metrics, AccumulateAndMerge) {
  ConfusionMatrix a(3), b(3);
  a.accumulate(1, 1);
  a.accumulate(2, 3);
  b.accumulate(2, 3);
  b.accumulate(3, 3);
  a.merge(b);
  EXPECT_EQ(a.total(), 4u);
  EXPECT_EQ(a(2, 3), 2u);
  EXPECT_EQ(a.row_sum(2), 2u);
  EXPECT_EQ(a.col_sum(3), 3u);
  EXPECT_THROW(a.accumulate(0, 1), DataError);
  EXPECT_THROW(a.accumulate(1, 4), DataError);
  EXPECT_THROW(a.merge(ConfusionMatrix(2)), DataError);
}

TEST(Metrics, UndefinedCasesRaise) {
  EXPECT_THROW(metrics::kappa(ConfusionMatrix(3)), NumericalError);
  // Every sample true class 1, predicted class 1: chance agreement is 1.
  EXPECT_THROW(metrics::kappa(ConfusionMatrix::from_counts(2, {9, 0, 0, 0})), NumericalError);
  // A class with no labeled samples has no accuracy.
  EXPECT_THROW(metrics::aa_oa(ConfusionMatrix::from_counts(2, {4, 1, 0, 0})), DataError);
}

TEST(Metrics, AbsentClassF1WarnsAndScoresZero) {
  const auto cm = ConfusionMatrix::from_counts(3, {4, 1, 0, 2, 3, 0, 0, 0, 0});
  std::ostringstream warn;
  const auto f = metrics::per_class_f1(cm, &warn);
  EXPECT_EQ(f[2], 0.0);
  EXPECT_NE(warn.str().find("class 3"), std::string::npos);
}

TEST(Report, ColumnCountAndValues) {
  const auto cm = ConfusionMatrix::from_counts(3, {8, 1, 1, 0, 9, 1, 2, 0, 8});
  const auto r = metrics::make_report(cm, {"water", "urban", "forest"});
  EXPECT_EQ(r.samples, 30u);
  EXPECT_NEAR(r.oa, 25.0 / 30, 1e-15);
  const auto text = metrics::format_report(r);
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // samples
  std::getline(is, line);  // header
  std::getline(is, line);  // values
  std::istringstream row(line);
  std::size_t cols = 0;
  for (std::string tok; row >> tok;) ++cols;
  EXPECT_EQ(cols, 3u + 4u);
  EXPECT_NE(metrics::format_report_kv(r).find("Kappa = "), std::string::npos);
}
