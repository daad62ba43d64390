#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "synenc/stats.hpp"

using namespace synenc;
using namespace synenc::stats;
using encoder::FoldSpec;

namespace {

Matrix randn(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

StatsConfig cfg_with(std::size_t n, std::uint64_t seed = 1) {
  StatsConfig c;
  c.n_permutations = n;
  c.n_bootstrap = n;
  c.seed = seed;
  return c;
}

atlas::ParcelLabels labels_of(const std::vector<std::pair<atlas::Hemisphere, std::string>>& v) {
  std::vector<atlas::VoxelLabel> out;
  for (const auto& [h, p] : v) out.push_back(atlas::make_label(h, p));
  return atlas::ParcelLabels::from_labels(out);
}

}  // namespace

TEST(PooledR2, UsesOverallMean) {
  Matrix a(4, 1), p(4, 1);
  a << 1, 2, 3, 4;
  p << 1, 2, 3, 4;
  EXPECT_EQ(pooled_r2(p, a)[0], 1.0);
  p.setConstant(2.5);
  EXPECT_NEAR(pooled_r2(p, a)[0], 0.0, 1e-12);
}

TEST(Permutation, PerfectPredictionGetsMinimumP) {
  Rng rng(71);
  const Matrix y = randn(rng, 120, 3);
  const auto p = block_permutation_test(y, y, FoldSpec::contiguous(120, 4), cfg_with(99));
  for (Eigen::Index v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(p[v], 1.0 / 100.0);
}

TEST(Permutation, ZeroPermutationsGiveOne) {
  Rng rng(72);
  const Matrix y = randn(rng, 80, 2);
  EXPECT_EQ(block_permutation_test(y, y, FoldSpec::contiguous(80, 4), cfg_with(0)), Vector::Ones(2));
}

TEST(Permutation, FoldShorterThanBlock) {
  Rng rng(73);
  const Matrix y = randn(rng, 30, 1);
  EXPECT_ERROR(block_permutation_test(y, y, FoldSpec::contiguous(30, 4), cfg_with(9)), FoldShorterThanBlock);
}

TEST(PermutationProperty, DeterministicAndSeedStable) {
  Rng rng(74);
  const Matrix y = randn(rng, 160, 6);
  const Matrix pred = 0.3 * y + randn(rng, 160, 6);
  const auto folds = FoldSpec::contiguous(160, 4);
  const auto a = block_permutation_test(pred, y, folds, cfg_with(999, 1));
  EXPECT_EQ(a, block_permutation_test(pred, y, folds, cfg_with(999, 1)));
  const auto b = block_permutation_test(pred, y, folds, cfg_with(999, 2));
  for (Eigen::Index v = 0; v < 6; ++v) {
    const double se = std::sqrt(std::max(a[v] * (1 - a[v]), 1.0 / 1000) / 1000.0);
    EXPECT_LE(std::abs(a[v] - b[v]), 3.0 * std::sqrt(2.0) * se + 1e-12) << v;
  }
}

TEST(PermutationProperty, InvariantToAffineRescalingOfPredictions) {
  // R^2 under a common shift and positive scale of both series is a strictly
  // monotone function of the original, so ranks and p-values agree.
  Rng rng(75);
  const Matrix y = randn(rng, 120, 4);
  const Matrix pred = 0.5 * y + randn(rng, 120, 4);
  const auto folds = FoldSpec::contiguous(120, 4);
  const auto a = block_permutation_test(pred, y, folds, cfg_with(199));
  const auto b = block_permutation_test((3.0 * pred).array() + 7.0, (3.0 * y).array() + 7.0, folds, cfg_with(199));
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Bootstrap, SymmetricAndSeparated) {
  Rng rng(76);
  const Matrix y = randn(rng, 282, 3);
  const auto folds = FoldSpec::contiguous(282, 4);
  const Matrix pred = 0.5 * y + randn(rng, 282, 3);
  const auto same = bootstrap_diff_test(pred, pred, y, folds, cfg_with(199));
  for (Eigen::Index v = 0; v < 3; ++v) EXPECT_GE(same[v], 0.5);

  Matrix shuffled = y;
  std::vector<Eigen::Index> order(282);
  for (Eigen::Index i = 0; i < 282; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order.begin(), order.end());
  for (Eigen::Index i = 0; i < 282; ++i) shuffled.row(i) = y.row(order[static_cast<std::size_t>(i)]);
  const auto sep = bootstrap_diff_test(y, shuffled, y, folds, cfg_with(999));
  for (Eigen::Index v = 0; v < 3; ++v) EXPECT_LT(sep[v], 0.01);
}

TEST(Bootstrap, SwapGivesComplement) {
  Rng rng(77);
  const Matrix y = randn(rng, 200, 5);
  const auto folds = FoldSpec::contiguous(200, 4);
  const Matrix a = 0.2 * y + randn(rng, 200, 5);
  const Matrix b = 0.2 * y + randn(rng, 200, 5);
  const auto pab = bootstrap_diff_test(a, b, y, folds, cfg_with(999));
  const auto pba = bootstrap_diff_test(b, a, y, folds, cfg_with(999));
  for (Eigen::Index v = 0; v < 5; ++v) EXPECT_NEAR(pab[v] + pba[v], 1.0, 0.08) << v;
}

TEST(Bootstrap, WholeFoldBlocksReproduceObserved) {
  Rng rng(78);
  const Matrix y = randn(rng, 80, 2);
  StatsConfig cfg = cfg_with(99);
  cfg.block = 20;
  Matrix better = y;
  better.col(1) = randn(rng, 80, 1);
  const auto p = bootstrap_diff_test(better, randn(rng, 80, 2), y, FoldSpec::contiguous(80, 4), cfg);
  // Every resample equals the observed statistic; centered values are 0.
  EXPECT_DOUBLE_EQ(p[0], 1.0 / 100.0);
}

TEST(Fdr, Examples) {
  const auto r = bh_fdr({0.01, 0.02, 0.5}, 0.05);
  EXPECT_EQ(r.reject, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(r.threshold, std::optional<double>(0.02));
  EXPECT_EQ(r.n_rejected, 2u);
  const auto none = bh_fdr({1.0, 1.0, 1.0}, 0.05);
  EXPECT_FALSE(none.threshold.has_value());
  EXPECT_EQ(none.n_rejected, 0u);
  const auto all = bh_fdr({0.01, 0.001, 0.015}, 0.05);
  EXPECT_EQ(all.n_rejected, 3u);
  EXPECT_THROW(bh_fdr({0.0, 0.5}, 0.05), Error);
  EXPECT_THROW(bh_fdr({1.5}, 0.05), Error);
}

TEST(FdrProperty, MonotoneInQAndMatchesDefinition) {
  Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + rng.uniform_index(60));
    for (auto& v : p) v = std::max(1e-6, std::pow(rng.uniform(), 1.0 + 3.0 * rng.uniform()));
    const double q1 = 0.2 * rng.uniform() + 1e-3;
    const double q2 = q1 + 0.2 * rng.uniform();
    const auto r1 = bh_fdr(p, q1);
    const auto r2 = bh_fdr(p, q2);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_TRUE(!r1.reject[i] || r2.reject[i]);
    // Definition: largest k with p_(k) <= q k / m.
    std::vector<double> s = p;
    std::sort(s.begin(), s.end());
    std::size_t k = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] <= q1 * static_cast<double>(i + 1) / static_cast<double>(s.size())) k = i + 1;
    }
    std::size_t expected = 0;
    for (double v : p) expected += (k > 0 && v <= s[k - 1]) ? 1 : 0;
    EXPECT_EQ(r1.n_rejected, expected);
  }
}

TEST(Roi, AggregatesPerSubjectAndAcrossSubjects) {
  using atlas::Hemisphere;
  const auto labels = labels_of({{Hemisphere::Left, "PFm"},
                                 {Hemisphere::Left, "PGi"},
                                 {Hemisphere::Left, "V1"},
                                 {Hemisphere::Right, "55b"}});
  Vector r2(4);
  r2 << 0.2, 0.4, 0.9, 0.1;
  const SubjectResult s1{"s1", &labels, {true, true, false, false}, r2};
  const SubjectResult s2{"s2", &labels, {false, false, true, true}, r2};
  const auto rep = roi_aggregate("CM", {s1, s2});
  EXPECT_EQ(rep.analysis, "CM");
  const RoiSummaryRow* ag = nullptr;
  for (const auto& row : rep.summary) {
    if (row.roi == "AG" && row.hemisphere == Hemisphere::Left) ag = &row;
    EXPECT_FALSE(row.roi == "AG" && row.hemisphere == Hemisphere::Right);
    EXPECT_NE(row.roi, "ATL");
  }
  ASSERT_NE(ag, nullptr);
  EXPECT_EQ(ag->n_subjects, 2u);
  EXPECT_DOUBLE_EQ(ag->mean_pct, 50.0);
  EXPECT_NEAR(ag->se_pct, 50.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(ag->mean_r2, 0.3, 1e-12);
  EXPECT_EQ(rep.subjects.size(), 4u);
}

TEST(Roi, AllSignificantGivesZeroSe) {
  const auto labels = labels_of({{atlas::Hemisphere::Left, "44"}, {atlas::Hemisphere::Left, "45"}});
  const Vector r2 = Vector::Constant(2, 0.1);
  const auto rep = roi_aggregate("x", {{"a", &labels, {true, true}, r2}, {"b", &labels, {true, true}, r2}});
  ASSERT_EQ(rep.summary.size(), 1u);
  EXPECT_EQ(rep.summary[0].mean_pct, 100.0);
  EXPECT_EQ(rep.summary[0].se_pct, 0.0);
}

TEST(Roi, LabelCountMismatch) {
  const auto labels = labels_of({{atlas::Hemisphere::Left, "44"}});
  EXPECT_ERROR(roi_aggregate("x", {{"a", &labels, {true, false}, Vector::Zero(2)}}), UnknownParcel);
}
