#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "distunlearn/mechanisms.hpp"

using namespace distunlearn;

namespace {

DenseMatrix rows(std::initializer_list<std::initializer_list<double>> init) {
  DenseMatrix m(static_cast<Eigen::Index>(init.size()),
                static_cast<Eigen::Index>(init.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : init) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

DenseMatrix random_dense(Rng& rng, Eigen::Index n, Eigen::Index d, double shift) {
  DenseMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal(shift * (j % 2 ? -1 : 1), 1.0);
  return m;
}

std::vector<double> values(const ScoreResult& r) {
  std::vector<double> v;
  for (const auto& s : r.scores) v.push_back(s.score);
  return v;
}

DenseDataset toy_dataset() {
  DenseDataset ds;
  ds.features = rows({{0}, {1}, {2}, {3}, {4}, {5}, {6}});
  ds.labels = {0, 1, 0, 1, 0, 1, 0};
  ds.groups = {Group::P1, Group::P2, Group::P1, Group::P1, Group::P2, Group::P1, Group::P2};
  ds.row_ids = {"a", "b", "c", "d", "e", "f", "g"};
  ds.num_classes = 2;
  return ds;
}

}  // namespace

TEST(RandomRemoval, Examples) {
  EXPECT_TRUE(random_removal(5, 0, 7).removed_indices.empty());
  auto all = random_removal(5, 5, 7).removed_indices;
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto a = random_removal(1000, 100, 1);
  const auto b = random_removal(1000, 100, 1);
  EXPECT_EQ(a.removed_indices, b.removed_indices);
  EXPECT_EQ(std::set<std::size_t>(a.removed_indices.begin(), a.removed_indices.end()).size(), 100u);
  EXPECT_EQ(a.rule, ScoringRule::Random);
  EXPECT_EQ(a.budget_f, 100u);
  EXPECT_THROW(random_removal(5, 6, 1), std::invalid_argument);
}

TEST(SelectiveRemoval, Examples) {
  const std::vector<double> p1 = {0.1, 5.0, -0.2};
  const std::vector<double> p2 = {0.0, 0.0};
  EXPECT_EQ(selective_removal_gaussian(p1, p2, 1).removed_indices, (std::vector<std::size_t>{1}));
  const std::vector<double> tie = {1.0, -1.0};
  const std::vector<double> zero = {0.0};
  EXPECT_EQ(selective_removal_gaussian(tie, zero, 1).removed_indices,
            (std::vector<std::size_t>{0}));
  const std::vector<double> none;
  EXPECT_THROW(selective_removal_gaussian(p1, none, 1), std::invalid_argument);
  EXPECT_THROW(selective_removal_gaussian(p1, p2, 4), std::invalid_argument);
}

TEST(SelectiveRemoval, MatchesBruteForceSortAndNests) {
  Rng rng(31);
  std::vector<double> p1(200), p2(150);
  for (auto& x : p1) x = rng.normal(0.0, 1.0);
  for (auto& x : p2) x = rng.normal(0.7, 1.0);
  // duplicate a few values to exercise ties
  p1[10] = p1[11];
  p1[40] = p1[41];
  const double mu2 = std::accumulate(p2.begin(), p2.end(), 0.0) / p2.size();
  std::vector<std::size_t> order(p1.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = std::abs(p1[a] - mu2), sb = std::abs(p1[b] - mu2);
    return sa != sb ? sa > sb : a < b;
  });
  const auto plan = selective_removal_gaussian(p1, p2, 50);
  EXPECT_EQ(plan.removed_indices, std::vector<std::size_t>(order.begin(), order.begin() + 50));

  std::vector<std::size_t> prev;
  for (std::size_t f = 0; f <= p1.size(); ++f) {
    const auto cur = selective_removal_gaussian(p1, p2, f).removed_indices;
    ASSERT_TRUE(std::equal(prev.begin(), prev.end(), cur.begin()));
    prev = cur;
  }
}

TEST(SelectiveRemoval, SurvivorsCloserToP2ThanRandom) {
  double gap_sel = 0.0, gap_rand = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(404, std::uint64_t(s)));
    std::vector<double> p1(300), p2(300);
    for (auto& x : p1) x = rng.normal(0.0, 1.0);
    for (auto& x : p2) x = rng.normal(0.5, 1.0);
    const double mu2 = std::accumulate(p2.begin(), p2.end(), 0.0) / p2.size();
    auto survivor_gap = [&](const RemovalPlan& plan) {
      std::vector<char> drop(p1.size(), 0);
      for (auto i : plan.removed_indices) drop[i] = 1;
      double sum = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < p1.size(); ++i)
        if (!drop[i]) sum += p1[i], ++n;
      return std::abs(sum / n - mu2);
    };
    gap_sel += survivor_gap(selective_removal_gaussian(p1, p2, 150));
    gap_rand += survivor_gap(random_removal(p1.size(), 150, derive_seed(405, std::uint64_t(s))));
  }
  EXPECT_LE(gap_sel / seeds, gap_rand / seeds);
}

TEST(ScoreFeatures, NormExample) {
  const auto p1 = rows({{3, 4}, {0, 0}, {1, 0}});
  const auto r = score_features(p1, DenseMatrix(0, 2), ScoringRule::Norm);
  EXPECT_EQ(values(r), (std::vector<double>{5, 0, 1}));
}

TEST(ScoreFeatures, CosineEndpoints) {
  const auto p2 = rows({{1, 0}, {3, 0}});
  const auto r = score_features(rows({{1, 0}, {-1, 0}, {0, 0}}), p2, ScoringRule::CosMu2);
  EXPECT_NEAR(r.scores[0].score, 0.0, 1e-15);
  EXPECT_NEAR(r.scores[1].score, 2.0, 1e-15);
  EXPECT_EQ(r.scores[2].score, 0.0);
  EXPECT_EQ(r.zero_norm_rows, (std::vector<std::size_t>{2}));
}

TEST(ScoreFeatures, KnnRatioHandExample) {
  // x = 0: nearest other p1 point 1.0, nearest p2 point 3.0, sigma = 1.
  ScoringParams params;
  params.k = 1;
  params.bandwidth = 1.0;
  const auto r = score_features(rows({{0.0}, {1.0}}), rows({{3.0}}), ScoringRule::KnnRatio, params);
  EXPECT_NEAR(r.scores[0].score, std::exp(8.0), 1e-9 * std::exp(8.0));
  EXPECT_NEAR(r.scores[1].score, std::exp(4.0 - 1.0), 1e-12 * std::exp(3.0));

  params.k = 2;  // only one other p1 row
  EXPECT_THROW(score_features(rows({{0.0}, {1.0}}), rows({{3.0}, {4.0}}), ScoringRule::KnnRatio, params),
               std::invalid_argument);
}

TEST(ScoreFeatures, KnnRatioMatchesBruteForce) {
  Rng rng(12);
  const auto p1 = random_dense(rng, 40, 3, 0.5);
  const auto p2 = random_dense(rng, 30, 3, -0.5);
  ScoringParams params;
  params.k = 3;
  const auto r = score_features(p1, p2, ScoringRule::KnnRatio, params);
  // median of all pooled pairwise distances
  DenseMatrix pool(70, 3);
  pool << p1, p2;
  std::vector<double> dist;
  for (int i = 0; i < 70; ++i)
    for (int j = i + 1; j < 70; ++j) dist.push_back((pool.row(i) - pool.row(j)).norm());
  std::sort(dist.begin(), dist.end());
  const double med = dist.size() % 2 ? dist[dist.size() / 2]
                                     : 0.5 * (dist[dist.size() / 2 - 1] + dist[dist.size() / 2]);
  EXPECT_NEAR(r.bandwidth, med, 1e-12);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> d1, d2;
    for (int j = 0; j < 40; ++j)
      if (j != i) d1.push_back((p1.row(i) - p1.row(j)).squaredNorm());
    for (int j = 0; j < 30; ++j) d2.push_back((p1.row(i) - p2.row(j)).squaredNorm());
    std::sort(d1.begin(), d1.end());
    std::sort(d2.begin(), d2.end());
    const double expected = std::exp(-d1[2] / (med * med)) / std::exp(-d2[2] / (med * med));
    EXPECT_NEAR(r.scores[i].score, expected, 1e-9 * expected);
  }
}

TEST(ScoreFeatures, MahalanobisMatchesDirectInverse) {
  Rng rng(21);
  const auto p1 = random_dense(rng, 25, 3, 1.0);
  const auto p2 = random_dense(rng, 60, 3, 0.0);
  const Eigen::RowVectorXd mu2 = p2.colwise().mean();
  const Eigen::RowVectorXd mu1 = p1.colwise().mean();
  const DenseMatrix centered = p2.rowwise() - mu2;
  Eigen::MatrixXd cov = centered.transpose() * centered / (p2.rows() - 1.0);
  cov.diagonal().array() += 1e-6 * cov.trace() / 3.0;
  const Eigen::MatrixXd prec = cov.inverse();
  const auto m2 = score_features(p1, p2, ScoringRule::MahaMu2);
  const auto lr = score_features(p1, p2, ScoringRule::LrMaha);
  for (int i = 0; i < 25; ++i) {
    const Eigen::VectorXd a = (p1.row(i) - mu2).transpose();
    const Eigen::VectorXd b = (p1.row(i) - mu1).transpose();
    const double d2 = std::sqrt(a.dot(prec * a));
    const double d1 = std::sqrt(b.dot(prec * b));
    EXPECT_NEAR(m2.scores[i].score, d2, 1e-10);
    EXPECT_NEAR(lr.scores[i].score, d2 - d1, 1e-10);
  }
  // singular beyond repair: p2 rows all identical -> zero covariance
  EXPECT_THROW(score_features(p1, rows({{1, 1, 1}, {1, 1, 1}}), ScoringRule::MahaMu2),
               std::invalid_argument);
}

TEST(ScoreFeatures, LrCosIsMarginOfCosineDistances) {
  Rng rng(5);
  const auto p1 = random_dense(rng, 20, 4, 1.0);
  const auto p2 = random_dense(rng, 20, 4, -1.0);
  const Eigen::RowVectorXd mu1 = p1.colwise().mean();
  const Eigen::RowVectorXd mu2 = p2.colwise().mean();
  const auto r = score_features(p1, p2, ScoringRule::LrCos);
  for (int i = 0; i < 20; ++i) {
    const Eigen::RowVectorXd x = p1.row(i);
    const double c2 = 1.0 - x.dot(mu2) / (x.norm() * mu2.norm());
    const double c1 = 1.0 - x.dot(mu1) / (x.norm() * mu1.norm());
    EXPECT_NEAR(r.scores[i].score, c2 - c1, 1e-12);
  }
}

TEST(ScoreFeatures, SparseAgreesWithDense) {
  Rng rng(8);
  DenseMatrix p1 = random_dense(rng, 30, 6, 0.3);
  DenseMatrix p2 = random_dense(rng, 25, 6, -0.3);
  for (Eigen::Index i = 0; i < p1.rows(); ++i)
    for (Eigen::Index j = 0; j < p1.cols(); ++j)
      if ((i + j) % 3 == 0) p1(i, j) = 0.0;
  p1.row(4).setZero();
  const SparseMatrix s1 = p1.sparseView();
  const SparseMatrix s2 = p2.sparseView();
  ScoringParams params;
  params.k = 4;
  for (auto rule : {ScoringRule::Norm, ScoringRule::CosMu2, ScoringRule::LrCos,
                    ScoringRule::SelectiveGaussian, ScoringRule::KnnRatio}) {
    const auto d = score_features(p1, p2, rule, params);
    const auto s = score_features(s1, s2, rule, params);
    ASSERT_EQ(d.scores.size(), 30u);
    ASSERT_EQ(s.scores.size(), 30u);
    for (int i = 0; i < 30; ++i) {
      EXPECT_NEAR(d.scores[i].score, s.scores[i].score, 1e-9 * std::max(1.0, std::abs(d.scores[i].score)))
          << to_string(rule) << " row " << i;
    }
    EXPECT_EQ(d.zero_norm_rows, s.zero_norm_rows);
  }
  EXPECT_THROW(score_features(s1, s2, ScoringRule::MahaMu2), std::invalid_argument);
}

TEST(ScoreFeatures, OneScorePerRowForEveryRule) {
  Rng rng(3);
  const auto p1 = random_dense(rng, 33, 4, 0.5);
  const auto p2 = random_dense(rng, 40, 4, 0.0);
  for (auto rule : {ScoringRule::Random, ScoringRule::SelectiveGaussian, ScoringRule::CosMu2,
                    ScoringRule::LrCos, ScoringRule::KnnRatio, ScoringRule::Norm,
                    ScoringRule::MahaMu2, ScoringRule::LrMaha}) {
    const auto r = score_features(p1, p2, rule);
    ASSERT_EQ(r.scores.size(), 33u) << to_string(rule);
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
      EXPECT_EQ(r.scores[i].index, i);
      EXPECT_TRUE(std::isfinite(r.scores[i].score));
    }
    // determinism
    const auto again = score_features(p1, p2, rule);
    EXPECT_EQ(values(r), values(again));
  }
  EXPECT_THROW(score_features(DenseMatrix(0, 4), p2, ScoringRule::Norm), std::invalid_argument);
  EXPECT_THROW(score_features(p1, DenseMatrix(0, 4), ScoringRule::CosMu2), std::invalid_argument);
}

TEST(ScoringRuleNames, RoundTripAndAliases) {
  for (auto rule : {ScoringRule::Random, ScoringRule::SelectiveGaussian, ScoringRule::CosMu2,
                    ScoringRule::LrCos, ScoringRule::KnnRatio, ScoringRule::Norm,
                    ScoringRule::MahaMu2, ScoringRule::LrMaha}) {
    EXPECT_EQ(parse_rule(to_string(rule)), rule);
  }
  EXPECT_EQ(parse_rule("tfidf-norm"), ScoringRule::Norm);
  EXPECT_EQ(parse_rule("l2-norm"), ScoringRule::Norm);
  EXPECT_THROW(parse_rule("bogus"), std::invalid_argument);
}

TEST(ApplyPlan, Examples) {
  const auto ds = toy_dataset();  // p1 rows at 0, 2, 3, 5
  const auto same = apply_plan(ds, RemovalPlan{});
  EXPECT_EQ(same.row_ids, ds.row_ids);
  EXPECT_EQ(same.features, ds.features);

  const auto full = apply_plan(ds, random_removal(4, 4, 1));
  EXPECT_EQ(full.count(Group::P1), 0u);
  EXPECT_EQ(full.row_ids, (std::vector<std::string>{"b", "e", "g"}));
  EXPECT_EQ(full.labels, (std::vector<int>{1, 0, 0}));

  RemovalPlan plan;
  plan.removed_indices = {3, 1};
  plan.budget_f = 2;
  const auto out = apply_plan(ds, plan);
  // reference filter: drop p1 positions 1 and 3 -> rows "c" and "f"
  EXPECT_EQ(out.row_ids, (std::vector<std::string>{"a", "b", "d", "e", "g"}));
  EXPECT_EQ(out.count(Group::P1), 2u);
  EXPECT_EQ(out.features(2, 0), 3.0);

  plan.removed_indices = {4};
  EXPECT_THROW(apply_plan(ds, plan), std::out_of_range);
}
