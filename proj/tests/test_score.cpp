#include "diffintersort/score.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace diffintersort;

namespace {

Matrix random_d(Rng& rng, int d) {
  Matrix D(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) D(i, j) = i == j ? 0.0 : rng.uniform(-1.0, 3.0);
  return D;
}

Potential random_potential(Rng& rng, int d) {
  Vector p(d);
  for (int i = 0; i < d; ++i) p(i) = rng.normal();
  return Potential(p);
}

}  // namespace

TEST(ScoreOfOrder, ZeroMatrix) {
  Rng rng(1);
  for (int t = 0; t < 5; ++t) EXPECT_EQ(score_of_order(Matrix::Zero(4, 4), CausalOrder::random(4, rng)), 0.0);
}

TEST(ScoreOfOrder, TwoNodes) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 1) = 3.0;
  EXPECT_EQ(score_of_order(D, CausalOrder::identity(2)), 3.0);
  EXPECT_EQ(score_of_order(D, CausalOrder::from_sequence({1, 0})), 0.0);
  EXPECT_THROW(score_of_order(D, CausalOrder::identity(3)), DimensionError);
}

TEST(ScoreOfOrder, BruteForceIsTheMaximum) {
  Rng rng(2);
  const Matrix D = random_d(rng, 6);
  const auto [best, value] = brute_force_best_order(D);
  EXPECT_DOUBLE_EQ(score_of_order(D, best), value);
  std::vector<int> seq(6);
  std::iota(seq.begin(), seq.end(), 0);
  double top = -1e300;
  do top = std::max(top, score_of_order(D, CausalOrder::from_sequence(seq)));
  while (std::next_permutation(seq.begin(), seq.end()));
  EXPECT_DOUBLE_EQ(value, top);
}

TEST(ScoreOfPotential, HandExample) {
  Matrix D = Matrix::Zero(3, 3);
  D(0, 2) = 4.0;
  Vector p(3);
  p << 3.0, 1.0, 2.0;
  EXPECT_EQ(score_of_potential_hard(D, Potential(p)), 4.0);
  Matrix step(3, 3);
  step << 0, 1, 1, 0, 0, 0, 0, 1, 0;
  EXPECT_EQ(step_of_differences(p), step);
  EXPECT_EQ(score_of_potential_hard(Matrix::Zero(3, 3), Potential(p)), 0.0);
}

TEST(ScoreOfPotential, TiesRejected) {
  Vector p(3);
  p << 1.0, 1.0, 2.0;
  EXPECT_THROW(score_of_potential_hard(Matrix::Zero(3, 3), Potential(p)), ParameterError);
  EXPECT_THROW(extract_order(Potential(p)), ParameterError);
}

TEST(ScoreOfPotential, AgreesWithOrderPath) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + t % 7;
    const Matrix D = random_d(rng, d);
    const Potential p = random_potential(rng, d);
    EXPECT_NEAR(score_of_potential_hard(D, p), score_of_order(D, extract_order(p)), 1e-12);
  }
}

TEST(ScoreOfPotential, ShiftInvariant) {
  Rng rng(4);
  const Matrix D = random_d(rng, 7);
  const Potential p = random_potential(rng, 7);
  for (double c : {-10.0, 0.5, 100.0})
    EXPECT_EQ(score_of_potential_hard(D, p), score_of_potential_hard(D, Potential(p.values.array() + c)));
}

TEST(ExtractOrder, Examples) {
  Vector p(3);
  p << 0.1, 0.9, 0.5;
  const auto o = extract_order(Potential(p));
  EXPECT_EQ(o.positions(), (std::vector<int>{2, 0, 1}));
  Vector dec(4);
  dec << 4.0, 3.0, -1.0, -2.0;
  EXPECT_EQ(extract_order(Potential(dec)), CausalOrder::identity(4));
  EXPECT_EQ(extract_order(potential_from_order(o)), o);
}

TEST(BruteForce, ChainReachability) {
  for (int d = 2; d <= 7; ++d) {
    BoolMatrix r = BoolMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) r(i, j) = 1;
    const auto D = reachability_distance_matrix(r, 0.5);
    const auto [best, value] = brute_force_best_order(D);
    EXPECT_EQ(best, CausalOrder::identity(d));
    EXPECT_DOUBLE_EQ(value, 0.5 * d * d * (d - 1) / 2.0);
  }
}

TEST(BruteForce, SymmetricMatrixScoresHalfTheSum) {
  Rng rng(5);
  Matrix D = random_d(rng, 5);
  D = (D + D.transpose()).eval();
  const double half = D.sum() / 2.0;
  std::vector<int> seq{0, 1, 2, 3, 4};
  do EXPECT_NEAR(score_of_order(D, CausalOrder::from_sequence(seq)), half, 1e-12);
  while (std::next_permutation(seq.begin(), seq.end()));
  EXPECT_NEAR(brute_force_best_order(D).second, half, 1e-12);
}

TEST(BruteForce, SingleNodeAndTooLarge) {
  const auto [o, s] = brute_force_best_order(Matrix::Zero(1, 1));
  EXPECT_EQ(s, 0.0);
  EXPECT_EQ(o.size(), 1);
  EXPECT_THROW(brute_force_best_order(Matrix::Zero(10, 10)), ParameterError);
}

TEST(SortRanking, Chain) {
  RawDistances raw{Matrix::Zero(3, 3), std::vector<bool>(3, true)};
  raw.values(0, 1) = raw.values(0, 2) = raw.values(1, 2) = 2.0;
  EXPECT_EQ(sortranking(raw, 0.3, 0.5), CausalOrder::identity(3));
}

TEST(SortRanking, AllZeroGivesIdentity) {
  RawDistances raw{Matrix::Zero(4, 4), std::vector<bool>(4, true)};
  // below-threshold entries are negative; make them all exactly eps so rows sum to 0
  raw.values.setConstant(0.3);
  EXPECT_EQ(sortranking(raw, 0.3, 0.5), CausalOrder::identity(4));
}

TEST(SortRanking, NeverBeatsTheScoreOptimumOnDTop) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Dag g = sample_er_dag(6, 0.4, static_cast<std::uint64_t>(t));
    const BoolMatrix reach = reachability(g);
    RawDistances raw{Matrix::Zero(6, 6), std::vector<bool>(6, true)};
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j) raw.values(i, j) = reach(i, j) ? rng.uniform(0.4, 2.0) : rng.uniform(0.0, 0.2);
    const auto D = threshold_matrix(raw, 0.3, 0.5);
    EXPECT_GE(d_top(g, sortranking(raw, 0.3, 0.5)), d_top(g, brute_force_best_order(D).first));
  }
}
