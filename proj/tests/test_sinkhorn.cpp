#include "diffintersort/sinkhorn.hpp"

#include <gtest/gtest.h>

using namespace diffintersort;

namespace {

Matrix random_matrix(Rng& rng, int d, double lo = 0.0, double hi = 1.0) {
  Matrix m(d, d);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
  return v;
}

// Reference operator: plain log-domain row/column normalization.
Matrix naive_sinkhorn(const Matrix& m, double t, int T) {
  Matrix x = m / t;
  const auto lse = [](const Vector& v) {
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
  };
  for (int k = 0; k < T; ++k) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i).array() -= lse(x.row(i).transpose());
    for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j).array() -= lse(x.col(j));
  }
  return x.array().exp();
}

double soft_score(const Matrix& D, const Vector& p, const SinkhornConfig& cfg) {
  return (D.array() * mask_from_potential(Potential(p), cfg, MaskMode::Soft).mask.array()).sum();
}

}  // namespace

TEST(Sinkhorn, MatchesNaiveLogDomain) {
  Rng rng(1);
  for (int d : {1, 3, 8, 20}) {
    const Matrix m = random_matrix(rng, d, -2.0, 2.0);
    for (double t : {1.0, 0.3, 0.05}) {
      const SinkhornConfig cfg{t, 60};
      EXPECT_LT((sinkhorn_operator(m, cfg) - naive_sinkhorn(m, t, 60)).cwiseAbs().maxCoeff(), 1e-10) << d << " " << t;
    }
  }
}

TEST(Sinkhorn, SingleEntry) {
  EXPECT_NEAR(sinkhorn_operator(Matrix::Constant(1, 1, 7.0), {}).value(), 1.0, 1e-15);
}

TEST(Sinkhorn, ScaledPermutation) {
  const HardPermutation sigma{{3, 0, 4, 1, 2}};
  const Matrix out = sinkhorn_operator(100.0 * sigma.to_matrix(), {0.05, 500});
  EXPECT_LT((out - sigma.to_matrix()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Sinkhorn, DoublyStochastic) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const SinkhornTape tape(random_matrix(rng, 40), {0.05, 500});
    EXPECT_LT(tape.marginal_error(), 1e-6);
    EXPECT_GE(tape.soft().minCoeff(), 0.0);
  }
}

TEST(Sinkhorn, LargeLogitsStayFinite) {
  Rng rng(3);
  const Vector p = random_vector(rng, 200, 10.0);
  const Matrix m = p * sorting_weights(200).transpose();
  const SinkhornTape tape(m, {0.05, 500});
  EXPECT_TRUE(tape.soft().allFinite());
  EXPECT_GT(tape.absorptions(), 1);
}

TEST(Sinkhorn, LogOutputIsOffsetInput) {
  Rng rng(13);
  const Matrix m = random_matrix(rng, 12, -3.0, 3.0);
  const SinkhornTape tape(m, {0.05, 500});
  EXPECT_LT((tape.log_soft().array().exp().matrix() - tape.soft()).cwiseAbs().maxCoeff(), 1e-12);
  // X_T - M/t = -r 1^T - 1 c^T: all 2x2 "interaction" contrasts vanish
  const Matrix off = tape.log_soft() - m / 0.05;
  double worst = 0.0;
  for (int i = 1; i < 12; ++i)
    for (int j = 1; j < 12; ++j) worst = std::max(worst, std::abs(off(i, j) - off(i, 0) - off(0, j) + off(0, 0)));
  EXPECT_LT(worst, 1e-9);
  EXPECT_EQ(hungarian(tape.log_soft()).col_of_row, hungarian(m).col_of_row);
}

TEST(Sinkhorn, Errors) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sinkhorn_operator(m, {}), NumericalError);
  EXPECT_THROW(sinkhorn_operator(Matrix::Zero(2, 3), {}), DimensionError);
  EXPECT_THROW(sinkhorn_operator(Matrix::Zero(2, 2), {0.0, 10}), ParameterError);
  EXPECT_THROW(sinkhorn_operator(Matrix::Zero(2, 2), {0.1, 0}), ParameterError);
}

TEST(SinkhornBackward, MatchesFiniteDifferences) {
  Rng rng(4);
  for (double t : {1.0, 0.2}) {
    const Matrix m = random_matrix(rng, 6, -1.0, 1.0);
    const Matrix weight = random_matrix(rng, 6, -1.0, 1.0);
    const SinkhornConfig cfg{t, 40};
    const auto f = [&](const Vector& x) {
      return (weight.array() * sinkhorn_operator(Eigen::Map<const Matrix>(x.data(), 6, 6), cfg).array()).sum();
    };
    const Matrix g = SinkhornTape(m, cfg).backward(weight);
    const Vector x = Eigen::Map<const Vector>(m.data(), m.size());
    EXPECT_LT(grad_check(f, Eigen::Map<const Vector>(g.data(), g.size()), x, 1e-6), 1e-5) << t;
  }
}

TEST(SinkhornBackward, TruncatedUnroll) {
  Rng rng(5);
  const Matrix m = random_matrix(rng, 8, -1.0, 1.0);
  const Matrix w = random_matrix(rng, 8);
  // grad_iterations >= iterations is the full unroll
  EXPECT_EQ(SinkhornTape(m, {0.05, 200, 0}).backward(w), SinkhornTape(m, {0.05, 200, 200}).backward(w));
  // at a temperature where the iterations converge quickly, early steps barely matter
  const Matrix full = SinkhornTape(m, {1.0, 500, 0}).backward(w);
  const Matrix cut = SinkhornTape(m, {1.0, 500, 100}).backward(w);
  EXPECT_LT((full - cut).norm(), 1e-8 * std::max(1.0, full.norm()));
}

TEST(Mask, HandExample) {
  Vector p(3);
  p << 3.0, 1.0, 2.0;
  Matrix expected(3, 3);
  expected << 0, 1, 1, 0, 0, 0, 0, 1, 0;
  EXPECT_EQ(hard_mask_from_potential(Potential(p), {}).mask, expected);
}

TEST(Mask, DecreasingPotentialGivesUpperTriangle) {
  Vector p = Vector::LinSpaced(6, 5.0, 0.0);
  const Matrix upper = Matrix::Ones(6, 6).triangularView<Eigen::StrictlyUpper>();
  EXPECT_EQ(hard_mask_from_potential(Potential(p), {}).mask, upper);
}

TEST(Mask, EqualsStepOfDifferences) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Potential p(random_vector(rng, 50));
    EXPECT_EQ(hard_mask_from_potential(p, {}).mask, step_of_differences(p.values));
  }
}

TEST(Mask, TiesRejected) {
  EXPECT_THROW(hard_mask_from_potential(Potential(Vector::Zero(3)), {}), ParameterError);
}

TEST(Mask, ShiftDoesNotChangeMaskOrGradient) {
  Rng rng(7);
  const Vector p = random_vector(rng, 10);
  const Matrix g = random_matrix(rng, 10);
  for (auto mode : {MaskMode::StraightThrough, MaskMode::Soft}) {
    const auto a = mask_from_potential(Potential(p), {0.05, 200}, mode);
    const auto b = mask_from_potential(Potential(p.array() + 3.0), {0.05, 200}, mode);
    EXPECT_LT((a.mask - b.mask).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.backward(g) - b.backward(g)).norm(), 1e-9 * std::max(1.0, a.backward(g).norm()));
  }
}

TEST(Mask, TemperatureMonotonicity) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector p = random_vector(rng, 10);
    const Matrix m = p * sorting_weights(10).transpose();
    const Matrix hard = hungarian(m).to_matrix();
    double previous = std::numeric_limits<double>::infinity();
    for (double t : {1.0, 0.2, 0.05}) {
      const double dist = (sinkhorn_operator(m, {t, 500}) - hard).norm();
      EXPECT_LT(dist, previous) << t;
      previous = dist;
    }
  }
}

TEST(Mask, SoftScoreGradient) {
  Rng rng(9);
  const SinkhornConfig cfg{0.05, 50};
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix D = random_matrix(rng, 10, -1.0, 3.0);
    const Vector p = random_vector(rng, 10, 0.1);
    const Vector g = mask_from_potential(Potential(p), cfg, MaskMode::Soft).backward(D);
    EXPECT_LT(grad_check([&](const Vector& x) { return soft_score(D, x, cfg); }, g, p, 1e-6), 1e-4);
  }
}

TEST(Mask, StraightThroughRoutesThroughTheHardPermutation) {
  Rng rng(10);
  const SinkhornConfig cfg{0.05, 300};
  const int d = 7;
  const Vector p = random_vector(rng, d, 0.3);
  const Matrix G = random_matrix(rng, d, -1.0, 1.0);
  const auto st = mask_from_potential(Potential(p), cfg, MaskMode::StraightThrough);
  // d(H L H^T)/dH contracted with G, evaluated at H and handed to the Sinkhorn tape
  const Matrix H = st.hard.to_matrix();
  const Matrix L = Matrix::Ones(d, d).triangularView<Eigen::StrictlyUpper>();
  const Matrix dH = G * H * L.transpose() + G.transpose() * H * L;
  const Vector raw = st.tape.backward(dH) * sorting_weights(d);
  const Vector expected = raw.array() - raw.mean();
  EXPECT_LT((st.backward(G) - expected).norm(), 1e-12 * std::max(1.0, expected.norm()));
}

TEST(Mask, StraightThroughAndSoftGradientsPointTheSameWay) {
  // The two gradients differ (H versus S in the routing), but both are
  // ascent directions of the same relaxed objective.
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const Vector p = random_vector(rng, 8, 0.1);
    const Matrix G = random_matrix(rng, 8);
    const Vector a = mask_from_potential(Potential(p), {0.05, 500}, MaskMode::StraightThrough).backward(G);
    const Vector b = mask_from_potential(Potential(p), {0.05, 500}, MaskMode::Soft).backward(G);
    EXPECT_GT(a.dot(b), 0.0);
  }
}

TEST(GradCheck, LinearFunction) {
  Rng rng(11);
  const Vector a = random_vector(rng, 25), x = random_vector(rng, 25);
  EXPECT_LT(grad_check([&](const Vector& v) { return a.dot(v); }, a, x, 1e-3), 1e-9);
  EXPECT_LT(grad_check_norm([&](const Vector& v) { return a.dot(v); }, a, x, 1e-3), 1e-9);
  EXPECT_GT(grad_check([&](const Vector& v) { return a.dot(v); }, Vector(2.0 * a), x), 0.4);
}

TEST(GradCheck, StepBounds) {
  const auto f = [](const Vector& v) { return v.sum(); };
  EXPECT_THROW(grad_check(f, Vector::Ones(2), Vector::Zero(2), 1e-8), ParameterError);
  EXPECT_THROW(grad_check(f, Vector::Ones(2), Vector::Zero(2), 1e-2), ParameterError);
}

TEST(MaskMode, Parse) {
  EXPECT_EQ(parse_mask_mode("hard"), MaskMode::StraightThrough);
  EXPECT_EQ(parse_mask_mode(to_string(MaskMode::Soft)), MaskMode::Soft);
  EXPECT_THROW(parse_mask_mode("gumbel"), ParameterError);
}
