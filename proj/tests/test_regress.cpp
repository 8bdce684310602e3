#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "selboot/regress.hpp"
#include "support.hpp"

using namespace selboot;
using selboot::testing::gaussian_matrix;
using selboot::testing::gaussian_vector;

namespace {

// Modified Gram-Schmidt, written independently of the library's Householder path.
struct GramSchmidt {
  Matrix q;
  Matrix r;
};

GramSchmidt gram_schmidt(const Matrix& x) {
  const Eigen::Index p = x.cols();
  GramSchmidt out{x, Matrix::Zero(p, p)};
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      out.r(k, j) = out.q.col(k).dot(out.q.col(j));
      out.q.col(j) -= out.r(k, j) * out.q.col(k);
    }
    out.r(j, j) = out.q.col(j).norm();
    out.q.col(j) /= out.r(j, j);
  }
  return out;
}

Dataset random_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.X = gaussian_matrix(n, p, rng);
  d.y = gaussian_vector(n, rng);
  return d;
}

void expect_fit_invariants(const Dataset& d, const FullModelFit& fit) {
  const auto p = d.X.cols();
  EXPECT_LT((fit.contrast_rows * d.X - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(fit.leverages.sum(), static_cast<double>(p), 1e-8);
  EXPECT_GE(fit.leverages.minCoeff(), 0.0);
  EXPECT_LT(fit.leverages.maxCoeff(), 1.0);
  const double scale = d.X.norm() * std::max(1.0, d.y.norm());
  EXPECT_LT((d.X.transpose() * fit.residuals).cwiseAbs().maxCoeff(), 1e-8 * scale);
  EXPECT_LT((fit.beta_ls - fit.contrast_rows * d.y).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace

TEST(FitFullModel, BalancedSingleColumnLeverage) {
  Dataset d;
  d.X = Matrix::Constant(4, 1, 0.5);
  d.y = Vector(4);
  d.y << 1.0, -2.0, 0.5, 3.0;
  const auto fit = fit_full_model(d);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(fit.leverages[i], 0.25, 1e-15);
    EXPECT_NEAR(fit.adjusted_residuals[i], fit.residuals[i] / std::sqrt(0.75), 1e-14);
  }
  EXPECT_NEAR(fit.sigma_hat, std::sqrt(fit.residuals.squaredNorm() / 3.0), 1e-15);
}

TEST(FitFullModel, ExactFitFlagsDegenerateNoise) {
  std::mt19937_64 rng(3);
  Dataset d;
  d.X = gaussian_matrix(8, 3, rng);
  d.y = d.X * Vector::LinSpaced(3, 1.0, 3.0);
  const auto fit = fit_full_model(d);
  EXPECT_TRUE(fit.degenerate_noise);
  EXPECT_EQ(fit.sigma_hat, 0.0);
  EXPECT_EQ(fit.residuals.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fit.adjusted_residuals.cwiseAbs().maxCoeff(), 0.0);

  d.sigma = 2.0;
  const auto known = fit_full_model(d);
  EXPECT_FALSE(known.degenerate_noise);
  EXPECT_EQ(known.sigma_hat, 2.0);
}

TEST(FitFullModel, AgreesWithGramSchmidtOracle) {
  const Dataset d = random_dataset(10, 3, 11);
  const auto fit = fit_full_model(d);
  expect_fit_invariants(d, fit);

  const auto gs = gram_schmidt(d.X);
  const Matrix a = gs.r.triangularView<Eigen::Upper>().solve(gs.q.transpose());
  EXPECT_LT((fit.contrast_rows - a).cwiseAbs().maxCoeff(), 1e-10);
  const Vector h = gs.q.rowwise().squaredNorm();
  EXPECT_LT((fit.leverages - h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(h.sum(), 3.0, 1e-12);
  EXPECT_LT((fit.beta_ls - a * d.y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitFullModel, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 1 + rng() % 25;
    const std::size_t n = p + 2 + rng() % 30;
    const Dataset d = random_dataset(n, p, rng());
    expect_fit_invariants(d, fit_full_model(d));
  }
}

TEST(FitFullModel, RankDeficientDesign) {
  Dataset d = random_dataset(10, 3, 2);
  d.X.col(2) = 2.0 * d.X.col(0) - d.X.col(1);
  try {
    fit_full_model(d);
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank_deficient);
  }
}

TEST(FitFullModel, LeverageOne) {
  Dataset d;
  d.X = Matrix(3, 2);
  d.X << 1, 0, 0, 1, 0, 1;
  d.y = Vector::Ones(3);
  try {
    fit_full_model(d);
    FAIL() << "expected LeverageOne";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::leverage_one);
  }
}

TEST(FitFullModel, RejectsInvalidData) {
  Dataset d = random_dataset(3, 3, 1);
  EXPECT_THROW(fit_full_model(d), Error);
  d = random_dataset(5, 2, 1);
  d.y[0] = std::nan("");
  EXPECT_THROW(fit_full_model(d), Error);
  d = random_dataset(5, 2, 1);
  d.sigma = -1.0;
  EXPECT_THROW(fit_full_model(d), Error);
  d = random_dataset(5, 2, 1);
  d.standardized = true;
  EXPECT_THROW(fit_full_model(d), Error);
}

TEST(FitFullModel, AdjustedResidualVarianceMatchesSigma) {
  std::mt19937_64 rng(20);
  const std::size_t n = 20;
  const Matrix x = gaussian_matrix(n, 3, rng);
  const Vector beta = Vector::LinSpaced(3, -1.0, 1.0);
  const int reps = 10000;
  Vector sum = Vector::Zero(n);
  Vector sum_sq = Vector::Zero(n);
  for (int r = 0; r < reps; ++r) {
    Dataset d;
    d.X = x;
    d.y = x * beta + gaussian_vector(n, rng);
    const Vector e = fit_full_model(d).adjusted_residuals;
    sum += e;
    sum_sq += e.cwiseAbs2();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / reps;
    const double var = (sum_sq[i] - reps * mean * mean) / (reps - 1);
    EXPECT_NEAR(var, 1.0, 0.05) << "observation " << i;
  }
}

TEST(Standardize, CentersAndScalesColumnsAndCentersResponse) {
  Dataset d = random_dataset(30, 4, 8);
  d.X.array() += 3.0;
  d.y.array() = 2.0 * d.y.array() + 5.0;
  const double y_sd = std::sqrt((d.y.array() - d.y.mean()).square().sum() / 29.0);
  const Dataset s = standardize(d);
  EXPECT_TRUE(s.standardized);
  EXPECT_NO_THROW(validate(s));
  EXPECT_NEAR(s.y.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(s.y.squaredNorm() / 29.0), y_sd, 1e-12);

  d.X.col(1).setConstant(4.0);
  try {
    standardize(d);
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank_deficient);
  }
}

TEST(SignedDistance, BoundaryPointIsZero) {
  const Dataset d = random_dataset(12, 3, 4);
  const auto fit = fit_full_model(d);
  for (std::size_t j = 0; j < 3; ++j)
    for (Sign s : {Sign::plus, Sign::minus})
      for (double sigma : {0.3, 1.0, 7.0}) EXPECT_EQ(signed_distance_z(fit, j, fit.beta_ls[j], sigma, s), 0.0);
}

TEST(SignedDistance, DoublingSigmaHalvesZ) {
  const Dataset d = random_dataset(12, 3, 4);
  const auto fit = fit_full_model(d);
  for (std::size_t j = 0; j < 3; ++j)
    EXPECT_NEAR(signed_distance_z(fit, j, 0.0, 2.0), 0.5 * signed_distance_z(fit, j, 0.0, 1.0), 1e-14);
}

TEST(SignedDistance, ReplicatedIdentityDesign) {
  Dataset d;
  d.X = Matrix(4, 2);
  d.X << 1, 0, 0, 1, 1, 0, 0, 1;
  d.y = Vector(4);
  d.y << 1.5, 0.3, 1.5, 0.3;
  d.sigma = 1.0;
  const auto fit = fit_full_model(d);
  // a_1 = (1/2, 0, 1/2, 0): a_1'y = 1.5 and ||a_1|| = 1/sqrt(2).
  EXPECT_NEAR(signed_distance_z(fit, 0, 0.0, 1.0), 1.5 * std::sqrt(2.0), 1e-14);
}

TEST(SignedDistance, AffineAndMonotoneInEta) {
  const Dataset d = random_dataset(15, 4, 9);
  const auto fit = fit_full_model(d);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = u(rng);
    const double b = a + 0.1 + std::abs(u(rng));
    const std::size_t j = rng() % 4;
    EXPECT_GT(signed_distance_z(fit, j, a, 1.0, Sign::plus), signed_distance_z(fit, j, b, 1.0, Sign::plus));
    EXPECT_LT(signed_distance_z(fit, j, a, 1.0, Sign::minus), signed_distance_z(fit, j, b, 1.0, Sign::minus));
    const double mid = signed_distance_z(fit, j, 0.5 * (a + b), 1.0);
    EXPECT_NEAR(mid, 0.5 * (signed_distance_z(fit, j, a, 1.0) + signed_distance_z(fit, j, b, 1.0)), 1e-12);
  }
}
