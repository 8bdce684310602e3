#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"

namespace selboot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Orientation of a selected coefficient. A variable selected with sign `plus`
// is tested against H0: beta_j <= eta, `minus` against H0: beta_j >= eta.
enum class Sign : int { minus = -1, plus = 1 };

constexpr double to_double(Sign s) noexcept { return static_cast<double>(static_cast<int>(s)); }
constexpr const char* to_string(Sign s) noexcept { return s == Sign::plus ? "+" : "-"; }

struct Dataset {
  Matrix X;
  Vector y;
  std::optional<double> sigma;  // known error standard deviation
  bool standardized = false;

  std::size_t n() const noexcept { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(X.cols()); }
};

inline constexpr double rank_tolerance = 1e-10;
inline constexpr double leverage_limit = 1.0 - 1e-12;

// Shape and flag checks. Rank is checked separately by fit_full_model since it
// needs a decomposition.
inline void validate(const Dataset& data) {
  require(data.X.cols() >= 1, "dataset needs at least one predictor");
  require(data.X.rows() == data.y.size(), "X and y disagree on the number of rows");
  require(data.n() > data.p(), "dataset needs n > p");
  require(data.X.allFinite() && data.y.allFinite(), "dataset contains non-finite values");
  if (data.sigma) require(*data.sigma > 0.0 && std::isfinite(*data.sigma), "known sigma must be positive");
  if (data.standardized) {
    const double n = static_cast<double>(data.n());
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
      const double mean = data.X.col(j).mean();
      const double var = (data.X.col(j).array() - mean).square().sum() / (n - 1.0);
      require(std::abs(mean) <= 1e-8 && std::abs(var - 1.0) <= 1e-8,
              "column " + std::to_string(j) + " is flagged standardized but is not");
    }
  }
}

// Centers and scales every column of X to sample mean 0 and sample variance 1
// (n - 1 denominator) and centers y. The response keeps its scale so that the
// penalty level stays in the units of y.
inline Dataset standardize(Dataset data) {
  const double n = static_cast<double>(data.X.rows());
  require(n >= 2, "standardize needs at least two rows");
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
    auto col = data.X.col(j);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
    if (!(sd > 0.0)) throw Error(ErrorKind::rank_deficient, "column " + std::to_string(j) + " is constant");
    col /= sd;
  }
  data.y.array() -= data.y.mean();
  data.standardized = true;
  return data;
}

struct FullModelFit {
  Vector beta_ls;             // least-squares coefficients, equal to A y
  Vector fitted;              // X beta_ls
  Vector residuals;           // y - X beta_ls
  Vector leverages;           // diagonal of the hat matrix
  Vector adjusted_residuals;  // residuals / sqrt(1 - h_ii)
  Matrix contrast_rows;       // A = (X'X)^{-1} X', p x n
  Vector contrast_norms;      // ||a_j||_2
  double sigma_hat = 0.0;
  bool sigma_known = false;
  bool degenerate_noise = false;  // residuals vanish and sigma was not supplied
  std::size_t residual_dof = 0;   // n - p

  std::size_t n() const noexcept { return static_cast<std::size_t>(residuals.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(beta_ls.size()); }

  // Standard error of beta_ls[j] on the sigma_hat scale.
  double standard_error(std::size_t j) const { return sigma_hat * contrast_norms[static_cast<Eigen::Index>(j)]; }
};

inline FullModelFit fit_full_model(const Dataset& data) {
  validate(data);
  const Eigen::Index n = data.X.rows();
  const Eigen::Index p = data.X.cols();

  Eigen::HouseholderQR<Matrix> qr(data.X);
  const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Vector sv = Eigen::JacobiSVD<Matrix>(r).singularValues();
  if (!(sv.minCoeff() > rank_tolerance * sv.maxCoeff()))
    throw Error(ErrorKind::rank_deficient, "smallest singular value of X is below the rank tolerance");

  const Matrix q = qr.householderQ() * Matrix::Identity(n, p);

  FullModelFit fit;
  // A = R^{-1} Q'
  fit.contrast_rows = r.triangularView<Eigen::Upper>().solve(q.transpose());
  fit.contrast_norms = fit.contrast_rows.rowwise().norm();
  fit.beta_ls = fit.contrast_rows * data.y;
  fit.fitted = q * (q.transpose() * data.y);
  fit.residuals = data.y - fit.fitted;
  fit.leverages = q.rowwise().squaredNorm();
  if (fit.leverages.maxCoeff() >= leverage_limit)
    throw Error(ErrorKind::leverage_one, "an observation has leverage numerically equal to one");
  fit.adjusted_residuals = fit.residuals.array() / (1.0 - fit.leverages.array()).sqrt();
  fit.residual_dof = static_cast<std::size_t>(n - p);

  if (data.sigma) {
    fit.sigma_hat = *data.sigma;
    fit.sigma_known = true;
  } else {
    fit.sigma_hat = std::sqrt(fit.residuals.squaredNorm() / static_cast<double>(n - p));
  }
  // Exact fits leave rounding noise in the residuals; compare against the
  // scale of y rather than against zero.
  const double scale = std::max(1.0, data.y.norm());
  if (fit.residuals.norm() <= 1e-12 * scale) {
    fit.residuals.setZero();
    fit.adjusted_residuals.setZero();
    if (!fit.sigma_known) {
      fit.sigma_hat = 0.0;
      fit.degenerate_noise = true;
    }
  }
  return fit;
}

// Signed distance of the observation from the boundary of H0 in units of
// `sigma`: s (a_j'y - eta) / (sigma ||a_j||). Positive values point away from
// the null region for the given orientation.
inline double signed_distance_z(const FullModelFit& fit, std::size_t j, double eta, double sigma,
                                Sign orientation = Sign::plus) {
  require(j < fit.p(), "variable index out of range");
  require(sigma > 0.0, "signed_distance_z needs sigma > 0");
  const auto jj = static_cast<Eigen::Index>(j);
  return to_double(orientation) * (fit.beta_ls[jj] - eta) / (sigma * fit.contrast_norms[jj]);
}

}  // namespace selboot
