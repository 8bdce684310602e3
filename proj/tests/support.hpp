#pragma once

#include <cstdint>
#include <random>

#include "selboot/random.hpp"
#include "selboot/regress.hpp"

namespace selboot::testing {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = g(rng);
  return m;
}

inline Vector gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return v;
}

// Orthonormal columns from a QR of a Gaussian matrix.
inline Matrix orthonormal_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
}

// Two-column design with unit-norm columns and inner product rho, using n = 2.
inline Matrix correlated_pair(double rho) {
  Matrix x(2, 2);
  x << 1.0, rho, 0.0, std::sqrt(1.0 - rho * rho);
  return x;
}

}  // namespace selboot::testing
