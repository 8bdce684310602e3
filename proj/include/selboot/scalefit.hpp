#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "msboot.hpp"

namespace selboot {

// Models for the normalized bootstrap z-value as a function of s = gamma^2:
//   poly_k : sum_{i<k} beta_i s^i
//   sing   : beta_0 + beta_1 sqrt(s)   (cone-shaped regions)
struct ScalingModelFamily {
  enum class Kind { poly, sing };
  Kind kind = Kind::poly;
  int order = 2;  // number of polynomial coefficients; ignored for sing

  static constexpr ScalingModelFamily poly(int k) { return {Kind::poly, k}; }
  static constexpr ScalingModelFamily sing() { return {Kind::sing, 2}; }

  int arity() const noexcept { return kind == Kind::poly ? order : 2; }
  std::string name() const { return kind == Kind::poly ? "poly" + std::to_string(order) : "sing"; }

  friend bool operator==(const ScalingModelFamily&, const ScalingModelFamily&) = default;
};

inline std::vector<ScalingModelFamily> default_families() {
  return {ScalingModelFamily::poly(1), ScalingModelFamily::poly(2), ScalingModelFamily::poly(3),
          ScalingModelFamily::sing()};
}

// j-th derivative of the model with respect to s, evaluated at s.
inline double model_derivative(const ScalingModelFamily& family, const Vector& beta, int j, double s) {
  require(j >= 0, "derivative order must be nonnegative");
  if (family.kind == ScalingModelFamily::Kind::poly) {
    double total = 0.0;
    for (int i = j; i < family.order; ++i) {
      double falling = 1.0;  // i! / (i - j)!
      for (int m = 0; m < j; ++m) falling *= static_cast<double>(i - m);
      total += beta[i] * falling * std::pow(s, i - j);
    }
    return total;
  }
  if (j > 0 && !(s > 0.0)) throw Error(ErrorKind::nonsmooth_at_expansion, "sing model is not differentiable at s <= 0");
  if (!(s >= 0.0)) throw Error(ErrorKind::nonsmooth_at_expansion, "sing model is undefined at s < 0");
  // d^j/ds^j s^{1/2} = (1/2)(1/2 - 1)...(1/2 - j + 1) s^{1/2 - j}
  double coeff = 1.0;
  for (int m = 0; m < j; ++m) coeff *= 0.5 - static_cast<double>(m);
  const double value = beta[1] * coeff * std::pow(s, 0.5 - j);
  return j == 0 ? beta[0] + value : value;
}

inline double model_value(const ScalingModelFamily& family, const Vector& beta, double s) {
  return model_derivative(family, beta, 0, s);
}

struct FittedScalingModel {
  ScalingModelFamily family;
  Vector beta;
  Matrix cov;
  double aic = std::numeric_limits<double>::infinity();
  double rss = 0.0;  // weighted residual sum of squares
  int dof = 0;       // scales used minus arity
  bool converged = false;
  std::size_t points_used = 0;

  double operator()(double s) const { return model_value(family, beta, s); }
};

// Scale points entering a fit. Aborted scales are dropped. Points sitting on
// a clip bound are biased toward zero, so they are dropped too whenever at
// least two unclipped points remain.
inline std::vector<ScalePoint> fit_points(const MultiscaleCurve& curve) {
  std::vector<ScalePoint> usable;
  for (const auto& pt : curve.points)
    if (!pt.aborted) usable.push_back(pt);
  std::vector<ScalePoint> interior;
  for (const auto& pt : usable)
    if (!pt.clipped()) interior.push_back(pt);
  return interior.size() >= 2 ? interior : usable;
}

// Weighted least squares of psi_hat on the family's regressors with weights
// 1 / se_psi^2. Every shipped family is linear in beta.
inline FittedScalingModel fit_scaling_model(std::span<const ScalePoint> points, const ScalingModelFamily& family) {
  const int arity = family.arity();
  require(arity >= 1, "model needs at least one parameter");
  if (static_cast<int>(points.size()) < arity)
    throw Error(ErrorKind::underdetermined_fit, family.name() + " needs " + std::to_string(arity) + " scales, got " +
                                                    std::to_string(points.size()));
  const auto m = static_cast<Eigen::Index>(points.size());
  Matrix design(m, arity);
  Vector response(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pt = points[static_cast<std::size_t>(i)];
    require(pt.se_psi > 0.0 && std::isfinite(pt.se_psi), "scale point needs a positive standard error");
    const double w = 1.0 / pt.se_psi;
    if (family.kind == ScalingModelFamily::Kind::poly) {
      for (int c = 0; c < arity; ++c) design(i, c) = w * std::pow(pt.gamma_sq, c);
    } else {
      design(i, 0) = w;
      design(i, 1) = w * std::sqrt(pt.gamma_sq);
    }
    response[i] = w * pt.psi_hat;
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < arity) throw Error(ErrorKind::singular_fit, family.name() + " design is rank-deficient");

  FittedScalingModel out;
  out.family = family;
  out.beta = qr.solve(response);
  out.rss = (design * out.beta - response).squaredNorm();
  const Matrix normal = design.transpose() * design;
  out.cov = normal.ldlt().solve(Matrix::Identity(arity, arity));
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.aic = out.rss + 2.0 * arity;
  out.dof = static_cast<int>(m) - arity;
  out.points_used = static_cast<std::size_t>(m);
  out.converged = out.beta.allFinite() && std::isfinite(out.aic);
  return out;
}

inline FittedScalingModel fit_scaling_model(const MultiscaleCurve& curve, const ScalingModelFamily& family) {
  const auto points = fit_points(curve);
  return fit_scaling_model(std::span<const ScalePoint>(points), family);
}

// Minimum-AIC fit over the candidates with positive residual degrees of
// freedom; ties go to the smaller model.
inline FittedScalingModel select_model(std::span<const ScalePoint> points,
                                       std::span<const ScalingModelFamily> candidates) {
  require(!candidates.empty(), "select_model needs at least one candidate family");
  std::optional<FittedScalingModel> best;
  std::string reasons;
  for (const auto& family : candidates) {
    try {
      FittedScalingModel fit = fit_scaling_model(points, family);
      if (!fit.converged || fit.dof <= 0) {
        reasons += " " + family.name() + ": no residual degrees of freedom;";
        continue;
      }
      const bool better = !best || fit.aic < best->aic ||
                          (fit.aic == best->aic && fit.family.arity() < best->family.arity());
      if (better) best = std::move(fit);
    } catch (const Error& err) {
      reasons += " " + family.name() + ": " + err.what() + ";";
    }
  }
  if (!best) throw Error(ErrorKind::no_converged_fit, "no candidate scaling model could be fitted:" + reasons);
  return *best;
}

inline FittedScalingModel select_model(const MultiscaleCurve& curve, std::span<const ScalingModelFamily> candidates) {
  const auto points = fit_points(curve);
  return select_model(std::span<const ScalePoint>(points), candidates);
}

// Truncated Taylor expansion of the fitted model around s0, evaluated at
// `target` (which may be negative):
//   sum_{j<k} (target - s0)^j / j! * d^j phi / ds^j (s0).
inline double taylor_extrapolate(const FittedScalingModel& model, int k, double s0, double target) {
  require(k >= 1, "taylor_extrapolate needs k >= 1");
  require(model.converged, "taylor_extrapolate needs a converged model");
  if (model.family.kind == ScalingModelFamily::Kind::sing && !(s0 > 0.0))
    throw Error(ErrorKind::nonsmooth_at_expansion, "sing model needs an expansion point s0 > 0");
  const double delta = target - s0;
  double total = 0.0;
  double factor = 1.0;  // delta^j / j!
  for (int j = 0; j < k; ++j) {
    if (j > 0) factor *= delta / static_cast<double>(j);
    total += factor * model_derivative(model.family, model.beta, j, s0);
  }
  return total;
}

}  // namespace selboot
