#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "msboot.hpp"
#include "normal.hpp"
#include "regress.hpp"
#include "scalefit.hpp"
#include "select.hpp"

namespace selboot {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// H0: beta_j <= eta (`le`) or H0: beta_j >= eta (`ge`).
enum class Side { le, ge };

constexpr Side side_for(Sign observed) noexcept { return observed == Sign::plus ? Side::le : Side::ge; }

// One-sided full-model test. Normal reference with known sigma, Student t on
// n - p degrees of freedom otherwise.
inline double p_value_naive(const FullModelFit& fit, std::size_t j, double eta, Side side) {
  require(j < fit.p(), "variable index out of range");
  const double se = fit.standard_error(j);
  require(se > 0.0, "naive test needs a positive standard error");
  double stat = (fit.beta_ls[static_cast<Eigen::Index>(j)] - eta) / se;
  if (side == Side::ge) stat = -stat;
  if (fit.sigma_known) return normal::upper_tail(stat);
  return normal::student_upper_tail(stat, static_cast<double>(fit.residual_dof));
}

struct SelectivePValue {
  double value = 1.0;
  bool clipped = false;    // the raw ratio exceeded 1 (or underflowed to 0)
  bool log_space = false;  // computed as exp(log Q(z_H) - log Q(z_H + z_S))
};

// Q(z_H) / Q(z_H + z_S) clipped into (0, 1], with Q the upper normal tail.
// z_S = -inf stands for a certain selection event, +inf for an impossible one.
inline SelectivePValue p_value_selective_detail(double z_H, double z_S) {
  require(!std::isnan(z_H) && std::isfinite(z_H), "z_H must be finite");
  require(!std::isnan(z_S), "z_S must not be NaN");
  SelectivePValue out;
  if (z_S == -infinity) {
    out.value = normal::upper_tail(z_H);
  } else if (z_S == infinity) {
    out.value = 1.0;
    out.clipped = true;
    return out;
  } else {
    const double num = normal::upper_tail(z_H);
    const double den = normal::upper_tail(z_H + z_S);
    if (den < 1e-300 || num < 1e-300) {
      out.log_space = true;
      const double log_ratio = normal::log_upper_tail(z_H) - normal::log_upper_tail(z_H + z_S);
      out.value = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      out.clipped = log_ratio > 0.0;
    } else {
      const double ratio = num / den;
      out.clipped = ratio > 1.0;
      out.value = std::min(1.0, ratio);
    }
  }
  if (!(out.value > 0.0)) {
    out.value = std::numeric_limits<double>::min();
    out.clipped = true;
  }
  return out;
}

inline double p_value_selective(double z_H, double z_S) { return p_value_selective_detail(z_H, z_S).value; }

inline double p_value_selective_log(double z_H, double z_S) {
  const double log_ratio = normal::log_upper_tail(z_H) - normal::log_upper_tail(z_H + z_S);
  return std::min(1.0, std::exp(log_ratio));
}

// The hypothesis region for a single coefficient is a half-space, so its
// normalized bootstrap z-value is the constant z_H at every scale.
inline FittedScalingModel flat_hypothesis_model(double z_H) {
  FittedScalingModel model;
  model.family = ScalingModelFamily::poly(1);
  model.beta = Vector::Constant(1, z_H);
  model.cov = Matrix::Zero(1, 1);
  model.aic = 2.0;
  model.converged = true;
  return model;
}

// Extrapolates both models by truncated Taylor expansion: z_H,k at -1 around
// sigma_m1_sq and z_S,k at 0 around sigma_0_sq.
inline double p_value_selective_taylor(const FittedScalingModel& model_h, const FittedScalingModel& model_s, int k,
                                       double sigma_m1_sq, double sigma_0_sq) {
  const double z_h = taylor_extrapolate(model_h, k, sigma_m1_sq, -1.0);
  const double z_s = taylor_extrapolate(model_s, k, sigma_0_sq, 0.0);
  return p_value_selective(z_h, z_s);
}

struct InferenceOptions {
  std::vector<ScalingModelFamily> candidates = default_families();
  int taylor_k = 3;
  double sigma_0_sq = 1.0;   // expansion point for z_S
  double sigma_m1_sq = 1.0;  // expansion point for z_H
};

enum class SelectionZStatus { fitted, certain, impossible };

constexpr const char* to_string(SelectionZStatus s) noexcept {
  switch (s) {
    case SelectionZStatus::fitted: return "fitted";
    case SelectionZStatus::certain: return "certain";
    case SelectionZStatus::impossible: return "impossible";
  }
  return "unknown";
}

struct SelectionZ {
  double value = 0.0;
  SelectionZStatus status = SelectionZStatus::fitted;
  std::optional<FittedScalingModel> model;
};

// z_S = phi_S(0) from the minimum-AIC scaling model. A curve that sits at the
// upper clip bound at every scale is a certain event (z_S = -inf); one that
// never hits is impossible (z_S = +inf).
inline SelectionZ selection_z(const MultiscaleCurve& curve, const InferenceOptions& options = {}) {
  SelectionZ out;
  bool all_upper = true;
  bool all_lower = true;
  bool any = false;
  for (const auto& pt : curve.points) {
    if (pt.aborted) continue;
    any = true;
    all_upper = all_upper && pt.hits == pt.replicates;
    all_lower = all_lower && pt.hits == 0;
  }
  if (!any) throw Error(ErrorKind::no_converged_fit, "every bootstrap scale was aborted");
  if (all_upper) {
    out.value = -infinity;
    out.status = SelectionZStatus::certain;
    return out;
  }
  if (all_lower) {
    out.value = infinity;
    out.status = SelectionZStatus::impossible;
    return out;
  }
  out.model = select_model(curve, options.candidates);
  out.value = taylor_extrapolate(*out.model, options.taylor_k, options.sigma_0_sq, 0.0);
  return out;
}

struct Interval {
  double lower = -infinity;
  double upper = infinity;
  bool bounded = true;

  double width() const noexcept { return upper - lower; }
  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

// Non-selective interval beta_ls +- q * se, with q from the normal
// distribution or, when `student` is set, from t on n - p degrees of freedom.
inline Interval classical_interval(const FullModelFit& fit, std::size_t j, double alpha, bool student) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  const double q = student ? normal::student_upper_tail_inv(alpha / 2.0, static_cast<double>(fit.residual_dof))
                           : normal::upper_tail_inv(alpha / 2.0);
  const double centre = fit.beta_ls[static_cast<Eigen::Index>(j)];
  const double half = q * fit.standard_error(j);
  return Interval{centre - half, centre + half, true};
}

inline constexpr double bisection_tolerance = 1e-8;
inline constexpr int max_bracket_doublings = 10;

namespace detail {

// Root in eta of p_SI(eta) = target by bisection. The bracket starts at
// beta_ls +- 10 se and doubles its half-width until p - target changes sign.
template <class PValue>
double invert_p_value(PValue&& p_of_eta, double centre, double se, double target) {
  double half = 10.0 * se;
  double lo = centre - half;
  double hi = centre + half;
  double f_lo = p_of_eta(lo) - target;
  double f_hi = p_of_eta(hi) - target;
  int doublings = 0;
  while (!((f_lo <= 0.0 && f_hi >= 0.0) || (f_lo >= 0.0 && f_hi <= 0.0))) {
    if (doublings == max_bracket_doublings)
      throw Error(ErrorKind::bracket_failure, "no sign change of p_SI - " + std::to_string(target) +
                                                  " within " + std::to_string(max_bracket_doublings) + " doublings");
    ++doublings;
    half *= 2.0;
    lo = centre - half;
    hi = centre + half;
    f_lo = p_of_eta(lo) - target;
    f_hi = p_of_eta(hi) - target;
  }
  for (int it = 0; it < 500 && hi - lo > bisection_tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = p_of_eta(mid) - target;
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Equal-tailed selective interval: the eta values where p_SI equals alpha/2
// and 1 - alpha/2, with z_S held fixed since the selection event does not
// depend on eta. Throws BracketFailure when p_SI never crosses a target,
// which happens whenever z_S >= 0 (the ratio is then clipped to 1).
inline Interval selective_interval(const FullModelFit& fit, std::size_t j, Sign orientation, double z_S,
                                   double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(fit.sigma_hat > 0.0, "selective interval needs a positive noise scale");
  const double centre = fit.beta_ls[static_cast<Eigen::Index>(j)];
  const double se = fit.standard_error(j);
  auto p_of_eta = [&](double eta) {
    return p_value_selective(signed_distance_z(fit, j, eta, fit.sigma_hat, orientation), z_S);
  };
  const double a = detail::invert_p_value(p_of_eta, centre, se, alpha / 2.0);
  const double b = detail::invert_p_value(p_of_eta, centre, se, 1.0 - alpha / 2.0);
  return Interval{std::min(a, b), std::max(a, b), true};
}

struct SelectiveResult {
  std::size_t variable = 0;
  SelectionEvent event;
  double beta_ls = 0.0;
  double standard_error = 0.0;
  double z_H = 0.0;
  SelectionZ z_S;
  double p_naive = 1.0;
  double p_AU = 1.0;
  SelectivePValue p_SI;
  Interval ci;
  MultiscaleCurve curve;
  std::vector<std::string> warnings;
};

// Tests H0: beta_j <= eta (or >= eta for a negative observed sign) given the
// bootstrap curve of the variable's selection event.
inline SelectiveResult infer_variable(const FullModelFit& fit, const SelectionEvent& event, MultiscaleCurve curve,
                                      double alpha, double eta = 0.0, const InferenceOptions& options = {}) {
  const std::size_t j = event.variable;
  require(fit.sigma_hat > 0.0, "selective inference needs a positive noise scale (supply sigma)");
  SelectiveResult out;
  out.variable = j;
  out.event = event;
  out.beta_ls = fit.beta_ls[static_cast<Eigen::Index>(j)];
  out.standard_error = fit.standard_error(j);
  out.z_H = signed_distance_z(fit, j, eta, fit.sigma_hat, event.observed_sign);
  out.z_S = selection_z(curve, options);
  out.p_naive = p_value_naive(fit, j, eta, side_for(event.observed_sign));
  out.p_AU = normal::upper_tail(out.z_H);
  out.p_SI = p_value_selective_detail(out.z_H, out.z_S.value);
  if (out.p_SI.clipped) out.warnings.emplace_back("p_SI clipped to (0, 1]");
  try {
    out.ci = selective_interval(fit, j, event.observed_sign, out.z_S.value, alpha);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::bracket_failure) throw;
    out.ci = Interval{-infinity, infinity, false};
    out.warnings.emplace_back(err.what());
  }
  for (const auto& w : curve.warnings) out.warnings.push_back(w);
  out.curve = std::move(curve);
  return out;
}

// Selective interval computed from scratch: one bootstrap curve, then the
// two test inversions.
inline Interval selective_ci(const Dataset& data, const FullModelFit& fit, const SelectorSpec& spec,
                             const SelectionEvent& event, const ScaleSchedule& schedule, std::uint64_t seed,
                             double alpha, const BootstrapOptions& boot = {}, const InferenceOptions& options = {}) {
  const MultiscaleCurve curve = bootstrap_curve(data, fit, spec, event, schedule, seed, boot);
  const SelectionZ z_s = selection_z(curve, options);
  return selective_interval(fit, event.variable, event.observed_sign, z_s.value, alpha);
}

}  // namespace selboot
