#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "regress.hpp"

namespace selboot {

enum class SelectorFamily { lasso, mcp, custom };

constexpr const char* to_string(SelectorFamily f) noexcept {
  switch (f) {
    case SelectorFamily::lasso: return "lasso";
    case SelectorFamily::mcp: return "mcp";
    case SelectorFamily::custom: return "custom";
  }
  return "unknown";
}

struct SelectionOutcome {
  std::vector<std::size_t> selected;  // ascending, zero-based
  Vector beta_hat;
  std::vector<Sign> signs;  // parallel to `selected`
  std::size_t sweeps = 0;
  double last_change = 0.0;

  bool contains(std::size_t j) const noexcept {
    return j < static_cast<std::size_t>(beta_hat.size()) && beta_hat[static_cast<Eigen::Index>(j)] != 0.0;
  }
  std::optional<Sign> sign_of(std::size_t j) const noexcept {
    if (!contains(j)) return std::nullopt;
    return beta_hat[static_cast<Eigen::Index>(j)] > 0.0 ? Sign::plus : Sign::minus;
  }
};

// Builds an outcome whose selected set is exactly the nonzero coordinates.
inline SelectionOutcome make_outcome(Vector beta) {
  SelectionOutcome out;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) {
      out.selected.push_back(static_cast<std::size_t>(j));
      out.signs.push_back(beta[j] > 0.0 ? Sign::plus : Sign::minus);
    }
  }
  out.beta_hat = std::move(beta);
  return out;
}

// Custom selectors must be deterministic pure functions of (X, y).
using CustomSelector = std::function<SelectionOutcome(const Matrix& X, const Vector& y)>;

struct SelectorSpec {
  SelectorFamily family = SelectorFamily::lasso;
  double lambda = 1.0;
  double gamma_mcp = 3.0;
  std::size_t max_iter = 100000;
  double tol = 1e-8;
  CustomSelector custom;
};

inline void validate(const SelectorSpec& spec) {
  require(spec.max_iter > 0, "max_iter must be positive");
  require(spec.tol > 0.0, "tol must be positive");
  if (spec.family == SelectorFamily::custom) {
    require(static_cast<bool>(spec.custom), "custom selector family needs a callable");
    return;
  }
  require(spec.lambda > 0.0 && std::isfinite(spec.lambda), "lambda must be positive");
  if (spec.family == SelectorFamily::mcp) require(spec.gamma_mcp > 1.0, "MCP needs gamma > 1");
}

// Selects every variable with a data-independent positive sign. Conditioning
// on its output is conditioning on a certain event.
inline SelectorSpec select_everything() {
  SelectorSpec spec;
  spec.family = SelectorFamily::custom;
  spec.custom = [](const Matrix& X, const Vector&) { return make_outcome(Vector::Ones(X.cols())); };
  return spec;
}

// One-dimensional minimizers of a b^2 / 2 - z b + penalty(b).
inline double soft_threshold(double z, double lambda) noexcept {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

inline double lasso_coordinate(double z, double a, double lambda) noexcept {
  return soft_threshold(z, lambda) / a;
}

// Requires a * gamma > 1 so the subproblem is convex.
inline double mcp_coordinate(double z, double a, double lambda, double gamma) noexcept {
  const double az = std::abs(z);
  if (az <= lambda) return 0.0;
  if (az <= a * gamma * lambda) return std::copysign((az - lambda) / (a - 1.0 / gamma), z);
  return z / a;
}

inline double mcp_penalty(double t, double lambda, double gamma) noexcept {
  const double at = std::abs(t);
  if (at <= gamma * lambda) return lambda * at - at * at / (2.0 * gamma);
  return 0.5 * gamma * lambda * lambda;
}

namespace detail {

// Cyclic coordinate descent on 0.5 b'Gb - c'b + sum penalty(b_j), started at
// zero. `grad` tracks c - G b so untouched zero coordinates cost O(1).
template <class Update>
SelectionOutcome coordinate_descent(const Matrix& gram, const Vector& xty, const SelectorSpec& spec,
                                    Update&& update) {
  const Eigen::Index p = gram.cols();
  Vector beta = Vector::Zero(p);
  Vector grad = xty;
  double change = 0.0;
  std::size_t sweep = 0;
  while (sweep < spec.max_iter) {
    ++sweep;
    change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a = gram(j, j);
      const double old = beta[j];
      const double fresh = update(grad[j] + a * old, a);
      const double delta = fresh - old;
      if (delta != 0.0) {
        beta[j] = fresh;
        grad.noalias() -= delta * gram.col(j);
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < spec.tol) {
      SelectionOutcome out = make_outcome(std::move(beta));
      out.sweeps = sweep;
      out.last_change = change;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "coordinate descent stopped after " << sweep << " sweeps with sup-norm change " << change;
  throw Error(ErrorKind::not_converged, msg.str());
}

}  // namespace detail

// A selector bound to a fixed design. The Gram matrix is computed once, so the
// same object can be reused across bootstrap replicates; it is immutable and
// safe to share between threads.
class Selector {
 public:
  Selector(Matrix X, SelectorSpec spec) : x_(std::move(X)), spec_(std::move(spec)) {
    validate(spec_);
    if (spec_.family == SelectorFamily::custom) return;
    gram_ = x_.transpose() * x_;
    require(gram_.diagonal().minCoeff() > 0.0, "design has a zero column");
    if (spec_.family == SelectorFamily::mcp)
      require(gram_.diagonal().minCoeff() * spec_.gamma_mcp > 1.0,
              "MCP coordinate subproblems are nonconvex: need min ||x_j||^2 * gamma > 1");
  }

  const SelectorSpec& spec() const noexcept { return spec_; }
  const Matrix& design() const noexcept { return x_; }

  SelectionOutcome operator()(const Vector& y) const {
    if (spec_.family == SelectorFamily::custom) return spec_.custom(x_, y);
    const Vector xty = x_.transpose() * y;
    return solve(y, xty);
  }

  // `xty` must equal X'y; callers that already have it skip one product.
  SelectionOutcome solve(const Vector& y, const Vector& xty) const {
    switch (spec_.family) {
      case SelectorFamily::lasso: {
        const double lambda = spec_.lambda;
        return detail::coordinate_descent(gram_, xty, spec_,
                                          [lambda](double z, double a) { return lasso_coordinate(z, a, lambda); });
      }
      case SelectorFamily::mcp: {
        const double lambda = spec_.lambda;
        const double gamma = spec_.gamma_mcp;
        return detail::coordinate_descent(
            gram_, xty, spec_, [lambda, gamma](double z, double a) { return mcp_coordinate(z, a, lambda, gamma); });
      }
      case SelectorFamily::custom:
        return spec_.custom(x_, y);
    }
    throw Error(ErrorKind::invalid_argument, "unknown selector family");
  }

 private:
  Matrix x_;
  Matrix gram_;
  SelectorSpec spec_;
};

inline SelectionOutcome select_lasso(const Dataset& data, const SelectorSpec& spec) {
  require(spec.family == SelectorFamily::lasso, "select_lasso needs family lasso");
  return Selector(data.X, spec)(data.y);
}

inline SelectionOutcome select_mcp(const Dataset& data, const SelectorSpec& spec) {
  require(spec.family == SelectorFamily::mcp, "select_mcp needs family mcp");
  return Selector(data.X, spec)(data.y);
}

inline SelectionOutcome run_selector(const Dataset& data, const SelectorSpec& spec) {
  switch (spec.family) {
    case SelectorFamily::lasso: return select_lasso(data, spec);
    case SelectorFamily::mcp: return select_mcp(data, spec);
    case SelectorFamily::custom: return Selector(data.X, spec)(data.y);
  }
  throw Error(ErrorKind::invalid_argument, "unknown selector family");
}

// Penalized objectives, used by tests and diagnostics.
inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  return 0.5 * (y - X * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

inline double mcp_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda, double gamma) {
  double penalty = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) penalty += mcp_penalty(beta[j], lambda, gamma);
  return 0.5 * (y - X * beta).squaredNorm() + penalty;
}

}  // namespace selboot
