#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "regress.hpp"
#include "select.hpp"

namespace selboot {

// Squared bootstrap scales gamma^2 and the replicate count used at each.
struct ScaleSchedule {
  std::vector<double> scales;
  std::size_t replicates = 10000;
};

inline void validate(const ScaleSchedule& schedule) {
  require(schedule.replicates >= 1, "schedule needs at least one replicate per scale");
  require(schedule.scales.size() >= 3, "schedule needs at least three scales");
  for (std::size_t i = 0; i < schedule.scales.size(); ++i) {
    require(schedule.scales[i] > 0.0 && std::isfinite(schedule.scales[i]), "scales must be positive");
    if (i > 0) require(schedule.scales[i] > schedule.scales[i - 1], "scales must be distinct and ascending");
  }
}

// gamma^2 = n / n' for resample sizes n' running from ceil(n/2) to ceil(3n/2).
// The 13 ratios n'/n are geometric on each side of 1 (six steps from 1/2 to 1,
// six from 1 to 3/2), so n' = n and gamma^2 = 1 always appear.
inline ScaleSchedule default_schedule(std::size_t n, std::size_t replicates = 10000) {
  require(n >= 2, "default_schedule needs n >= 2");
  std::vector<std::size_t> sizes;
  for (int k = -6; k <= 6; ++k) {
    const double ratio = k <= 0 ? std::pow(2.0, k / 6.0) : std::pow(1.5, k / 6.0);
    sizes.push_back(static_cast<std::size_t>(std::ceil(static_cast<double>(n) * ratio - 1e-9)));
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  ScaleSchedule schedule;
  schedule.replicates = replicates;
  for (auto it = sizes.rbegin(); it != sizes.rend(); ++it)
    schedule.scales.push_back(static_cast<double>(n) / static_cast<double>(*it));
  return schedule;
}

enum class SignCondition { match_observed, membership_only };

constexpr const char* to_string(SignCondition c) noexcept {
  return c == SignCondition::match_observed ? "match" : "membership";
}

// {j in M*} or {j in M*, sign*_j = observed sign}.
struct SelectionEvent {
  std::size_t variable = 0;
  SignCondition condition = SignCondition::match_observed;
  Sign observed_sign = Sign::plus;

  bool occurs(const SelectionOutcome& outcome) const noexcept {
    const auto sign = outcome.sign_of(variable);
    if (!sign) return false;
    return condition == SignCondition::membership_only || *sign == observed_sign;
  }
};

// Event for a variable selected on the observed data, oriented by its observed sign.
inline SelectionEvent event_for(const SelectionOutcome& observed, std::size_t j,
                                SignCondition condition = SignCondition::match_observed) {
  const auto sign = observed.sign_of(j);
  require(sign.has_value(), "inference is only defined for selected variables");
  return SelectionEvent{j, condition, *sign};
}

struct ScalePoint {
  double gamma_sq = 1.0;
  std::size_t replicates = 0;
  std::size_t hits = 0;
  double alpha_hat = 0.5;  // after clipping into [1/(2B), 1 - 1/(2B)]
  double psi_hat = 0.0;    // gamma * upper_tail_inv(alpha_hat)
  double se_psi = 0.0;
  std::size_t failures = 0;  // replicates whose selector run did not converge
  bool aborted = false;      // failures exceeded the tolerated fraction

  bool clipped() const noexcept { return hits == 0 || hits == replicates; }
};

// Fills alpha_hat, psi_hat and se_psi from hits / replicates.
inline ScalePoint make_scale_point(double gamma_sq, std::size_t replicates, std::size_t hits) {
  require(gamma_sq > 0.0, "scale must be positive");
  require(replicates > 0 && hits <= replicates, "hit count must lie in [0, B]");
  ScalePoint pt;
  pt.gamma_sq = gamma_sq;
  pt.replicates = replicates;
  pt.hits = hits;
  const double b = static_cast<double>(replicates);
  const double floor = 1.0 / (2.0 * b);
  pt.alpha_hat = std::clamp(static_cast<double>(hits) / b, floor, 1.0 - floor);
  const double gamma = std::sqrt(gamma_sq);
  const double z = normal::upper_tail_inv(pt.alpha_hat);
  pt.psi_hat = gamma * z;
  pt.se_psi = gamma * std::sqrt(pt.alpha_hat * (1.0 - pt.alpha_hat) / b) / normal::density(z);
  return pt;
}

struct MultiscaleCurve {
  std::vector<ScalePoint> points;
  std::vector<std::string> warnings;

  bool all_at_upper() const noexcept {
    return !points.empty() && std::all_of(points.begin(), points.end(),
                                          [](const ScalePoint& p) { return p.hits == p.replicates; });
  }
  bool all_at_lower() const noexcept {
    return !points.empty() && std::all_of(points.begin(), points.end(), [](const ScalePoint& p) { return p.hits == 0; });
  }
  // Every scale sits on a clip bound, so the curve carries no shape information.
  bool all_or_nothing() const noexcept {
    return !points.empty() && std::all_of(points.begin(), points.end(), [](const ScalePoint& p) { return p.clipped(); });
  }
  std::size_t total_failures() const noexcept {
    std::size_t total = 0;
    for (const auto& p : points) total += p.failures;
    return total;
  }
};

enum class NoiseModel { residual, gaussian };

struct BootstrapOptions {
  NoiseModel noise = NoiseModel::residual;
  bool recenter = false;  // subtract the mean of the adjusted residuals before resampling
  double max_failure_fraction = 0.01;
  std::size_t threads = 0;  // 0 selects default_thread_count()
  std::uint64_t domain = stream::bootstrap;
};

namespace detail {

// Draws y* = X beta_ls + gamma e* for every (scale, replicate) pair and hands
// it to `evaluate(y_star, hit_flags)`, which sets one flag per event and
// returns false when the replicate failed. Each pair owns its RNG substream,
// so the tallies are identical for any thread count.
template <class Evaluate>
std::vector<MultiscaleCurve> run_multiscale(const FullModelFit& fit, std::size_t event_count,
                                            const ScaleSchedule& schedule, std::uint64_t seed,
                                            const BootstrapOptions& options, Evaluate&& evaluate) {
  validate(schedule);
  const Eigen::Index n = static_cast<Eigen::Index>(fit.n());
  Vector pool = fit.adjusted_residuals;
  if (options.noise == NoiseModel::residual) {
    if (pool.cwiseAbs().maxCoeff() == 0.0)
      throw Error(ErrorKind::degenerate_noise, "all adjusted residuals are zero; nothing to resample");
    if (options.recenter) pool.array() -= pool.mean();
  } else if (!(fit.sigma_hat > 0.0)) {
    throw Error(ErrorKind::degenerate_noise, "gaussian bootstrap needs a positive noise scale");
  }

  const std::size_t scale_count = schedule.scales.size();
  const std::size_t b = schedule.replicates;
  constexpr std::size_t chunk = 32;
  const std::size_t chunks_per_scale = (b + chunk - 1) / chunk;
  const std::size_t tasks = scale_count * chunks_per_scale;
  const std::size_t threads = options.threads ? options.threads : default_thread_count();
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, tasks));

  // worker -> scale -> event
  std::vector<std::vector<std::size_t>> hits(workers, std::vector<std::size_t>(scale_count * event_count, 0));
  std::vector<std::vector<std::size_t>> failures(workers, std::vector<std::size_t>(scale_count, 0));

  parallel_for(tasks, workers, [&](std::size_t task, std::size_t worker) {
    const std::size_t s = task / chunks_per_scale;
    const std::size_t first = (task % chunks_per_scale) * chunk;
    const std::size_t last = std::min(b, first + chunk);
    const double gamma = std::sqrt(schedule.scales[s]);
    Vector y_star(n);
    std::vector<unsigned char> flags(event_count);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t r = first; r < last; ++r) {
      Xoshiro256 rng(substream_seed(seed, options.domain, s, r));
      pick.reset();
      gauss.reset();
      if (options.noise == NoiseModel::residual) {
        for (Eigen::Index i = 0; i < n; ++i) y_star[i] = fit.fitted[i] + gamma * pool[pick(rng)];
      } else {
        const double scale = gamma * fit.sigma_hat;
        for (Eigen::Index i = 0; i < n; ++i) y_star[i] = fit.fitted[i] + scale * gauss(rng);
      }
      std::fill(flags.begin(), flags.end(), 0);
      if (!evaluate(y_star, std::span<unsigned char>(flags))) {
        ++failures[worker][s];
        continue;
      }
      for (std::size_t e = 0; e < event_count; ++e) hits[worker][s * event_count + e] += flags[e];
    }
  });

  std::vector<MultiscaleCurve> curves(event_count);
  for (std::size_t s = 0; s < scale_count; ++s) {
    std::size_t failed = 0;
    for (std::size_t w = 0; w < workers; ++w) failed += failures[w][s];
    const bool aborted = static_cast<double>(failed) > options.max_failure_fraction * static_cast<double>(b);
    for (std::size_t e = 0; e < event_count; ++e) {
      std::size_t total = 0;
      for (std::size_t w = 0; w < workers; ++w) total += hits[w][s * event_count + e];
      ScalePoint pt = make_scale_point(schedule.scales[s], b, total);
      pt.failures = failed;
      pt.aborted = aborted;
      curves[e].points.push_back(pt);
      if (aborted)
        curves[e].warnings.push_back("scale " + std::to_string(schedule.scales[s]) + " aborted after " +
                                     std::to_string(failed) + " selector failures");
    }
  }
  for (auto& curve : curves)
    if (curve.all_or_nothing()) curve.warnings.emplace_back("AllOrNothing: every scale hit a clip bound");
  return curves;
}

}  // namespace detail

// Multiscale residual bootstrap for several selection events at once. All
// events are tallied on the same replicates, so per-event curves are exactly
// what separate calls with the same seed would produce.
inline std::vector<MultiscaleCurve> bootstrap_curves(const Dataset& data, const FullModelFit& fit,
                                                     const SelectorSpec& spec, std::span<const SelectionEvent> events,
                                                     const ScaleSchedule& schedule, std::uint64_t seed,
                                                     const BootstrapOptions& options = {}) {
  require(!events.empty(), "bootstrap_curves needs at least one event");
  for (const auto& e : events) require(e.variable < data.p(), "event variable out of range");
  const Selector selector(data.X, spec);
  const bool custom = spec.family == SelectorFamily::custom;
  return detail::run_multiscale(fit, events.size(), schedule, seed, options,
                                [&](const Vector& y_star, std::span<unsigned char> flags) {
                                  SelectionOutcome outcome;
                                  try {
                                    outcome = custom ? selector(y_star)
                                                     : selector.solve(y_star, selector.design().transpose() * y_star);
                                  } catch (const Error& err) {
                                    if (err.kind() != ErrorKind::not_converged) throw;
                                    return false;
                                  }
                                  for (std::size_t e = 0; e < events.size(); ++e) flags[e] = events[e].occurs(outcome);
                                  return true;
                                });
}

inline MultiscaleCurve bootstrap_curve(const Dataset& data, const FullModelFit& fit, const SelectorSpec& spec,
                                       const SelectionEvent& event, const ScaleSchedule& schedule,
                                       std::uint64_t seed, const BootstrapOptions& options = {}) {
  return bootstrap_curves(data, fit, spec, std::span<const SelectionEvent>(&event, 1), schedule, seed, options)
      .front();
}

// Bootstrap probability curve of an arbitrary region of response space,
// bypassing any selector. `in_region(y_star)` decides membership.
template <class Region>
MultiscaleCurve bootstrap_region_curve(const FullModelFit& fit, Region&& in_region, const ScaleSchedule& schedule,
                                       std::uint64_t seed, const BootstrapOptions& options = {}) {
  return detail::run_multiscale(fit, 1, schedule, seed, options,
                                [&](const Vector& y_star, std::span<unsigned char> flags) {
                                  flags[0] = in_region(y_star) ? 1 : 0;
                                  return true;
                                })
      .front();
}

}  // namespace selboot
