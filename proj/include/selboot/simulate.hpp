#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "infer.hpp"
#include "msboot.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "regress.hpp"
#include "select.hpp"

namespace selboot {

// Monte Carlo study of selective tests: X with i.i.d. N(0,1) entries drawn
// afresh per dataset, y = X beta + eps with eps ~ N(0, noise_sd^2 I).
struct ExperimentConfig {
  std::size_t n = 50;
  std::size_t p = 25;
  Vector beta;
  SelectorSpec selector;
  std::size_t datasets = 300;
  ScaleSchedule schedule;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  SignCondition condition = SignCondition::match_observed;
  bool studentize = false;  // estimate sigma instead of using noise_sd as known
  double noise_sd = 1.0;
  InferenceOptions inference;
  BootstrapOptions bootstrap;
  std::size_t threads = 0;  // dataset-level workers; 0 selects default_thread_count()
};

inline void validate(const ExperimentConfig& config) {
  require(config.n > config.p && config.p >= 1, "experiment needs n > p >= 1");
  require(static_cast<std::size_t>(config.beta.size()) == config.p, "beta must have p entries");
  require(config.datasets >= 1, "experiment needs at least one dataset");
  require(config.alpha > 0.0 && config.alpha < 1.0, "alpha must lie in (0, 1)");
  require(config.noise_sd > 0.0, "noise_sd must be positive");
  validate(config.selector);
  validate(config.schedule);
}

// Per-variable counts: N_j selections, R_j rejections per test, and how often
// the selective interval covered the true coefficient.
struct VariableTally {
  std::size_t selected = 0;
  std::size_t naive_rejections = 0;
  std::size_t selective_rejections = 0;
  std::size_t covered = 0;
  std::size_t inference_failures = 0;

  VariableTally& operator+=(const VariableTally& o) noexcept {
    selected += o.selected;
    naive_rejections += o.naive_rejections;
    selective_rejections += o.selective_rejections;
    covered += o.covered;
    inference_failures += o.inference_failures;
    return *this;
  }
};

struct ExperimentTally {
  std::size_t completed = 0;  // datasets [0, completed) are included
  std::size_t dataset_failures = 0;
  std::vector<VariableTally> variables;
};

inline Dataset simulate_dataset(const ExperimentConfig& config, std::size_t index) {
  Xoshiro256 rng(substream_seed(config.seed, stream::dataset, index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto p = static_cast<Eigen::Index>(config.p);
  Dataset data;
  data.X.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) data.X(i, j) = gauss(rng);
  data.y = data.X * config.beta;
  for (Eigen::Index i = 0; i < n; ++i) data.y[i] += config.noise_sd * gauss(rng);
  if (!config.studentize) data.sigma = config.noise_sd;
  return data;
}

// Runs one dataset and returns its contribution to the tally, with
// dataset_failures set to one when the observed-data analysis failed.
inline ExperimentTally run_dataset(const ExperimentConfig& config, std::size_t index, std::size_t boot_threads) {
  ExperimentTally out;
  out.variables.resize(config.p);
  out.completed = 1;
  try {
    const Dataset data = simulate_dataset(config, index);
    const FullModelFit fit = fit_full_model(data);
    const SelectionOutcome observed = run_selector(data, config.selector);
    if (observed.selected.empty()) return out;
    std::vector<SelectionEvent> events;
    for (const std::size_t j : observed.selected) events.push_back(event_for(observed, j, config.condition));
    BootstrapOptions boot = config.bootstrap;
    boot.threads = boot_threads;
    auto curves = bootstrap_curves(data, fit, config.selector, events, config.schedule,
                                   substream_seed(config.seed, stream::dataset_bootstrap, index), boot);
    for (std::size_t e = 0; e < events.size(); ++e) {
      const std::size_t j = events[e].variable;
      VariableTally& t = out.variables[j];
      t.selected = 1;
      try {
        const SelectiveResult r = infer_variable(fit, events[e], std::move(curves[e]), config.alpha, 0.0,
                                                 config.inference);
        t.naive_rejections = r.p_naive < config.alpha;
        t.selective_rejections = r.p_SI.value < config.alpha;
        t.covered = r.ci.contains(config.beta[static_cast<Eigen::Index>(j)]);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::no_converged_fit) throw;
        t.inference_failures = 1;
      }
    }
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::invalid_argument) throw;
    out = ExperimentTally{};
    out.variables.resize(config.p);
    out.completed = 1;
    out.dataset_failures = 1;
  }
  return out;
}

// Continues `tally` until every dataset is done. Datasets run in blocks of
// `flush_every`; `on_block` sees the tally after each block, which is what
// makes a run resumable from a flushed tally.
inline ExperimentTally run_experiment(const ExperimentConfig& config, ExperimentTally tally = {},
                                      const std::function<void(const ExperimentTally&)>& on_block = {},
                                      std::size_t flush_every = 50) {
  validate(config);
  if (tally.variables.empty()) tally.variables.resize(config.p);
  require(tally.variables.size() == config.p, "resumed tally does not match p");
  require(tally.completed <= config.datasets, "resumed tally has more datasets than configured");
  const std::size_t threads = config.threads ? config.threads : default_thread_count();
  // Parallelism lives at the dataset level; each bootstrap runs on its worker.
  constexpr std::size_t boot_threads = 1;
  flush_every = std::max<std::size_t>(1, flush_every);
  while (tally.completed < config.datasets) {
    const std::size_t first = tally.completed;
    const std::size_t count = std::min(flush_every, config.datasets - first);
    std::vector<ExperimentTally> parts(count);
    parallel_for(count, threads, [&](std::size_t k, std::size_t) { parts[k] = run_dataset(config, first + k, boot_threads); });
    for (const auto& part : parts) {
      tally.completed += part.completed;
      tally.dataset_failures += part.dataset_failures;
      for (std::size_t j = 0; j < config.p; ++j) tally.variables[j] += part.variables[j];
    }
    if (on_block) on_block(tally);
  }
  return tally;
}

// Rate with a two-binomial-standard-deviation band, as plotted per variable.
struct RateBand {
  double rate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline RateBand rate_band(std::size_t hits, std::size_t trials) {
  if (trials == 0) return {};
  const double r = static_cast<double>(hits) / static_cast<double>(trials);
  const double sd = std::sqrt(r * (1.0 - r) / static_cast<double>(trials));
  return {r, std::max(0.0, r - 2.0 * sd), std::min(1.0, r + 2.0 * sd)};
}

}  // namespace selboot
