#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csv.hpp"
#include "error.hpp"
#include "infer.hpp"
#include "msboot.hpp"
#include "regress.hpp"
#include "scalefit.hpp"
#include "select.hpp"
#include "simulate.hpp"

// Command implementations behind the selboot executable. Each command takes a
// validated config, writes its report files, prints a table to `out` and
// returns the process exit code.
namespace selboot::cli {

using json = nlohmann::ordered_json;

struct AnalysisConfig {
  std::string input;
  std::string response;
  SelectorSpec selector;
  SignCondition condition = SignCondition::match_observed;
  std::vector<double> scales;  // empty selects default_schedule(n)
  std::size_t replicates = 10000;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::optional<double> sigma;
  bool standardize = false;
  std::string output;
  std::string csv_output;  // ci only; defaults to the JSON path with a .csv extension
};

inline void validate(const AnalysisConfig& config) {
  require(!config.input.empty(), "--input is required");
  require(!config.response.empty(), "--response is required");
  require(!config.output.empty(), "--out is required");
  require(config.replicates >= 100, "--b must be at least 100");
  require(config.alpha > 0.0 && config.alpha < 0.5, "--alpha must lie in (0, 0.5)");
  if (config.sigma) require(*config.sigma > 0.0, "--sigma must be positive");
  validate(config.selector);
}

// Always finite or null: JSON has no infinities.
inline json number(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

inline std::string format_endpoint(double value) {
  if (value == infinity) return "inf";
  if (value == -infinity) return "-inf";
  return csv::format_number(value);
}

inline void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

inline std::string sibling_csv(const std::string& json_path) {
  std::filesystem::path p(json_path);
  p.replace_extension(".csv");
  return p.string();
}

inline json selector_json(const SelectorSpec& spec) {
  json j;
  j["family"] = to_string(spec.family);
  j["lambda"] = spec.lambda;
  if (spec.family == SelectorFamily::mcp) j["gamma"] = spec.gamma_mcp;
  j["tol"] = spec.tol;
  j["max_iter"] = spec.max_iter;
  return j;
}

inline json curve_json(const MultiscaleCurve& curve) {
  json points = json::array();
  for (const auto& pt : curve.points) {
    points.push_back({{"gamma_sq", pt.gamma_sq},
                      {"replicates", pt.replicates},
                      {"hits", pt.hits},
                      {"alpha_hat", pt.alpha_hat},
                      {"psi_hat", pt.psi_hat},
                      {"se_psi", pt.se_psi},
                      {"failures", pt.failures},
                      {"aborted", pt.aborted}});
  }
  return points;
}

inline json model_json(const std::optional<FittedScalingModel>& model) {
  if (!model) return nullptr;
  json cov = json::array();
  for (Eigen::Index r = 0; r < model->cov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model->cov.cols(); ++c) row.push_back(model->cov(r, c));
    cov.push_back(row);
  }
  json beta = json::array();
  for (Eigen::Index i = 0; i < model->beta.size(); ++i) beta.push_back(model->beta[i]);
  return {{"family", model->family.name()}, {"beta", beta},         {"cov", cov},
          {"aic", model->aic},              {"rss", model->rss},    {"dof", model->dof},
          {"points_used", model->points_used}};
}

inline json interval_json(const Interval& ci) {
  return {{"lower", number(ci.lower)}, {"upper", number(ci.upper)}, {"bounded", ci.bounded}};
}

// Everything cmd_analyze and cmd_ci share: data, full-model fit, observed
// selection and one bootstrap curve per selected variable.
struct Analysis {
  std::vector<std::string> predictors;
  Dataset data;
  FullModelFit fit;
  SelectionOutcome observed;
  NoiseModel noise = NoiseModel::residual;
  ScaleSchedule schedule;
  std::vector<SelectiveResult> results;
  struct Failure {
    std::size_t variable;
    std::string error;
    MultiscaleCurve curve;
  };
  std::vector<Failure> failures;
};

inline Dataset load_dataset(const AnalysisConfig& config, std::vector<std::string>& predictors) {
  const csv::Table table = csv::read_file(config.input);
  const std::size_t response = table.index_of(config.response);
  require(table.columns.size() >= 2, "input needs at least one predictor column besides the response");
  Dataset data;
  const auto rows = table.values.rows();
  data.X.resize(rows, static_cast<Eigen::Index>(table.columns.size() - 1));
  Eigen::Index col = 0;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c == response) continue;
    predictors.push_back(table.columns[c]);
    data.X.col(col++) = table.values.col(static_cast<Eigen::Index>(c));
  }
  data.y = table.values.col(static_cast<Eigen::Index>(response));
  data.sigma = config.sigma;
  if (config.standardize) data = standardize(std::move(data));
  return data;
}

inline Analysis run_analysis(const AnalysisConfig& config) {
  validate(config);
  Analysis a;
  a.data = load_dataset(config, a.predictors);
  a.fit = fit_full_model(a.data);
  if (a.fit.degenerate_noise)
    throw Error(ErrorKind::degenerate_noise, "y lies in the column space of X; supply --sigma");
  // With zero residuals there is nothing to resample, so a supplied sigma
  // switches to the parametric bootstrap around X beta_ls.
  if (a.fit.adjusted_residuals.cwiseAbs().maxCoeff() == 0.0) a.noise = NoiseModel::gaussian;

  a.observed = run_selector(a.data, config.selector);
  if (config.scales.empty()) {
    a.schedule = default_schedule(a.data.n(), config.replicates);
  } else {
    a.schedule.scales = config.scales;
    std::sort(a.schedule.scales.begin(), a.schedule.scales.end());
    a.schedule.replicates = config.replicates;
  }
  validate(a.schedule);
  if (a.observed.selected.empty()) return a;

  std::vector<SelectionEvent> events;
  for (const std::size_t j : a.observed.selected) events.push_back(event_for(a.observed, j, config.condition));
  BootstrapOptions boot;
  boot.noise = a.noise;
  auto curves = bootstrap_curves(a.data, a.fit, config.selector, events, a.schedule, config.seed, boot);
  for (std::size_t e = 0; e < events.size(); ++e) {
    try {
      a.results.push_back(infer_variable(a.fit, events[e], curves[e], config.alpha));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::no_converged_fit) throw;
      a.failures.push_back({events[e].variable, err.what(), curves[e]});
    }
  }
  return a;
}

inline json analysis_json(const std::string& command, const AnalysisConfig& config, const Analysis& a) {
  json out;
  out["command"] = command;
  json cfg;
  cfg["input"] = config.input;
  cfg["response"] = config.response;
  cfg["selector"] = selector_json(config.selector);
  cfg["sign_condition"] = to_string(config.condition);
  cfg["replicates"] = config.replicates;
  cfg["seed"] = config.seed;
  cfg["alpha"] = config.alpha;
  cfg["sigma"] = config.sigma ? json(*config.sigma) : json(nullptr);
  cfg["standardize"] = config.standardize;
  out["config"] = cfg;

  json data;
  data["n"] = a.data.n();
  data["p"] = a.data.p();
  data["predictors"] = a.predictors;
  data["sigma_known"] = a.fit.sigma_known;
  data["sigma_hat"] = a.fit.sigma_hat;
  data["noise_model"] = a.noise == NoiseModel::residual ? "residual" : "gaussian";
  data["scales"] = a.schedule.scales;
  out["data"] = data;

  json selected = json::array();
  json beta_hat = json::object();
  for (const std::size_t j : a.observed.selected) selected.push_back(a.predictors[j]);
  for (std::size_t j = 0; j < a.data.p(); ++j)
    beta_hat[a.predictors[j]] = a.observed.beta_hat[static_cast<Eigen::Index>(j)];
  out["selection"] = {{"selected", selected}, {"beta_hat", beta_hat}};

  json results = json::array();
  for (const auto& r : a.results) {
    json item;
    item["variable"] = a.predictors[r.variable];
    item["index"] = r.variable + 1;
    item["sign"] = to_string(r.event.observed_sign);
    item["beta_ls"] = r.beta_ls;
    item["se"] = r.standard_error;
    item["z_H"] = r.z_H;
    item["z_S"] = number(r.z_S.value);
    item["z_S_status"] = to_string(r.z_S.status);
    item["p_naive"] = r.p_naive;
    item["p_AU"] = r.p_AU;
    item["p_SI"] = r.p_SI.value;
    item["p_SI_clipped"] = r.p_SI.clipped;
    item["ci"] = interval_json(r.ci);
    item["model"] = model_json(r.z_S.model);
    item["curve"] = curve_json(r.curve);
    item["warnings"] = r.warnings;
    results.push_back(item);
  }
  out["results"] = results;

  json failures = json::array();
  for (const auto& f : a.failures)
    failures.push_back({{"variable", a.predictors[f.variable]}, {"error", f.error}, {"curve", curve_json(f.curve)}});
  out["failures"] = failures;
  return out;
}

inline std::string fmt(double value, int precision = 4) {
  if (value == infinity) return "inf";
  if (value == -infinity) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return buf;
}

inline std::string results_table(const Analysis& a) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %4s %10s %8s %8s %9s %9s %10s %10s\n", "variable", "sign", "beta_ls", "z_H",
                "z_S", "p_naive", "p_SI", "ci_lower", "ci_upper");
  os << line;
  for (const auto& r : a.results) {
    std::snprintf(line, sizeof(line), "%-12s %4s %10s %8s %8s %9s %9s %10s %10s\n", a.predictors[r.variable].c_str(),
                  to_string(r.event.observed_sign), fmt(r.beta_ls).c_str(), fmt(r.z_H, 3).c_str(),
                  fmt(r.z_S.value, 3).c_str(), fmt(r.p_naive).c_str(), fmt(r.p_SI.value).c_str(),
                  fmt(r.ci.lower).c_str(), fmt(r.ci.upper).c_str());
    os << line;
  }
  for (const auto& f : a.failures) os << a.predictors[f.variable] << ": " << f.error << "\n";
  if (a.results.empty() && a.failures.empty()) os << "(no variables selected)\n";
  return os.str();
}

inline int cmd_analyze(const AnalysisConfig& config, std::ostream& out) {
  const Analysis a = run_analysis(config);
  write_text(config.output, analysis_json("analyze", config, a).dump(2) + "\n");
  out << results_table(a);
  return a.failures.empty() ? 0 : exit_code_for(ErrorKind::no_converged_fit);
}

// Non-selective and selective intervals per selected variable. The classical
// interval uses Student t when sigma is estimated; `classical_normal` is the
// same interval with the normal quantile, the non-selective limit of the
// selective interval.
struct IntervalRow {
  std::size_t variable;
  Interval classical;
  Interval classical_normal;
  Interval selective;
  double z_S;
};

inline std::vector<IntervalRow> interval_rows(const Analysis& a, double alpha) {
  std::vector<IntervalRow> rows;
  for (const auto& r : a.results) {
    rows.push_back({r.variable, classical_interval(a.fit, r.variable, alpha, !a.fit.sigma_known),
                    classical_interval(a.fit, r.variable, alpha, false), r.ci, r.z_S.value});
  }
  return rows;
}

inline std::string interval_csv(const Analysis& a, const std::vector<IntervalRow>& rows) {
  std::ostringstream os;
  os << "variable,method,lower,upper\n";
  for (const auto& row : rows) {
    const std::string& name = a.predictors[row.variable];
    os << name << ",classical," << format_endpoint(row.classical.lower) << ","
       << format_endpoint(row.classical.upper) << "\n";
    os << name << ",selective," << format_endpoint(row.selective.lower) << ","
       << format_endpoint(row.selective.upper) << "\n";
  }
  return os.str();
}

inline int cmd_ci(const AnalysisConfig& config, std::ostream& out) {
  const Analysis a = run_analysis(config);
  const auto rows = interval_rows(a, config.alpha);
  json report = analysis_json("ci", config, a);
  json intervals = json::array();
  for (const auto& row : rows) {
    intervals.push_back({{"variable", a.predictors[row.variable]},
                         {"classical_reference", a.fit.sigma_known ? "normal" : "t"},
                         {"classical", interval_json(row.classical)},
                         {"classical_normal", interval_json(row.classical_normal)},
                         {"selective", interval_json(row.selective)},
                         {"z_S", number(row.z_S)}});
  }
  report["intervals"] = intervals;
  write_text(config.output, report.dump(2) + "\n");
  write_text(config.csv_output.empty() ? sibling_csv(config.output) : config.csv_output, interval_csv(a, rows));

  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s %10s\n", "variable", "L_classic", "U_classic", "L_select",
                "U_select");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s %10s\n", a.predictors[row.variable].c_str(),
                  fmt(row.classical.lower).c_str(), fmt(row.classical.upper).c_str(), fmt(row.selective.lower).c_str(),
                  fmt(row.selective.upper).c_str());
    out << line;
  }
  for (const auto& f : a.failures) out << a.predictors[f.variable] << ": " << f.error << "\n";
  return a.failures.empty() ? 0 : exit_code_for(ErrorKind::no_converged_fit);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateConfig {
  ExperimentConfig experiment;
  std::string output;
  std::string csv_output;  // defaults to the JSON path with a .csv extension
  bool resume = false;
  std::size_t flush_every = 50;
};

inline json experiment_config_json(const ExperimentConfig& c) {
  json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["beta"] = std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size());
  j["selector"] = selector_json(c.selector);
  j["datasets"] = c.datasets;
  j["replicates"] = c.schedule.replicates;
  j["scales"] = c.schedule.scales;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha;
  j["sign_condition"] = to_string(c.condition);
  j["studentize"] = c.studentize;
  return j;
}

struct PooledRates {
  std::size_t selected = 0;
  std::size_t naive = 0;
  std::size_t selective = 0;
  std::size_t covered = 0;
};

// Pooled over variables whose true coefficient is zero.
inline PooledRates pooled_null(const ExperimentConfig& c, const ExperimentTally& t) {
  PooledRates out;
  for (std::size_t j = 0; j < c.p; ++j) {
    if (c.beta[static_cast<Eigen::Index>(j)] != 0.0) continue;
    out.selected += t.variables[j].selected;
    out.naive += t.variables[j].naive_rejections;
    out.selective += t.variables[j].selective_rejections;
    out.covered += t.variables[j].covered;
  }
  return out;
}

inline json band_json(std::size_t hits, std::size_t trials) {
  if (trials == 0) return nullptr;
  const RateBand b = rate_band(hits, trials);
  return {{"rate", b.rate}, {"lower", b.lower}, {"upper", b.upper}};
}

inline json simulation_json(const ExperimentConfig& c, const ExperimentTally& t) {
  json out;
  out["command"] = "simulate";
  out["config"] = experiment_config_json(c);
  out["completed"] = t.completed;
  out["complete"] = t.completed == c.datasets;
  out["dataset_failures"] = t.dataset_failures;
  json vars = json::array();
  for (std::size_t j = 0; j < c.p; ++j) {
    const auto& v = t.variables[j];
    vars.push_back({{"variable", j + 1},
                    {"beta", c.beta[static_cast<Eigen::Index>(j)]},
                    {"selected", v.selected},
                    {"naive_rejections", v.naive_rejections},
                    {"selective_rejections", v.selective_rejections},
                    {"covered", v.covered},
                    {"inference_failures", v.inference_failures},
                    {"naive", band_json(v.naive_rejections, v.selected)},
                    {"selective", band_json(v.selective_rejections, v.selected)},
                    {"coverage", band_json(v.covered, v.selected)}});
  }
  out["variables"] = vars;
  const PooledRates pooled = pooled_null(c, t);
  out["pooled_null"] = {{"selected", pooled.selected},
                        {"naive_rejections", pooled.naive},
                        {"selective_rejections", pooled.selective},
                        {"covered", pooled.covered},
                        {"naive", band_json(pooled.naive, pooled.selected)},
                        {"selective", band_json(pooled.selective, pooled.selected)},
                        {"coverage", band_json(pooled.covered, pooled.selected)}};
  return out;
}

// Per-variable rate table; variables never selected have no rows.
inline std::string simulation_csv(const ExperimentConfig& c, const ExperimentTally& t) {
  std::ostringstream os;
  os << "variable,beta,method,selected,rejections,rate,lower,upper\n";
  for (std::size_t j = 0; j < c.p; ++j) {
    const auto& v = t.variables[j];
    if (v.selected == 0) continue;
    for (const auto& [method, hits] : {std::pair<const char*, std::size_t>{"naive", v.naive_rejections},
                                       std::pair<const char*, std::size_t>{"selective", v.selective_rejections}}) {
      const RateBand b = rate_band(hits, v.selected);
      os << j + 1 << "," << csv::format_number(c.beta[static_cast<Eigen::Index>(j)]) << "," << method << ","
         << v.selected << "," << hits << "," << csv::format_number(b.rate) << "," << csv::format_number(b.lower)
         << "," << csv::format_number(b.upper) << "\n";
    }
  }
  return os.str();
}

// Restores the tally from a flushed report written for the same config.
inline ExperimentTally load_tally(const std::string& path, const ExperimentConfig& c) {
  std::ifstream in(path);
  if (!in) return {};
  json report;
  try {
    report = json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::parse, "cannot resume from '" + path + "': " + e.what());
  }
  // The dataset count may grow between runs; everything else must match.
  json stored = report.value("config", json());
  json wanted = experiment_config_json(c);
  stored.erase("datasets");
  wanted.erase("datasets");
  if (stored != wanted)
    throw Error(ErrorKind::invalid_argument, "cannot resume: '" + path + "' was written for a different config");
  ExperimentTally t;
  t.completed = report.at("completed").get<std::size_t>();
  t.dataset_failures = report.at("dataset_failures").get<std::size_t>();
  for (const auto& v : report.at("variables")) {
    VariableTally vt;
    vt.selected = v.at("selected").get<std::size_t>();
    vt.naive_rejections = v.at("naive_rejections").get<std::size_t>();
    vt.selective_rejections = v.at("selective_rejections").get<std::size_t>();
    vt.covered = v.at("covered").get<std::size_t>();
    vt.inference_failures = v.at("inference_failures").get<std::size_t>();
    t.variables.push_back(vt);
  }
  return t;
}

inline int cmd_simulate(const SimulateConfig& config, std::ostream& out) {
  require(!config.output.empty(), "--out is required");
  const ExperimentConfig& c = config.experiment;
  validate(c);
  const std::string csv_path = config.csv_output.empty() ? sibling_csv(config.output) : config.csv_output;
  ExperimentTally start = config.resume ? load_tally(config.output, c) : ExperimentTally{};
  auto flush = [&](const ExperimentTally& t) {
    write_text(config.output, simulation_json(c, t).dump(2) + "\n");
    write_text(csv_path, simulation_csv(c, t));
  };
  const ExperimentTally tally = run_experiment(c, std::move(start), flush, config.flush_every);
  flush(tally);

  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %6s %9s %10s %12s\n", "variable", "beta", "selected", "naive_rate",
                "selective_rate");
  out << line;
  for (std::size_t j = 0; j < c.p; ++j) {
    const auto& v = tally.variables[j];
    if (v.selected == 0) continue;
    std::snprintf(line, sizeof(line), "%-8zu %6s %9zu %10s %12s\n", j + 1,
                  fmt(c.beta[static_cast<Eigen::Index>(j)], 2).c_str(), v.selected,
                  fmt(rate_band(v.naive_rejections, v.selected).rate, 3).c_str(),
                  fmt(rate_band(v.selective_rejections, v.selected).rate, 3).c_str());
    out << line;
  }
  const PooledRates pooled = pooled_null(c, tally);
  if (pooled.selected > 0) {
    out << "pooled null: selected " << pooled.selected << ", naive "
        << fmt(rate_band(pooled.naive, pooled.selected).rate, 4) << ", selective "
        << fmt(rate_band(pooled.selective, pooled.selected).rate, 4) << "\n";
  } else {
    out << "no null variable was selected\n";
  }
  return 0;
}

}  // namespace selboot::cli
