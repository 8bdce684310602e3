// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "selboot/commands.hpp"
#include "selboot/selboot.hpp"
#include "support.hpp"

using namespace selboot;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("selboot_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig desk_config(const SelectorSpec& selector) {
  ExperimentConfig c;
  c.n = 50;
  c.p = 25;
  c.beta = Vector::Zero(25);
  c.beta.head(5).setConstant(2.0);
  c.selector = selector;
  c.datasets = 300;
  c.schedule = default_schedule(50, 2000);
  c.seed = 7;
  c.alpha = 0.05;
  c.condition = SignCondition::match_observed;
  return c;
}

struct NullRates {
  std::size_t tests = 0;
  std::size_t naive = 0;
  std::size_t selective = 0;
  std::size_t failed = 0;
  double naive_rate() const { return static_cast<double>(naive) / static_cast<double>(tests); }
  double selective_rate() const { return static_cast<double>(selective) / static_cast<double>(tests); }
};

NullRates pooled_nulls(const ExperimentTally& t) {
  NullRates r;
  for (std::size_t j = 5; j < 25; ++j) {
    const auto& v = t.variables[j];
    r.tests += v.selected - v.inference_failures;
    r.naive += v.naive_rejections;
    r.selective += v.selective_rejections;
    r.failed += v.inference_failures;
  }
  return r;
}

double two_proportion_z(std::size_t x1, std::size_t x2, std::size_t n) {
  const double p1 = static_cast<double>(x1) / n;
  const double p2 = static_cast<double>(x2) / n;
  const double pooled = 0.5 * (p1 + p2);
  return (p1 - p2) / std::sqrt(pooled * (1.0 - pooled) * 2.0 / n);
}

void lasso_calibration() {
  SelectorSpec lasso;
  lasso.lambda = 10.0;
  const auto t = run_experiment(desk_config(lasso));
  const auto r = pooled_nulls(t);
  const double z = two_proportion_z(r.naive, r.selective, r.tests);
  const bool pass = r.tests > 0 && r.selective_rate() > 0.03 && r.selective_rate() < 0.075 && z > 3.0 &&
                    r.naive_rate() > 0.075;
  report(1, "selective calibration, lasso",
         pass,
         fmt("null selections %zu, selective %.4f (band 0.03..0.075), naive %.4f, two-proportion z %.2f, "
             "inference failures %zu, dataset failures %zu",
             r.tests, r.selective_rate(), r.naive_rate(), z, r.failed, t.dataset_failures));
}

void mcp_calibration() {
  SelectorSpec mcp;
  mcp.family = SelectorFamily::mcp;
  mcp.lambda = 10.0;
  mcp.gamma_mcp = 3.0;
  const auto c = desk_config(mcp);
  const auto t = run_experiment(c);
  const auto r = pooled_nulls(t);
  const double expected = 0.125 * static_cast<double>(c.datasets);
  const double half = 2.5758293035489 * std::sqrt(expected * 0.875);
  std::size_t inside = 0;
  std::string counts;
  double mean = 0.0;
  for (std::size_t j = 5; j < 25; ++j) {
    const double n = static_cast<double>(t.variables[j].selected);
    inside += std::abs(n - expected) <= half;
    mean += n / 20.0;
    counts += (counts.empty() ? "" : " ") + std::to_string(t.variables[j].selected);
  }
  const bool rate_ok = r.tests > 0 && r.selective_rate() > 0.03 && r.selective_rate() < 0.075;
  report(2, "selective calibration, MCP", rate_ok && inside == 20,
         fmt("selective %.4f (band 0.03..0.075), naive %.4f; null selection counts in [%.1f, %.1f]: %zu/20, "
             "mean %.1f; counts %s",
             r.selective_rate(), r.naive_rate(), expected - half, expected + half, inside, mean, counts.c_str()));
}

void prostate_replication() {
  cli::AnalysisConfig c;
  c.input = std::string(SELBOOT_DATA_DIR) + "/prostate.csv";
  c.response = "lpsa";
  c.standardize = true;
  c.selector.lambda = 5.0;
  c.replicates = 10000;
  c.seed = 1;
  c.output = (scratch() / "prostate_ci.json").string();
  std::ostringstream sink;
  const int code = cli::cmd_ci(c, sink);
  const auto rep = cli::json::parse(slurp(c.output));
  std::ifstream in(cli::sibling_csv(c.output));
  const auto rows = csv::parse_records(in).rows;
  std::size_t classical = 0;
  std::size_t selective = 0;
  for (const auto& row : rows) {
    classical += row[1] == "classical";
    selective += row[1] == "selective";
  }
  std::size_t checked = 0;
  std::size_t wider = 0;
  std::size_t wider_t = 0;
  for (const auto& iv : rep["intervals"]) {
    const auto& zs = iv["z_S"];
    if (!zs.is_null() && zs.get<double>() > 0.0) continue;
    ++checked;
    const auto& s = iv["selective"];
    const double w = s["lower"].is_null() || s["upper"].is_null()
                         ? infinity
                         : s["upper"].get<double>() - s["lower"].get<double>();
    const double ref = iv["classical_normal"]["upper"].get<double>() - iv["classical_normal"]["lower"].get<double>();
    const double ref_t = iv["classical"]["upper"].get<double>() - iv["classical"]["lower"].get<double>();
    wider += w >= ref - 1e-7;
    wider_t += w >= ref_t - 1e-7;
  }
  const std::size_t n_selected = rep["selection"]["selected"].size();
  const bool pass = code == 0 && n_selected == 6 && classical == 6 && selective == 6 && wider == checked;
  report(3, "prostate replication", pass,
         fmt("selected %zu, intervals %zu classical + %zu selective, selective at least as wide as the z-interval "
             "for %zu/%zu variables with z_S <= 0 (%zu/%zu against the t-interval)",
             n_selected, classical, selective, wider, checked, wider_t, checked));
}

void kkt_oracle() {
  const Matrix x = testing::correlated_pair(0.5);
  SelectorSpec spec;
  spec.lambda = 1.0;
  std::size_t checked = 0;
  std::size_t agree = 0;
  std::size_t boundary = 0;
  for (int a = 0; a < 100; ++a) {
    for (int b = 0; b < 100; ++b) {
      Dataset d;
      d.X = x;
      d.y = Vector(2);
      d.y << -5.0 + 10.0 * (a + 0.5) / 100.0, -5.0 + 10.0 * (b + 0.5) / 100.0;
      const auto cert = testing::lasso_kkt_p2(x, d.y, spec.lambda);
      if (!cert || cert->margin < 1e-6) {
        ++boundary;
        continue;
      }
      ++checked;
      agree += (select_lasso(d, spec).sign_of(0) == Sign::plus) == (cert->signs[0] == 1);
    }
  }
  report(4, "selector oracle equivalence", checked > 0 && agree == checked,
         fmt("%zu/%zu non-boundary grid points agree (%zu boundary points skipped)", agree, checked, boundary));
}

void thresholding() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t p = 1 + rng() % 5;
    Dataset d;
    d.X = testing::orthonormal_columns(p + 3, p, rng);
    d.y = 4.0 * testing::gaussian_vector(p + 3, rng);
    const Vector z = d.X.transpose() * d.y;
    SelectorSpec l;
    l.lambda = 0.05 + 3.0 * u(rng);
    SelectorSpec m = l;
    m.family = SelectorFamily::mcp;
    m.gamma_mcp = 1.05 + 4.0 * u(rng);
    const auto bl = select_lasso(d, l).beta_hat;
    const auto bm = select_mcp(d, m).beta_hat;
    for (std::size_t j = 0; j < p; ++j) {
      const double az = std::abs(z[j]);
      const double firm = az <= m.lambda                  ? 0.0
                          : az <= m.gamma_mcp * m.lambda ? std::copysign((az - m.lambda) / (1.0 - 1.0 / m.gamma_mcp), z[j])
                                                          : z[j];
      worst = std::max({worst, std::abs(bl[j] - soft_threshold(z[j], l.lambda)), std::abs(bm[j] - firm)});
    }
  }
  report(5, "closed-form thresholding", worst <= 1e-8, fmt("max deviation %.3g over 1000 draws", worst));
}

void scaling_law_recovery() {
  const auto scales = default_schedule(50).scales;
  const std::size_t b = 100000;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  MultiscaleCurve curve;
  for (double s : scales) {
    const double gamma = std::sqrt(s);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < b; ++r) hits += gamma * g(rng) >= 1.0;
    curve.points.push_back(make_scale_point(s, b, hits));
  }
  const auto fit = fit_scaling_model(curve, ScalingModelFamily::poly(2));
  const double se0 = std::sqrt(fit.cov(0, 0));
  const double se1 = std::sqrt(fit.cov(1, 1));
  const double z0 = taylor_extrapolate(fit, 3, 1.0, 0.0);
  const double exact = normal::upper_tail_inv(normal::upper_tail(1.0));
  const bool pass = std::abs(fit.beta[0] - 1.0) <= 3.0 * se0 && std::abs(fit.beta[1]) <= 3.0 * se1 &&
                    std::abs(z0 - exact) <= 3.0 * se0;
  report(6, "scaling-law recovery", pass,
         fmt("beta0 %.4f (se %.4f), beta1 %.4f (se %.4f), z at 0 %.4f vs exact %.4f", fit.beta[0], se0, fit.beta[1],
             se1, z0, exact));
}

void taylor() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double poly_err = 0.0;
  for (int draw = 0; draw < 300; ++draw) {
    FittedScalingModel m;
    const int order = 1 + draw % 3;
    m.family = ScalingModelFamily::poly(order);
    m.beta = Vector(order);
    for (int i = 0; i < order; ++i) m.beta[i] = u(rng);
    m.converged = true;
    const double s0 = 0.5 + std::abs(u(rng));
    for (double target : {-1.0, 0.0}) {
      const double exact = m(target);
      poly_err = std::max(poly_err, std::abs(taylor_extrapolate(m, 3, s0, target) - exact) /
                                        std::max(1.0, std::abs(exact)));
    }
  }
  // sing oracle: Taylor coefficients from central differences of the model itself.
  double sing_err = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    FittedScalingModel m;
    m.family = ScalingModelFamily::sing();
    m.beta = Vector(2);
    m.beta << u(rng), u(rng);
    m.converged = true;
    const double s0 = 0.7 + 0.3 * (u(rng) + 2.0);
    // Five-point stencils.
    const double h = 1e-3;
    const double f0 = m(s0);
    const double d1 = (-m(s0 + 2 * h) + 8 * m(s0 + h) - 8 * m(s0 - h) + m(s0 - 2 * h)) / (12.0 * h);
    const double d2 = (-m(s0 + 2 * h) + 16 * m(s0 + h) - 30 * f0 + 16 * m(s0 - h) - m(s0 - 2 * h)) / (12.0 * h * h);
    for (double target : {-1.0, 0.0}) {
      const double delta = target - s0;
      const double oracle = f0 + delta * d1 + 0.5 * delta * delta * d2;
      const double value = taylor_extrapolate(m, 3, s0, target);
      sing_err = std::max(sing_err, std::abs(value - oracle) / std::max(std::abs(oracle), 1e-3));
    }
    if (draw == 0) {
      m.beta << 0.8, 1.2;
      sing_err = std::max(sing_err, std::abs(taylor_extrapolate(m, 3, 1.0, -1.0) - (0.8 - 0.6)) / 0.2);
      sing_err = std::max(sing_err, std::abs(taylor_extrapolate(m, 3, 1.0, 0.0) - (0.8 + 0.45)) / 1.25);
    }
  }
  report(7, "Taylor extrapolation", poly_err <= 1e-14 && sing_err <= 1e-6,
         fmt("polynomial max relative error %.3g, sing max relative error vs oracle %.3g", poly_err, sing_err));
}

void no_selection_reduction() {
  ExperimentConfig c;
  c.beta = Vector::Zero(25);
  c.seed = 8;
  const auto spec = select_everything();
  const auto schedule = default_schedule(50, 100);
  std::size_t tests = 0;
  std::size_t rejections = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < 400; ++k) {
    const Dataset d = simulate_dataset(c, k);
    const auto fit = fit_full_model(d);
    const auto observed = run_selector(d, spec);
    std::vector<SelectionEvent> events;
    for (auto j : observed.selected) events.push_back(event_for(observed, j));
    auto curves = bootstrap_curves(d, fit, spec, events, schedule, substream_seed(c.seed, stream::dataset_bootstrap, k));
    for (std::size_t e = 0; e < events.size(); ++e) {
      const auto r = infer_variable(fit, events[e], std::move(curves[e]), 0.05);
      worst = std::max(worst, std::abs(r.p_SI.value - r.p_naive));
      rejections += r.p_SI.value < 0.05;
      ++tests;
    }
  }
  const double rate = static_cast<double>(rejections) / static_cast<double>(tests);
  const double band = 2.0 * std::sqrt(0.05 * 0.95 / static_cast<double>(tests));
  report(8, "no-selection reduction", worst <= 1e-6 && std::abs(rate - 0.05) <= band,
         fmt("max |p_SI - p_naive| %.3g over %zu tests, rejection %.4f (alpha 0.05 +- %.4f)", worst, tests, rate,
             band));
}

void determinism() {
  cli::AnalysisConfig a;
  a.input = std::string(SELBOOT_DATA_DIR) + "/prostate.csv";
  a.response = "lpsa";
  a.standardize = true;
  a.selector.lambda = 5.0;
  a.replicates = 2000;
  cli::SimulateConfig s;
  s.experiment.n = 50;
  s.experiment.p = 25;
  s.experiment.beta = Vector::Zero(25);
  s.experiment.beta.head(5).setConstant(2.0);
  s.experiment.selector.lambda = 10.0;
  s.experiment.datasets = 8;
  s.experiment.schedule = default_schedule(50, 300);
  std::string outputs[2];
  const char* workers[2] = {"1", "4"};
  for (int run = 0; run < 2; ++run) {
    ::setenv(threads_env_var, workers[run], 1);
    const fs::path dir = scratch() / ("det" + std::to_string(run));
    fs::create_directories(dir);
    std::ostringstream sink;
    a.output = (dir / "analyze.json").string();
    cli::cmd_analyze(a, sink);
    a.output = (dir / "ci.json").string();
    cli::cmd_ci(a, sink);
    s.output = (dir / "sim.json").string();
    cli::cmd_simulate(s, sink);
    outputs[run] = sink.str();
    for (const char* f : {"analyze.json", "ci.json", "ci.csv", "sim.json", "sim.csv"}) outputs[run] += slurp(dir / f);
  }
  ::unsetenv(threads_env_var);
  report(9, "determinism", !outputs[0].empty() && outputs[0] == outputs[1],
         fmt("analyze, ci and simulate outputs (%zu bytes) %s between 1 and 4 workers", outputs[0].size(),
             outputs[0] == outputs[1] ? "identical" : "differ"));
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> criteria[] = {
      {"lasso", lasso_calibration}, {"mcp", mcp_calibration}, {"prostate", prostate_replication},
      {"kkt", kkt_oracle},          {"threshold", thresholding}, {"scaling", scaling_law_recovery},
      {"taylor", taylor},           {"reduction", no_selection_reduction}, {"determinism", determinism}};
  int id = 0;
  for (const auto& [name, run] : criteria) {
    ++id;
    try {
      run();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("threw: ") + e.what());
    }
  }
  std::error_code ec;
  fs::remove_all(scratch(), ec);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
