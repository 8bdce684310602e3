#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "selboot/commands.hpp"

namespace {

using namespace selboot;

const std::map<std::string, SelectorFamily> selector_names{{"lasso", SelectorFamily::lasso},
                                                           {"mcp", SelectorFamily::mcp}};
const std::map<std::string, SignCondition> condition_names{{"match", SignCondition::match_observed},
                                                           {"membership", SignCondition::membership_only}};

struct SelectorFlags {
  SelectorFamily family = SelectorFamily::lasso;
  double lambda = 1.0;
  double gamma = 3.0;
  SignCondition condition = SignCondition::match_observed;
  std::vector<double> scales;

  void attach(CLI::App& app) {
    app.add_option("--selector", family, "lasso or mcp")->transform(CLI::CheckedTransformer(selector_names));
    app.add_option("--lambda", lambda, "penalty level")->check(CLI::PositiveNumber);
    app.add_option("--gamma", gamma, "MCP concavity")->check(CLI::PositiveNumber);
    app.add_option("--sign-condition", condition, "match or membership")
        ->transform(CLI::CheckedTransformer(condition_names));
    app.add_option("--scales", scales, "bootstrap scales gamma^2 (default: 13-point schedule)")->delimiter(',');
  }

  SelectorSpec spec() const {
    SelectorSpec s;
    s.family = family;
    s.lambda = lambda;
    s.gamma_mcp = gamma;
    return s;
  }
};

struct AnalysisFlags {
  cli::AnalysisConfig config;
  SelectorFlags selector;
  double sigma = 0.0;

  void attach(CLI::App& app, bool with_csv) {
    app.add_option("--input", config.input, "CSV file with a header row")->required();
    app.add_option("--response", config.response, "response column name")->required();
    app.add_option("--out", config.output, "JSON report path")->required();
    if (with_csv) app.add_option("--csv", config.csv_output, "interval table path (default: --out with .csv)");
    app.add_option("--b", config.replicates, "bootstrap replicates per scale");
    app.add_option("--seed", config.seed, "master seed");
    app.add_option("--alpha", config.alpha, "level");
    app.add_option("--sigma", sigma, "known noise standard deviation")->check(CLI::PositiveNumber);
    app.add_flag("--standardize", config.standardize, "center and scale predictors, center the response");
    selector.attach(app);
  }

  cli::AnalysisConfig finish(const CLI::App& app) {
    config.selector = selector.spec();
    config.condition = selector.condition;
    config.scales = selector.scales;
    if (app.count("--sigma") > 0) config.sigma = sigma;
    return config;
  }
};

struct SimulateFlags {
  cli::SimulateConfig config;
  SelectorFlags selector;
  std::vector<double> beta;

  void attach(CLI::App& app) {
    auto& e = config.experiment;
    e.schedule.replicates = 2000;
    app.add_option("--n", e.n, "observations");
    app.add_option("--p", e.p, "predictors");
    app.add_option("--beta", beta, "leading coefficients, zero-padded to p")->delimiter(',');
    app.add_option("--datasets", e.datasets, "Monte Carlo datasets");
    app.add_option("--b", e.schedule.replicates, "bootstrap replicates per scale");
    app.add_option("--seed", e.seed, "master seed");
    app.add_option("--alpha", e.alpha, "level");
    app.add_flag("--studentize", e.studentize, "estimate sigma instead of treating it as known");
    app.add_option("--out", config.output, "JSON report path")->required();
    app.add_option("--csv", config.csv_output, "rate table path (default: --out with .csv)");
    app.add_flag("--resume", config.resume, "continue from a partial report at --out");
    selector.attach(app);
  }

  cli::SimulateConfig finish() {
    auto& e = config.experiment;
    require(beta.size() <= e.p, "--beta has more entries than --p");
    e.beta = Vector::Zero(static_cast<Eigen::Index>(e.p));
    for (std::size_t j = 0; j < beta.size(); ++j) e.beta[static_cast<Eigen::Index>(j)] = beta[j];
    e.selector = selector.spec();
    e.condition = selector.condition;
    const auto replicates = e.schedule.replicates;
    e.schedule = selector.scales.empty() ? default_schedule(e.n, replicates) : ScaleSchedule{selector.scales, replicates};
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective inference after lasso or MCP selection via the multiscale bootstrap"};
  app.set_config("--config", "", "TOML file; command-line flags take precedence");
  app.require_subcommand(1);
  auto* analyze = app.add_subcommand("analyze", "selective p-values for the variables a selector picks");
  auto* ci = app.add_subcommand("ci", "classical and selective confidence intervals");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo rejection rates on synthetic data");
  AnalysisFlags analyze_flags;
  AnalysisFlags ci_flags;
  SimulateFlags simulate_flags;
  analyze_flags.attach(*analyze, false);
  ci_flags.attach(*ci, true);
  simulate_flags.attach(*simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) return cli::cmd_analyze(analyze_flags.finish(*analyze), std::cout);
    if (*ci) return cli::cmd_ci(ci_flags.finish(*ci), std::cout);
    return cli::cmd_simulate(simulate_flags.finish(), std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
