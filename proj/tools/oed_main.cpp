#include "oed/app.hpp"
#include "oed/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int run_verb(oed::app::Experiment verb, const std::string& config_path, const std::string& out_dir,
             const std::optional<std::uint64_t>& seed) {
  using namespace oed;
  app::RunConfig cfg;
  try {
    cfg = app::load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (cfg.experiment != verb) {
    std::cerr << "config error: experiment: config requests '" << app::to_string(cfg.experiment)
              << "' but the command is '" << app::to_string(verb) << "'\n";
    return kExitConfig;
  }
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (cfg.output_dir.empty()) {
    std::cerr << "config error: output_dir: no output directory (use --out)\n";
    return kExitConfig;
  }
  const std::filesystem::path dir = cfg.output_dir;
  try {
    const app::ExperimentResult result = app::run_experiment(cfg, &dir);
    const auto manifest = app::write_outputs(result, dir);
    std::cout << app::to_string(verb) << ": wrote " << manifest["files"].size() << " files to " << dir.string()
              << " (config " << result.config_hash << ", " << result.pde_solves << " PDE solves)\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const AssumptionError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Sensor placement for advection-diffusion inverse problems"};
  cli.require_subcommand(1);

  struct Verb {
    oed::app::Experiment kind;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    CLI::App* cmd = nullptr;
    CLI::Option* seed_opt = nullptr;
  };
  std::vector<Verb> verbs{{oed::app::Experiment::design},
                          {oed::app::Experiment::error_study},
                          {oed::app::Experiment::bound_study},
                          {oed::app::Experiment::compare_random},
                          {oed::app::Experiment::posterior}};
  const std::map<oed::app::Experiment, std::string> help{
      {oed::app::Experiment::design, "optimize a sparse sensor design"},
      {oed::app::Experiment::error_study, "relative error of the randomized estimators versus ell"},
      {oed::app::Experiment::bound_study, "empirical estimator error against the theoretical bound"},
      {oed::app::Experiment::compare_random, "optimal designs against random designs of equal size"},
      {oed::app::Experiment::posterior, "MAP point and pointwise posterior standard deviation"}};
  for (Verb& v : verbs) {
    std::string name = oed::app::to_string(v.kind);
    std::replace(name.begin(), name.end(), '_', '-');
    v.cmd = cli.add_subcommand(name, help.at(v.kind));
    v.cmd->add_option("--config", v.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    v.cmd->add_option("--out", v.out, "output directory (overrides output_dir)");
    v.seed_opt = v.cmd->add_option("--seed", v.seed, "override the configured seed");
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (const Verb& v : verbs) {
    if (v.cmd->parsed()) {
      std::optional<std::uint64_t> seed;
      if (v.seed_opt->count() > 0) seed = v.seed;
      return run_verb(v.kind, v.config, v.out, seed);
    }
  }
  return kExitFailure;
}
