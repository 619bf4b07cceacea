#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scatinv/config.hpp"
#include "scatinv/error.hpp"
#include "scatinv/parallel.hpp"
#include "scatinv/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kNumerical = 4 };

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  long long seed = -1;
  int n_train = -1;
  int n_test = -1;
  unsigned threads = 0;
  bool single_thread = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Experiment configuration (INI)")->required();
  cmd->add_option("--set", c.overrides, "Override a config value: section.key=value (repeatable)");
  cmd->add_option("-o,--output", c.output, "Output directory (experiment.output)");
  cmd->add_option("--seed", c.seed, "Base seed (experiment.seed)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--n-train", c.n_train, "Training realizations (experiment.n_train)");
  cmd->add_option("--n-test", c.n_test, "Test realizations (experiment.n_test)");
  cmd->add_option("-j,--threads", c.threads, "Worker threads (default: all cores)");
  cmd->add_flag("--single-thread", c.single_thread, "Run everything on one thread (bit-exact reproducibility)");
  cmd->add_flag("-q,--quiet", c.quiet, "No progress output");
}

scatinv::ExperimentConfig resolve(const Common& c) {
  std::vector<std::string> overrides = c.overrides;
  if (!c.output.empty()) overrides.push_back("experiment.output=" + c.output);
  if (c.seed >= 0) overrides.push_back("experiment.seed=" + std::to_string(c.seed));
  if (c.n_train >= 0) overrides.push_back("experiment.n_train=" + std::to_string(c.n_train));
  if (c.n_test >= 0) overrides.push_back("experiment.n_test=" + std::to_string(c.n_test));
  return scatinv::load_config(c.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal reconstruction from ill-posed measurements with scattering statistics"};
  app.require_subcommand(1);
  Common common;

  using Stage = void (*)(const scatinv::ExperimentConfig&, const scatinv::pipeline::RunOptions&);
  const std::vector<std::tuple<std::string, std::string, Stage>> stages = {
      {"generate", "Draw train/test realizations and test measurements", scatinv::pipeline::cmd_generate},
      {"train", "Fit one estimator per outer iteration on the training set", scatinv::pipeline::cmd_train},
      {"reconstruct", "Reconstruct the test images with the trained estimators", scatinv::pipeline::cmd_reconstruct},
      {"baseline", "Run the configured l1 / TV baselines on the test measurements", scatinv::pipeline::cmd_baseline},
      {"evaluate", "Per-set MSE, kurtosis and measurement residuals", scatinv::pipeline::cmd_evaluate},
      {"report", "Figures-of-merit table, cokurtosis panels and montages", scatinv::pipeline::cmd_report},
      {"run", "All stages in order", scatinv::pipeline::run_all},
  };
  Stage selected = nullptr;
  for (const auto& [name, help, fn] : stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    cmd->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    const scatinv::ExperimentConfig cfg = resolve(common);
    scatinv::pipeline::RunOptions opts;
    opts.threads = common.single_thread ? 1u : common.threads > 0 ? common.threads : scatinv::hardware_threads();
    opts.log = common.quiet ? nullptr : &std::clog;
    selected(cfg, opts);
  } catch (const scatinv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const scatinv::MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << '\n';
    return kMissing;
  } catch (const scatinv::FormatError& e) {
    std::cerr << "unreadable input: " << e.what() << '\n';
    return kMissing;
  } catch (const scatinv::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
