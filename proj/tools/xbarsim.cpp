// xbarsim: crossbar robustness experiment runner.
//
//   xbarsim <calibrate|train|train-surrogate|attack|report|all> --config FILE [--seed N] [--out DIR]
//
// Exit status is 0 on success. Failures print "error[<category>]: <message>"
// to stderr and exit with the category's code.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "xbar/common/error.hpp"
#include "xbar/harness/config.hpp"
#include "xbar/harness/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> results;
  bool print_default = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crossbar non-ideality and adversarial robustness experiments"};
  app.require_subcommand(0, 1);
  Options opt;
  app.add_flag("--print-default-config", opt.print_default, "Print the default experiment config and exit");

  const std::vector<std::pair<std::string, std::string>> stages{
      {"calibrate", "Tune r_wire of every preset to its target NF"},
      {"train", "Train the classifier"},
      {"train-surrogate", "Fit a circuit surrogate per preset"},
      {"attack", "Run the configured attack grid"},
      {"report", "Derive gain-vs-NF and accuracy-vs-epsilon plot data"},
      {"all", "Run every stage in order"},
  };
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Override experiment.seed");
    sub->add_option("--out", opt.out, "Override the output directory");
    if (name == "report") sub->add_option("--results", opt.results, "Result CSV files (default: <out>/results.csv)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : xbar::exit_code(xbar::ErrorCategory::Config);
  }
  if (opt.print_default) {
    std::cout << xbar::harness::default_config_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return xbar::exit_code(xbar::ErrorCategory::Config);
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    auto cfg = xbar::harness::ExperimentConfig::load(opt.config);
    if (opt.seed) cfg.override_seed(*opt.seed);
    if (!opt.out.empty()) cfg.override_out(opt.out);
    if (stage == "report" && !opt.results.empty()) {
      std::vector<std::filesystem::path> files(opt.results.begin(), opt.results.end());
      const auto t0 = std::chrono::steady_clock::now();
      xbar::harness::stage_report({cfg, &std::cout}, files);
      xbar::harness::write_manifest(cfg, stage,
                                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    } else {
      xbar::harness::run_stage(cfg, stage, &std::cout);
    }
  } catch (const xbar::Error& e) {
    std::cerr << "error[" << xbar::category_name(e.category()) << "]: " << e.what() << '\n';
    return xbar::exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[" << xbar::category_name(xbar::ErrorCategory::Io) << "]: " << e.what() << '\n';
    return xbar::exit_code(xbar::ErrorCategory::Io);
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
