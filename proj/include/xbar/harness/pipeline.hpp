#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "xbar/attacks/scenario.hpp"
#include "xbar/circuit/model_file.hpp"
#include "xbar/harness/config.hpp"
#include "xbar/mapping/analog.hpp"
#include "xbar/nn/dataset.hpp"

namespace xbar::harness {

/// Train, test and attack splits for a config. Synthetic splits use
/// independent streams of the experiment seed; the attack split is the head
/// of the test split.
struct ExperimentData {
  nn::Dataset train;
  nn::Dataset test;
  nn::Dataset attack;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Progress lines go to `log` (may be null).
struct StageContext {
  const ExperimentConfig& cfg;
  std::ostream* log = nullptr;
};

/// Calibrates every configured preset and writes crossbars/<preset>.ini.
std::vector<circuit::CrossbarModel> stage_calibrate(const StageContext& ctx);
/// Trains the classifier; writes model.ckpt and train_log.csv.
nn::TrainHistory stage_train(const StageContext& ctx);
/// Fits one circuit surrogate per preset; writes surrogate_<preset>.ckpt.
std::vector<surrogate::TrainStats> stage_train_surrogate(const StageContext& ctx);
/// Runs every [run:*] section; writes results.csv and the adversarial archive.
std::vector<attacks::ScenarioResult> stage_attack(const StageContext& ctx);
/// Derives plot data from result files (defaults to the run's results.csv).
void stage_report(const StageContext& ctx, const std::vector<fs::path>& result_files = {});

/// Execution backend for a target preset, built from stage outputs.
std::shared_ptr<const mapping::ExecBackend> load_backend(const ExperimentConfig& cfg, const std::string& preset);

/// Rewrites manifest.json atomically: config hash, seed, versions, per-stage
/// wall-clock (merged with earlier stages) and an inventory of output files.
void write_manifest(const ExperimentConfig& cfg, const std::string& stage, double seconds);

/// Runs `stage` by name (calibrate, train, train-surrogate, attack, report, all)
/// and updates the manifest.
void run_stage(const ExperimentConfig& cfg, const std::string& stage, std::ostream* log);

}  // namespace xbar::harness
