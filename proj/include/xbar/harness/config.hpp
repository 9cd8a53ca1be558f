#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xbar/attacks/ensemble.hpp"
#include "xbar/attacks/scenario.hpp"
#include "xbar/attacks/threat.hpp"
#include "xbar/circuit/calibrate.hpp"
#include "xbar/mapping/quant.hpp"
#include "xbar/nn/network.hpp"
#include "xbar/nn/train.hpp"
#include "xbar/surrogate/surrogate.hpp"

namespace xbar::harness {

namespace fs = std::filesystem;

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx
  std::size_t image_size = 16;
  double noise = 0.15;
  std::size_t train_count = 6000;
  std::size_t test_count = 1000;
  std::size_t attack_count = 500;
  fs::path train_images, train_labels, test_images, test_labels;  // idx only
};

/// One `[run:<name>]` section: a scenario/attack pair swept over targets and epsilons.
struct AttackRun {
  std::string name;
  std::string scenario;
  attacks::AttackKind kind = attacks::AttackKind::Pgd;
  std::string attacker;  // empty (non-adaptive), "matched", or a preset name
  std::vector<std::string> targets;
  std::vector<double> epsilons;

  /// Attacker crossbar preset for a given target, or nullopt for non-adaptive runs.
  std::optional<std::string> attacker_for(const std::string& target) const;
};

struct ExperimentConfig {
  fs::path source_path;  // config file; empty when parsed from text
  std::string text;      // raw config text, hashed into the manifest
  std::uint64_t seed = 2020;
  fs::path out_dir;

  DataConfig data;
  nn::CnnSpec model;
  nn::TrainOptions train;
  mapping::QuantConfig quant;

  std::vector<std::string> presets;
  std::string backend = "circuit";  // circuit | surrogate
  std::size_t nf_samples = 200;

  std::size_t surrogate_samples = 4000;
  surrogate::SurrogateTrainOptions surrogate;

  attacks::ScenarioParams attack;  // epsilon is set per row
  std::size_t ensemble_probes = 2000;
  attacks::RegressionOptions ensemble;
  bool archive = true;
  std::vector<AttackRun> runs;

  /// Parses and validates; relative paths resolve against `base_dir`.
  static ExperimentConfig parse(const std::string& text, const fs::path& base_dir, const std::string& origin);
  static ExperimentConfig load(const fs::path& path);

  /// Applies CLI overrides and re-validates.
  void override_seed(std::uint64_t s);
  void override_out(const fs::path& dir);

  /// Throws ConfigError on the first inconsistency; called by parse.
  void validate() const;

  /// FNV-1a of the config text plus overrides, as 16 hex digits.
  std::string hash() const;

  fs::path crossbar_path(const std::string& preset) const { return out_dir / "crossbars" / (preset + ".ini"); }
  fs::path model_path() const { return out_dir / "model.ckpt"; }
  fs::path surrogate_path(const std::string& preset) const { return out_dir / ("surrogate_" + preset + ".ckpt"); }
  fs::path results_path() const { return out_dir / "results.csv"; }
  fs::path archive_path() const { return out_dir / "adversarial.ckpt"; }
  fs::path manifest_path() const { return out_dir / "manifest.json"; }
};

/// Default experiment config text (toy digits, three presets, five attack runs).
std::string default_config_text();

/// 64-bit FNV-1a, used for config and file fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace xbar::harness
