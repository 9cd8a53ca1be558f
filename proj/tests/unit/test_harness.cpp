#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "xbar/attacks/result_csv.hpp"
#include "xbar/common/error.hpp"
#include "xbar/harness/config.hpp"
#include "xbar/harness/pipeline.hpp"
#include "xbar/harness/report.hpp"

using namespace xbar;
using namespace xbar::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("xbar_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTiny = R"(
[experiment]
seed = 5
out = out
[data]
train_count = 300
test_count = 60
attack_count = 12
[model]
epochs = 2
[crossbar]
presets = 32x32_100k
nf_samples = 12
[surrogate]
samples = 50
epochs = 1
[attack]
targets = digital, 32x32_100k
epsilons = 8/255
pgd_iters = 3
square_queries = 10
ensemble_probes = 40
ensemble_epochs = 1
[run:pgd]
scenario = nonadaptive-whitebox
attack = pgd
[run:sq]
scenario = nonadaptive-blackbox
attack = square
epsilons = 4/255, 8/255, 16/255
[run:hil]
scenario = adaptive-whitebox
attack = pgd
attacker = matched
targets = 32x32_100k
)";

attacks::ScenarioResult row(const std::string& scen, const std::string& atk, double eps, const std::string& target,
                            const std::string& attacker, double adv) {
  attacks::ScenarioResult r;
  r.scenario = scen;
  r.attack = atk;
  r.epsilon = eps;
  r.iters_or_queries = 30;
  r.target_backend = target;
  r.attacker_backend = attacker;
  r.clean_acc = 0.9;
  r.adv_acc = adv;
  r.delta = adv - 0.9;
  return r;
}

}  // namespace

TEST_CASE("default config parses and round-trips its fixed structure") {
  const auto cfg = ExperimentConfig::parse(default_config_text(), scratch("default"), "default");
  CHECK(cfg.presets.size() == 3);
  CHECK(cfg.runs.size() == 5);
  CHECK(cfg.seed == 2020);
  CHECK(cfg.hash().size() == 16);
  const auto again = ExperimentConfig::parse(default_config_text(), scratch("default"), "default");
  CHECK(again.hash() == cfg.hash());
}

TEST_CASE("config validation failures") {
  const auto dir = scratch("cfgerr");
  auto parse = [&](const std::string& text) { return ExperimentConfig::parse(text, dir, "test"); };
  const std::string head = "[experiment]\nout = o\n[crossbar]\npresets = 32x32_100k\n";
  const std::string run = "[run:a]\nscenario = nonadaptive-whitebox\nattack = pgd\ntargets = digital\nepsilons = 8/255\n";
  CHECK_NOTHROW(parse(head + run));
  CHECK_THROWS_AS(parse(head), ConfigError);  // no runs
  CHECK_THROWS_AS(parse("[experiment]\nout = o\n[crossbar]\npresets = 48x48_1k\n" + run), ConfigError);
  CHECK_THROWS_AS(parse(head + "[run:a]\nscenario = nonadaptive-whitebox\nattack = pgd\ntargets = digital\n"
                                "epsilons = 1.5\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse(head + "[run:a]\nscenario = nonadaptive-whitebox\nattack = square\ntargets = digital\n"
                                "epsilons = 8/255\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse(head + "[run:a]\nscenario = adaptive-whitebox\nattack = pgd\nattacker = 64x64_300k\n"
                                "targets = 32x32_100k\nepsilons = 8/255\n"),
                  ConfigError);  // attacker not among presets
  CHECK_THROWS_AS(parse(head + "[data]\nsource = idx\ntrain_images = nope\ntrain_labels = nope\n"
                                "test_images = nope\ntest_labels = nope\n" + run),
                  ConfigError);
  CHECK_THROWS_AS(parse(head + "[bogus]\nx = 1\n" + run), ConfigError);
  CHECK_THROWS_AS(parse(head + "[model]\nwidth = 3\n" + run), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "missing.ini"), ConfigError);

  auto cfg = parse(head + run);
  const auto h = cfg.hash();
  cfg.override_seed(99);
  CHECK(cfg.seed == 99);
  CHECK(cfg.hash() != h);
}

TEST_CASE("report: gain recomputation, missing baseline, ordering") {
  std::vector<attacks::ScenarioResult> rows{
      row("nonadaptive-whitebox", "pgd", 8.0 / 255, "digital", "digital", 0.20),
      row("nonadaptive-whitebox", "pgd", 8.0 / 255, "64x64_100k", "digital", 0.35),
      row("adaptive-whitebox", "pgd", 8.0 / 255, "64x64_100k", "64x64_100k", 0.30),
      row("nonadaptive-whitebox", "pgd", 4.0 / 255, "digital", "digital", 0.60),
  };
  const std::map<std::string, double> nf{{"64x64_100k", 0.26}};
  const auto g = gain_vs_nf(rows, nf);
  REQUIRE(g.size() == 2);
  for (const auto& r : g) {
    CHECK(r.nf == 0.26);
    CHECK(r.baseline_adv_acc == doctest::Approx(0.20));
    CHECK(r.gain == doctest::Approx(r.scenario == "adaptive-whitebox" ? 0.10 : 0.15));
  }
  CHECK_FALSE(gain_csv(g).empty());

  CHECK_THROWS_AS(gain_vs_nf(std::span(rows).subspan(1, 2), nf), ReportError);
  CHECK_THROWS_AS(gain_vs_nf(rows, {}), ReportError);

  // Blocks keep first-appearance order; epsilons ascend inside a block.
  const auto curve = accuracy_vs_epsilon_csv(rows);
  const auto first4 = curve.find("0.01568627");
  const auto first8 = curve.find("0.03137255");
  REQUIRE(first4 != std::string::npos);
  CHECK(first4 < first8);
}

TEST_CASE("tiny pipeline: row cardinality, manifest, determinism") {
  const auto a = scratch("pipe_a"), b = scratch("pipe_b");
  std::ofstream(a / "c.ini") << kTiny;
  std::ofstream(b / "c.ini") << kTiny;
  const auto ca = ExperimentConfig::load(a / "c.ini"), cb = ExperimentConfig::load(b / "c.ini");
  run_stage(ca, "all", nullptr);
  run_stage(cb, "all", nullptr);

  const auto rows = attacks::read_results_csv(ca.results_path());
  // pgd: 2 targets x 1 eps; sq: 2 targets x 3 eps; hil: 1 target x 1 eps
  CHECK(rows.size() == 2 + 6 + 1);
  for (const auto& r : rows) CHECK(r.seed == ca.seed);

  CHECK(slurp(ca.results_path()) == slurp(cb.results_path()));
  CHECK(slurp(ca.out_dir / "gain_vs_nf.csv") == slurp(cb.out_dir / "gain_vs_nf.csv"));
  CHECK(slurp(ca.model_path()) == slurp(cb.model_path()));

  const auto m = nlohmann::json::parse(slurp(ca.manifest_path()));
  CHECK(m["config_hash"] == ca.hash());
  CHECK(m["seed"] == 5);
  for (const char* s : {"calibrate", "train", "attack", "report"}) CHECK(m["stages"].contains(s));
  bool listed = false;
  for (const auto& f : m["files"])
    if (f["path"] == "results.csv") {
      listed = true;
      CHECK(f["fnv1a"] == hex64(fnv1a(slurp(ca.results_path()))));
    }
  CHECK(listed);

  // Attack needs a trained model.
  fs::remove(ca.model_path());
  CHECK_THROWS_AS(run_stage(ca, "attack", nullptr), IoError);
}
