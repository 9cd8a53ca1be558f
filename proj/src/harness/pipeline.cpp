#include "xbar/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <sstream>

#include "xbar/attacks/result_csv.hpp"
#include "xbar/common/container.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/ini.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/harness/report.hpp"
#include "xbar/mapping/backend.hpp"
#include "xbar/nn/checkpoint.hpp"
#include "xbar/surrogate/dataset.hpp"

namespace xbar::harness {

namespace {

constexpr const char* kToolVersion = "1.0.0";

// Seed streams of the experiment seed.
enum Stream : std::uint64_t {
  kTrainData = 1,
  kTestData = 2,
  kNetInit = 10,
  kNetShuffle = 11,
  kSurrogate = 20,
  kProbes = 30,
  kEnsemble = 31,
};

void say(const StageContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
}

circuit::CrossbarModel load_calibrated(const ExperimentConfig& cfg, const std::string& preset) {
  const auto path = cfg.crossbar_path(preset);
  if (!fs::exists(path)) throw IoError("missing " + path.string() + "; run the calibrate stage first");
  return circuit::load_model(path);
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  const auto& dc = cfg.data;
  if (dc.source == "idx") {
    d.train = nn::load_idx_dataset(dc.train_images, dc.train_labels);
    d.test = nn::load_idx_dataset(dc.test_images, dc.test_labels);
    if (d.train.images.sample_shape() != cfg.model.input)
      throw ConfigError("idx images have shape " + nn::shape_string(d.train.images.sample_shape()) +
                        " but the model expects " + nn::shape_string(cfg.model.input));
  } else {
    const nn::SyntheticDigits gen{dc.image_size, dc.noise};
    d.train = gen.generate(dc.train_count, mix_seed(cfg.seed, kTrainData));
    d.test = gen.generate(dc.test_count, mix_seed(cfg.seed, kTestData));
  }
  d.attack = d.test.slice(0, std::min(dc.attack_count, d.test.size()));
  return d;
}

std::vector<circuit::CrossbarModel> stage_calibrate(const StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  ensure_out_dir(cfg);
  fs::create_directories(cfg.out_dir / "crossbars");
  std::vector<circuit::CrossbarModel> out;
  for (const auto& name : cfg.presets) {
    auto m = circuit::preset(name);
    circuit::CalibrationOptions opt;
    opt.sampling.samples = cfg.nf_samples;
    const auto res = circuit::calibrate_geometry(m.target_nf.value(), m.geometry, m.device, opt);
    m.geometry = res.geometry;
    m.measured_nf = res.measured_nf;
    circuit::save_model(cfg.crossbar_path(name), m);
    say(ctx, "calibrate " + name + ": r_wire " + fmt(m.geometry.r_wire, 4) + " ohm, NF " + fmt(res.measured_nf) +
                 " (target " + fmt(*m.target_nf, 2) + ", " + std::to_string(res.evaluations) + " evaluations)");
    out.push_back(std::move(m));
  }
  return out;
}

nn::TrainHistory stage_train(const StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  ensure_out_dir(cfg);
  const auto data = load_experiment_data(cfg);
  auto spec = cfg.model;
  spec.classes = static_cast<std::size_t>(data.train.num_classes);
  auto net = nn::make_cnn(spec);
  net.init(mix_seed(cfg.seed, kNetInit));
  auto opt = cfg.train;
  opt.seed = mix_seed(cfg.seed, kNetShuffle);
  say(ctx, "train: " + std::to_string(net.parameter_count()) + " parameters, " + std::to_string(data.train.size()) +
               " training images");
  const auto hist = nn::train_classifier(net, data.train, &data.test, opt, [&](int epoch, const nn::TrainHistory& h) {
    say(ctx, "epoch " + std::to_string(epoch + 1) + " loss " + fmt(h.loss.back()) + " train_acc " +
                 fmt(h.train_acc.back()) + " test_acc " + fmt(h.test_acc.back()));
  });
  const double acc = nn::evaluate_accuracy(nn::DigitalExecutor(net), data.test);
  nn::save_network(cfg.model_path(), net, {{"test_accuracy", acc}, {"seed", cfg.seed}});
  std::ostringstream log;
  log << "epoch,loss,train_acc,test_acc\n";
  for (std::size_t e = 0; e < hist.loss.size(); ++e)
    log << e + 1 << ',' << fmt(hist.loss[e], 6) << ',' << fmt(hist.train_acc[e], 6) << ',' << fmt(hist.test_acc[e], 6)
        << '\n';
  write_file_atomic(cfg.out_dir / "train_log.csv", log.str());
  say(ctx, "train: digital test accuracy " + fmt(acc));
  return hist;
}

std::vector<surrogate::TrainStats> stage_train_surrogate(const StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  ensure_out_dir(cfg);
  std::vector<surrogate::TrainStats> out;
  for (std::size_t k = 0; k < cfg.presets.size(); ++k) {
    const auto& name = cfg.presets[k];
    const auto m = load_calibrated(cfg, name);
    const auto data =
        surrogate::generate_dataset(m.geometry, m.device, cfg.surrogate_samples, mix_seed(cfg.seed, kSurrogate + k));
    auto opt = cfg.surrogate;
    opt.seed = mix_seed(cfg.seed, kSurrogate + 100 + k);
    opt.geometry_id = name;
    const auto net = surrogate::train_surrogate(data, opt, [&](int epoch, const surrogate::TrainStats& s) {
      say(ctx, "surrogate " + name + " epoch " + std::to_string(epoch + 1) + " train_err " + fmt(s.train_error) +
                   " val_err " + fmt(s.validation_error));
    });
    surrogate::save_surrogate(cfg.surrogate_path(name), net);
    say(ctx, "surrogate " + name + ": held-out mean relative error " + fmt(net.stats().validation_error));
    out.push_back(net.stats());
  }
  return out;
}

std::shared_ptr<const mapping::ExecBackend> load_backend(const ExperimentConfig& cfg, const std::string& preset) {
  if (cfg.backend == "surrogate") {
    const auto path = cfg.surrogate_path(preset);
    if (!fs::exists(path)) throw IoError("missing " + path.string() + "; run the train-surrogate stage first");
    return std::make_shared<mapping::SurrogateBackend>(
        std::make_shared<const surrogate::SurrogateNet>(surrogate::load_surrogate(path)), preset);
  }
  return std::make_shared<mapping::CircuitBackend>(load_calibrated(cfg, preset));
}

std::vector<attacks::ScenarioResult> stage_attack(const StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  ensure_out_dir(cfg);
  if (!fs::exists(cfg.model_path())) throw IoError("missing " + cfg.model_path().string() + "; run the train stage first");
  const auto net = nn::load_network(cfg.model_path());
  const auto data = load_experiment_data(cfg);
  const auto& eval = data.attack;
  if (eval.empty()) throw ConfigError("attack split is empty");

  std::map<std::string, std::shared_ptr<const mapping::AnalogNetwork>> hardware;
  auto hw = [&](const std::string& preset) {
    auto it = hardware.find(preset);
    if (it == hardware.end()) {
      const auto backend = load_backend(cfg, preset);
      const auto tile = backend->required_tile().value_or(std::make_pair<std::size_t, std::size_t>(64, 64));
      say(ctx, "attack: mapping network onto " + preset);
      it = hardware.emplace(preset, std::make_shared<const mapping::AnalogNetwork>(net, backend, cfg.quant, tile)).first;
    }
    return it->second;
  };
  const nn::DigitalExecutor digital(net);

  std::map<std::string, attacks::Ensemble> ensembles;
  auto ensemble_for = [&](const attacks::ThreatScenario& s) -> const attacks::Ensemble& {
    const std::string source = s.adaptive() ? *s.attacker_crossbar : "digital";
    auto it = ensembles.find(source);
    if (it == ensembles.end()) {
      const nn::SyntheticDigits gen{cfg.model.input.at(1), cfg.data.noise};
      const auto probes = gen.generate(cfg.ensemble_probes, mix_seed(cfg.seed, kProbes)).images;
      const nn::LogitsExecutor& oracle = s.adaptive() ? static_cast<const nn::LogitsExecutor&>(*hw(source)) : digital;
      say(ctx, "attack: querying " + source + " for " + std::to_string(probes.batch()) + " synthetic labels");
      const auto synth = attacks::build_synthetic_dataset(oracle, probes);
      const auto specs = attacks::default_ensemble_specs(cfg.model.input, net.output_shape().at(0));
      say(ctx, "attack: training " + std::to_string(specs.size()) + " surrogate classifiers on " + source + " logits");
      it = ensembles.emplace(source, attacks::train_surrogate_ensemble(synth, specs, mix_seed(cfg.seed, kEnsemble),
                                                                       cfg.ensemble)).first;
    }
    return it->second;
  };

  struct Crafted {
    attacks::AdvBatch adv;
    attacks::ScenarioResult meta;
  };
  std::map<std::string, Crafted> crafted;
  std::vector<std::string> craft_order;
  std::vector<attacks::ScenarioResult> rows;

  for (const auto& run : cfg.runs) {
    for (const auto& target : run.targets) {
      const auto scenario = attacks::scenario_by_name(run.scenario, run.attacker_for(target));
      attacks::AttackerResources res{&net, nullptr, nullptr};
      if (scenario.adaptive()) res.attacker_hw = hw(*scenario.attacker_crossbar);
      if (run.kind == attacks::AttackKind::Ensemble) res.ensemble = &ensemble_for(scenario);
      const nn::LogitsExecutor& target_exec =
          target == "digital" ? static_cast<const nn::LogitsExecutor&>(digital) : *hw(target);
      for (double eps : run.epsilons) {
        auto params = cfg.attack;
        params.epsilon = eps;
        params.seed = cfg.seed;
        const std::string key = scenario.name + "|" + attacks::to_string(run.kind) + "|" +
                                attacks::attacker_backend_name(scenario, run.kind, res) + "|" + fmt(eps, 10);
        auto it = crafted.find(key);
        if (it == crafted.end()) {
          Crafted c;
          c.adv = attacks::craft_adversarial(scenario, run.kind, eval, params, res, &c.meta);
          it = crafted.emplace(key, std::move(c)).first;
          craft_order.push_back(key);
        }
        attacks::ScenarioResult r = it->second.meta;
        attacks::evaluate_on_target(target_exec, eval, it->second.adv, r, params.chunk);
        say(ctx, "attack " + run.name + " eps " + fmt(eps * 255.0, 1) + "/255 target " + target + ": clean " +
                     fmt(r.clean_acc) + " adv " + fmt(r.adv_acc));
        rows.push_back(std::move(r));
      }
    }
  }

  write_file_atomic(cfg.results_path(), attacks::results_to_csv(rows));
  if (cfg.archive) {
    Container arc;
    arc.kind = "adversarial";
    arc.meta["batches"] = nlohmann::json::array();
    std::vector<double> labels(eval.labels.begin(), eval.labels.end());
    arc.add("labels", {labels.size()}, labels);
    for (std::size_t k = 0; k < craft_order.size(); ++k) {
      const auto& c = crafted.at(craft_order[k]);
      arc.meta["batches"].push_back({{"index", k},
                                     {"scenario", c.meta.scenario},
                                     {"attack", c.meta.attack},
                                     {"attacker_backend", c.meta.attacker_backend},
                                     {"epsilon", c.meta.epsilon},
                                     {"iters_or_queries", c.meta.iters_or_queries}});
      arc.add("batch" + std::to_string(k) + ".x_star", c.adv.x_star.shape(), c.adv.x_star.to_vector());
      std::vector<double> q(c.adv.queries.begin(), c.adv.queries.end());
      arc.add("batch" + std::to_string(k) + ".queries", {q.size()}, q);
    }
    write_container(cfg.archive_path(), arc);
  }
  say(ctx, "attack: " + std::to_string(rows.size()) + " result rows written to " + cfg.results_path().string());
  return rows;
}

void stage_report(const StageContext& ctx, const std::vector<fs::path>& result_files) {
  const auto& cfg = ctx.cfg;
  ensure_out_dir(cfg);
  std::vector<fs::path> files = result_files;
  if (files.empty()) files.push_back(cfg.results_path());
  std::vector<attacks::ScenarioResult> rows;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw IoError("missing result file " + f.string());
    auto part = attacks::read_results_csv(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::map<std::string, double> nf;
  for (const auto& p : cfg.presets)
    if (fs::exists(cfg.crossbar_path(p))) {
      const auto m = circuit::load_model(cfg.crossbar_path(p));
      if (m.measured_nf) nf[p] = *m.measured_nf;
    }
  const auto gains = gain_vs_nf(rows, nf);
  write_file_atomic(cfg.out_dir / "gain_vs_nf.csv", gain_csv(gains));
  write_file_atomic(cfg.out_dir / "acc_vs_eps.csv", accuracy_vs_epsilon_csv(rows));
  say(ctx, "report: " + std::to_string(gains.size()) + " gain rows, " + std::to_string(rows.size()) + " accuracy rows");
}

void write_manifest(const ExperimentConfig& cfg, const std::string& stage, double seconds) {
  ensure_out_dir(cfg);
  nlohmann::json stages = nlohmann::json::object();
  const auto path = cfg.manifest_path();
  if (fs::exists(path)) {
    try {
      const auto old = nlohmann::json::parse(read_file(path));
      if (old.value("config_hash", "") == cfg.hash() && old.contains("stages")) stages = old["stages"];
    } catch (const nlohmann::json::exception&) {
      // A damaged manifest is replaced.
    }
  }
  stages[stage] = {{"seconds", seconds}};

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(cfg.out_dir))
    if (e.is_regular_file() && e.path() != path && e.path().filename().string().find(".tmp") == std::string::npos)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::json inventory = nlohmann::json::array();
  for (const auto& f : files) {
    const auto bytes = read_file(f);
    inventory.push_back({{"path", fs::relative(f, cfg.out_dir).generic_string()},
                         {"bytes", bytes.size()},
                         {"fnv1a", hex64(fnv1a(bytes))}});
  }
  nlohmann::json m{{"config_hash", cfg.hash()},
                   {"config_path", cfg.source_path.string()},
                   {"seed", cfg.seed},
                   {"versions", {{"xbarsim", kToolVersion}, {"container", kContainerVersion}}},
                   {"stages", stages},
                   {"files", inventory}};
  write_file_atomic(path, m.dump(2) + "\n");
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage, std::ostream* log) {
  const StageContext ctx{cfg, log};
  auto timed = [&](const std::string& name, const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    write_manifest(cfg, name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  if (stage == "calibrate") return timed(stage, [&] { stage_calibrate(ctx); });
  if (stage == "train") return timed(stage, [&] { stage_train(ctx); });
  if (stage == "train-surrogate") return timed(stage, [&] { stage_train_surrogate(ctx); });
  if (stage == "attack") return timed(stage, [&] { stage_attack(ctx); });
  if (stage == "report") return timed(stage, [&] { stage_report(ctx); });
  if (stage == "all") {
    for (const char* s : {"calibrate", "train", "train-surrogate", "attack", "report"}) {
      if (std::string(s) == "train-surrogate" && cfg.backend != "surrogate") continue;
      run_stage(cfg, s, log);
    }
    return;
  }
  throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace xbar::harness
