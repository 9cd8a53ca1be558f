#include "xbar/harness/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xbar/circuit/model_file.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/ini.hpp"

namespace xbar::harness {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::string> AttackRun::attacker_for(const std::string& target) const {
  if (attacker.empty()) return std::nullopt;
  return attacker == "matched" ? target : attacker;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"seed", "out"}},
      {"data",
       {"source", "image_size", "noise", "train_count", "test_count", "attack_count", "train_images", "train_labels",
        "test_images", "test_labels"}},
      {"model", {"conv_channels", "hidden", "residual", "epochs", "lr", "batch"}},
      {"quant", {"input_bits", "weight_bits", "stream_bits", "slice_bits"}},
      {"crossbar", {"presets", "backend", "nf_samples"}},
      {"surrogate", {"samples", "hidden", "epochs", "lr", "batch"}},
      {"attack",
       {"targets", "epsilons", "pgd_iters", "square_queries", "adaptive_square_queries", "chunk", "ensemble_probes",
        "ensemble_epochs", "ensemble_lr", "archive"}},
  };
  return keys;
}

const std::set<std::string> kRunKeys{"scenario", "attack", "attacker", "targets", "epsilons"};

std::size_t get_count(const IniDocument& doc, const std::string& key, std::size_t fallback, bool allow_zero = false) {
  const long long v = doc.get_int(key, static_cast<long long>(fallback));
  if (v < 0 || (!allow_zero && v == 0)) throw ConfigError(doc.origin() + ": " + key + " must be positive");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> get_sizes(const IniDocument& doc, const std::string& key, std::vector<std::size_t> fallback) {
  if (!doc.has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : doc.get_list(key)) {
    const double v = parse_fraction(item, key);
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError(doc.origin() + ": " + key + " entries must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> get_epsilons(const IniDocument& doc, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : doc.get_list(key)) out.push_back(parse_fraction(item, key));
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text, const fs::path& base_dir, const std::string& origin) {
  const auto doc = IniDocument::parse(text, origin);
  for (const auto& section : doc.sections()) {
    const bool is_run = section.rfind("run:", 0) == 0;
    const auto it = known_keys().find(section);
    if (!is_run && it == known_keys().end()) throw ConfigError(origin + ": unknown section [" + section + "]");
    const auto& allowed = is_run ? kRunKeys : it->second;
    for (const auto& key : doc.keys(section))
      if (!allowed.count(key)) throw ConfigError(origin + ": unknown key " + section + "." + key);
  }

  ExperimentConfig c;
  c.text = text;
  c.seed = static_cast<std::uint64_t>(doc.get_int("experiment.seed", 2020));
  if (doc.get_int("experiment.seed", 2020) < 0) throw ConfigError(origin + ": experiment.seed must be non-negative");
  c.out_dir = resolve(base_dir, doc.get_string("experiment.out", "run"));

  auto& d = c.data;
  d.source = doc.get_string("data.source", d.source);
  d.image_size = get_count(doc, "data.image_size", d.image_size);
  d.noise = doc.get_double("data.noise", d.noise);
  d.train_count = get_count(doc, "data.train_count", d.train_count);
  d.test_count = get_count(doc, "data.test_count", d.test_count);
  d.attack_count = get_count(doc, "data.attack_count", d.attack_count);
  if (d.source == "idx") {
    d.train_images = resolve(base_dir, doc.get_string("data.train_images"));
    d.train_labels = resolve(base_dir, doc.get_string("data.train_labels"));
    d.test_images = resolve(base_dir, doc.get_string("data.test_images"));
    d.test_labels = resolve(base_dir, doc.get_string("data.test_labels"));
  }

  auto& m = c.model;
  m.input = {1, d.image_size, d.image_size};
  m.conv_channels = get_sizes(doc, "model.conv_channels", m.conv_channels);
  m.hidden = get_sizes(doc, "model.hidden", m.hidden);
  m.residual = doc.get_bool("model.residual", m.residual);
  c.train.epochs = static_cast<int>(doc.get_int("model.epochs", 35));
  c.train.lr = doc.get_double("model.lr", c.train.lr);
  c.train.batch = get_count(doc, "model.batch", c.train.batch);

  c.quant.input_bits = static_cast<int>(doc.get_int("quant.input_bits", c.quant.input_bits));
  c.quant.weight_bits = static_cast<int>(doc.get_int("quant.weight_bits", c.quant.weight_bits));
  c.quant.stream_bits = static_cast<int>(doc.get_int("quant.stream_bits", c.quant.stream_bits));
  c.quant.slice_bits = static_cast<int>(doc.get_int("quant.slice_bits", c.quant.slice_bits));

  c.presets = doc.has("crossbar.presets") ? doc.get_list("crossbar.presets") : circuit::preset_names();
  c.backend = doc.get_string("crossbar.backend", c.backend);
  c.nf_samples = get_count(doc, "crossbar.nf_samples", c.nf_samples);

  c.surrogate_samples = get_count(doc, "surrogate.samples", c.surrogate_samples);
  c.surrogate.hidden_dim = get_count(doc, "surrogate.hidden", c.surrogate.hidden_dim);
  c.surrogate.epochs = static_cast<int>(doc.get_int("surrogate.epochs", 30));
  c.surrogate.lr = doc.get_double("surrogate.lr", c.surrogate.lr);
  c.surrogate.batch = get_count(doc, "surrogate.batch", c.surrogate.batch);

  auto& a = c.attack;
  a.pgd_iters = static_cast<int>(doc.get_int("attack.pgd_iters", a.pgd_iters));
  a.square_queries = static_cast<long>(doc.get_int("attack.square_queries", a.square_queries));
  a.adaptive_square_queries = static_cast<long>(doc.get_int("attack.adaptive_square_queries", a.adaptive_square_queries));
  a.chunk = get_count(doc, "attack.chunk", a.chunk);
  c.ensemble_probes = get_count(doc, "attack.ensemble_probes", c.ensemble_probes);
  c.ensemble.epochs = static_cast<int>(doc.get_int("attack.ensemble_epochs", 20));
  c.ensemble.lr = doc.get_double("attack.ensemble_lr", c.ensemble.lr);
  c.archive = doc.get_bool("attack.archive", c.archive);
  const auto default_targets = doc.has("attack.targets") ? doc.get_list("attack.targets") : std::vector<std::string>{};
  const auto default_eps = doc.has("attack.epsilons") ? get_epsilons(doc, "attack.epsilons") : std::vector<double>{};

  for (const auto& section : doc.sections()) {
    if (section.rfind("run:", 0) != 0) continue;
    AttackRun r;
    r.name = section.substr(4);
    r.scenario = doc.get_string(section + ".scenario");
    r.kind = attacks::parse_attack_kind(doc.get_string(section + ".attack"));
    r.attacker = doc.get_string(section + ".attacker", "");
    r.targets = doc.has(section + ".targets") ? doc.get_list(section + ".targets") : default_targets;
    r.epsilons = doc.has(section + ".epsilons") ? get_epsilons(doc, section + ".epsilons") : default_eps;
    c.runs.push_back(std::move(r));
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  const auto doc_text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }();
  auto c = parse(doc_text, fs::absolute(path).parent_path(), path.string());
  c.source_path = path;
  return c;
}

void ExperimentConfig::override_seed(std::uint64_t s) {
  seed = s;
  text += "\n; --seed " + std::to_string(s) + "\n";
  validate();
}

void ExperimentConfig::override_out(const fs::path& dir) {
  out_dir = fs::absolute(dir).lexically_normal();
  validate();
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (out_dir.empty()) fail("output directory is empty");

  if (data.source == "idx") {
    for (const auto* p : {&data.train_images, &data.train_labels, &data.test_images, &data.test_labels})
      if (!fs::exists(*p)) fail("dataset file not found: " + p->string());
  } else if (data.source == "synthetic") {
    if (data.image_size < 8) fail("data.image_size must be at least 8");
    if (!(data.noise >= 0.0)) fail("data.noise must be non-negative");
  } else {
    fail("data.source must be 'synthetic' or 'idx', got '" + data.source + "'");
  }
  if (data.source == "synthetic" && data.attack_count > data.test_count)
    fail("data.attack_count cannot exceed data.test_count");

  if (model.conv_channels.empty()) fail("model.conv_channels must list at least one block");
  if (data.source == "synthetic" && data.image_size % (std::size_t{1} << model.conv_channels.size()) != 0)
    fail("data.image_size must be divisible by 2^(number of conv blocks)");
  if (train.epochs < 0) fail("model.epochs must be non-negative");
  if (!(train.lr > 0.0)) fail("model.lr must be positive");

  if (presets.empty()) fail("crossbar.presets is empty");
  std::set<std::string> seen;
  for (const auto& p : presets) {
    if (!circuit::is_preset(p)) fail("unknown crossbar preset '" + p + "'");
    if (!seen.insert(p).second) fail("crossbar preset '" + p + "' listed twice");
    quant.validate(circuit::preset(p).device.levels);
  }
  if (backend != "circuit" && backend != "surrogate") fail("crossbar.backend must be 'circuit' or 'surrogate'");

  if (surrogate.epochs < 0) fail("surrogate.epochs must be non-negative");
  if (!(surrogate.lr > 0.0)) fail("surrogate.lr must be positive");
  if (surrogate_samples < 2) fail("surrogate.samples must be at least 2");

  if (attack.pgd_iters < 0) fail("attack.pgd_iters must be non-negative");
  if (attack.square_queries < 0 || attack.adaptive_square_queries < 0) fail("square query budgets must be non-negative");
  if (ensemble.epochs < 0 || !(ensemble.lr > 0.0)) fail("ensemble training needs epochs >= 0 and lr > 0");

  if (runs.empty()) fail("no attack runs configured (add [run:<name>] sections)");
  for (const auto& r : runs) {
    const std::string where = "run '" + r.name + "': ";
    if (r.name.empty()) fail("attack run with an empty name");
    const auto base = attacks::scenario_by_name(r.scenario, r.attacker.empty() ? std::nullopt
                                                                              : std::optional<std::string>("x"));
    if (!attacks::attack_allowed(base, r.kind))
      fail(where + "attack '" + attacks::to_string(r.kind) + "' does not fit scenario '" + r.scenario + "'");
    if (!r.attacker.empty() && r.attacker != "matched" && !seen.count(r.attacker))
      fail(where + "attacker crossbar '" + r.attacker + "' is not among crossbar.presets");
    if (r.targets.empty()) fail(where + "no targets");
    for (const auto& t : r.targets) {
      if (t != "digital" && !seen.count(t)) fail(where + "target '" + t + "' is neither 'digital' nor a configured preset");
      if (t == "digital" && base.adaptive()) fail(where + "adaptive attacks need a crossbar target");
    }
    if (r.epsilons.empty()) fail(where + "no epsilons");
    for (double e : r.epsilons)
      if (!(e > 0.0 && e <= 1.0)) fail(where + "epsilon values must lie in (0, 1]");
  }
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(text)); }

std::string default_config_text() {
  return R"(; Toy-digit robustness experiment over the three crossbar presets.
[experiment]
seed = 2020
out = run

[data]
source = synthetic
image_size = 16
noise = 0.15
train_count = 6000
test_count = 1000
attack_count = 500

[model]
conv_channels = 8, 16
hidden = 96
epochs = 35
lr = 0.05
batch = 64

[quant]
input_bits = 8
weight_bits = 8
stream_bits = 1
slice_bits = 2

[crossbar]
presets = 64x64_300k, 32x32_100k, 64x64_100k
backend = circuit
nf_samples = 200

[surrogate]
samples = 4000
hidden = 256
epochs = 30
lr = 0.1
batch = 64

[attack]
targets = digital, 64x64_300k, 32x32_100k, 64x64_100k
epsilons = 1/255, 2/255, 4/255, 8/255, 12/255, 16/255, 18/255, 20/255, 24/255, 32/255
pgd_iters = 30
square_queries = 1000
adaptive_square_queries = 30
chunk = 100
ensemble_probes = 2000
ensemble_epochs = 20
archive = true

[run:pgd]
scenario = nonadaptive-whitebox
attack = pgd

[run:square]
scenario = nonadaptive-blackbox
attack = square

[run:ensemble]
scenario = nonadaptive-blackbox
attack = ensemble

[run:hil-matched]
scenario = adaptive-whitebox
attack = pgd
attacker = matched
targets = 64x64_100k
epsilons = 4/255, 8/255, 16/255, 18/255, 20/255

[run:hil-mismatched]
scenario = adaptive-whitebox
attack = pgd
attacker = 64x64_300k
targets = 64x64_100k
epsilons = 4/255, 8/255, 16/255, 18/255, 20/255
)";
}

}  // namespace xbar::harness
