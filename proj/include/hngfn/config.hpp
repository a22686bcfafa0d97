// Copyright 2026 The hngfn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HNGFN_CONFIG_HPP_
#define HNGFN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/gflownet.hpp"
#include "hngfn/mobo.hpp"
#include "hngfn/surrogate.hpp"
#include "hngfn/synthetic.hpp"
#include "hngfn/trainer.hpp"

namespace hngfn {

using Json = nlohmann::json;

enum class Command { kSynthetic, kMobo, kAblation, kOracleFixtures };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::kSynthetic: return "synthetic";
    case Command::kMobo: return "mobo";
    case Command::kAblation: return "ablation";
    case Command::kOracleFixtures: return "oracle-fixtures";
  }
  return "?";
}

inline Command parse_command(const std::string& s) {
  if (s == "synthetic") return Command::kSynthetic;
  if (s == "mobo") return Command::kMobo;
  if (s == "ablation") return Command::kAblation;
  if (s == "oracle-fixtures") return Command::kOracleFixtures;
  throw ConfigError("unknown command \"" + s + "\"");
}

struct FixtureSpec {
  EnvSpec env;
  int objectives = 2;
};

/// Fully resolved run configuration. `resolved` is the merged JSON the
/// typed fields were read from, as written to the manifest.
struct RunConfig {
  Command command = Command::kSynthetic;
  EnvSpec env;
  int objectives = 2;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string hv_fixture;  // optional golden front to read HV* from
  SyntheticConfig synthetic;
  std::vector<Variant> variants;
  MoboConfig mobo;
  std::vector<double> gamma_sweep;
  bool random_baseline = true;
  std::vector<Eigen::VectorXd> ablation_alphas;
  std::vector<Scalarization> ablation_scalarizations;
  std::vector<FixtureSpec> fixtures;
  Json resolved;
};

/// Every key a configuration may set, with its default. Files and
/// overrides may only set keys present here. Precedence, lowest first:
/// these defaults, the command's defaults, the config file, --override,
/// then the --seed and --out flags.
inline Json default_config() {
  return Json::parse(R"({
    "env": {"kind": "hypergrid", "components": 2, "extent": 16,
            "enumeration_cap": 200000},
    "objectives": 2,
    "seeds": [0, 1, 2],
    "out": "runs/out",
    "hv_fixture": "",
    "model": {"conditioning": "hypernet", "trunk_width": 256, "trunk_depth": 3,
              "head_hidden": 32, "hyper_width": 100, "hyper_depth": 3,
              "hyper_output_scale": 0.1, "hyper_readout": 0.1},
    "train": {"steps": 5000, "online_batch": 8, "offline_batch": 8,
              "hindsight_gamma": 0.2, "uniform_epsilon": 0.05,
              "learning_rate": 0.0005, "reward_exponent": 8.0, "reward_norm": 1.0,
              "min_reward": 0.0001, "grad_clip": 10.0, "replay_capacity": 1000},
    "surrogate": {"kind": "evidential", "hidden": 64, "depth": 2,
                  "learning_rate": 0.001, "batch_size": 64, "max_iterations": 10000,
                  "patience": 500, "eval_every": 25, "validation_fraction": 0.1,
                  "dropout": 0.1, "weight_decay": 1e-6, "evidential_reg": 0.1,
                  "ensemble_size": 5, "min_dataset": 20},
    "synthetic": {"variants": ["hypernet", "concat", "ps"], "samples": 1000,
                  "top_k": 100, "cor_test_size": 5000},
    "mobo": {"rounds": 8, "batch": 100, "initial": 200, "k": 0, "alpha": [],
             "scalarization": "ws", "beta_ucb": 0.1, "mc_samples": 64,
             "reinit_heads": true, "cor_test_size": 5000, "top_k": 20,
             "gamma_sweep": [], "random_baseline": true},
    "ablation": {"alphas": [[1, 1, 1, 1], [3, 3, 1, 1], [3, 4, 2, 1]],
                 "scalarizations": ["ws", "tch"]},
    "fixtures": [
      {"env": {"kind": "hypergrid", "components": 2, "extent": 16}, "objectives": 2},
      {"env": {"kind": "bagbuilder", "components": 8, "extent": 6}, "objectives": 2},
      {"env": {"kind": "bagbuilder", "components": 8, "extent": 6}, "objectives": 4},
      {"env": {"kind": "bagbuilder", "components": 4, "extent": 4}, "objectives": 2}
    ]
  })");
}

/// Per-command departures from default_config(): the MOBO scenarios run on
/// BagBuilder(8, 6), the two-objective one with a slower surrogate; the
/// synthetic one trains without hindsight.
inline Json command_defaults(Command c) {
  switch (c) {
    case Command::kSynthetic:
      return Json::parse(R"({"train": {"hindsight_gamma": 0.0}})");
    case Command::kMobo:
      return Json::parse(R"({"env": {"kind": "bagbuilder", "components": 8, "extent": 6},
                              "surrogate": {"learning_rate": 0.00025}})");
    case Command::kAblation:
      return Json::parse(
          R"({"env": {"kind": "bagbuilder", "components": 8, "extent": 6}, "objectives": 4})");
    case Command::kOracleFixtures:
      return Json::parse(R"({"out": "tests/golden"})");
  }
  return Json::object();
}

namespace detail {

inline bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

}  // namespace detail

/// Overwrites `base` with `patch`. Keys absent from `base` are rejected;
/// arrays and scalars are replaced whole.
inline void merge_strict(Json& base, const Json& patch, const std::string& where = "") {
  if (!patch.is_object()) throw ConfigError("configuration must be a JSON object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key \"" + path + "\"");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it.value().is_object()) throw ConfigError("\"" + path + "\" must be an object");
      merge_strict(slot, it.value(), path);
    } else {
      if (!detail::same_kind(slot, it.value())) {
        throw ConfigError("\"" + path + "\" has the wrong type (expected " +
                          std::string(slot.type_name()) + ")");
      }
      slot = it.value();
    }
  }
}

/// Applies "dotted.key=value". The value is read as JSON when it parses,
/// otherwise as a string (so env.kind=bagbuilder needs no quotes).
inline void apply_override(Json& cfg, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + text + "\" is not of the form key=value");
  }
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json patch = value;
  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  merge_strict(cfg, patch);
}

namespace detail {

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("\"" + where + key + "\" has an invalid value");
  }
}

inline EnvSpec parse_env(const Json& j, const std::string& where) {
  const auto kind = get<std::string>(j, "kind", where);
  EnvSpec spec;
  if (kind == "hypergrid") {
    spec.kind = EnvKind::kHyperGrid;
  } else if (kind == "bagbuilder") {
    spec.kind = EnvKind::kBagBuilder;
  } else {
    throw ConfigError("\"" + where + "kind\" must be hypergrid or bagbuilder");
  }
  spec.components = get<int>(j, "components", where);
  spec.extent = get<int>(j, "extent", where);
  if (j.contains("enumeration_cap")) {
    spec.enumeration_cap = get<std::size_t>(j, "enumeration_cap", where);
  }
  if (spec.components < 1 || spec.extent < (spec.kind == EnvKind::kHyperGrid ? 2 : 1)) {
    throw ConfigError("environment " + spec.describe() + " is too small");
  }
  return spec;
}

inline Scalarization parse_scalarization(const std::string& s) {
  if (s == "ws") return Scalarization::kWeightedSum;
  if (s == "tch") return Scalarization::kTchebycheff;
  throw ConfigError("scalarization must be ws or tch, got \"" + s + "\"");
}

inline Conditioning parse_conditioning(const std::string& s) {
  if (s == "hypernet") return Conditioning::kHypernet;
  if (s == "concat") return Conditioning::kConcat;
  if (s == "unconditional") return Conditioning::kUnconditional;
  throw ConfigError("conditioning must be hypernet, concat or unconditional");
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace detail

inline const char* scalarization_name(Scalarization s) {
  return s == Scalarization::kWeightedSum ? "ws" : "tch";
}

/// Reads the typed configuration out of a fully merged JSON document.
inline RunConfig parse_run_config(Command command, const Json& j) {
  using detail::get;
  RunConfig c;
  c.command = command;
  c.resolved = j;
  c.env = detail::parse_env(j.at("env"), "env.");
  c.objectives = get<int>(j, "objectives", "");
  if (c.objectives < 1 || c.objectives > 4) throw ConfigError("objectives must lie in 1..4");
  c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "");
  if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");
  c.out = get<std::string>(j, "out", "");
  c.hv_fixture = get<std::string>(j, "hv_fixture", "");
  if (!c.hv_fixture.empty() && !std::filesystem::exists(c.hv_fixture)) {
    throw ConfigError("fixture file \"" + c.hv_fixture + "\" does not exist");
  }

  const Json& m = j.at("model");
  FlowModelConfig model;
  model.conditioning = detail::parse_conditioning(get<std::string>(m, "conditioning", "model."));
  model.num_objectives = c.objectives;
  model.trunk_width = get<int>(m, "trunk_width", "model.");
  model.trunk_depth = get<int>(m, "trunk_depth", "model.");
  model.head_hidden = get<int>(m, "head_hidden", "model.");
  model.hyper_width = get<int>(m, "hyper_width", "model.");
  model.hyper_depth = get<int>(m, "hyper_depth", "model.");
  model.hyper_output_scale = get<double>(m, "hyper_output_scale", "model.");
  model.hyper_readout = get<double>(m, "hyper_readout", "model.");
  if (!(model.hyper_output_scale > 0.0) || !(model.hyper_readout > 0.0)) {
    throw ConfigError("model.hyper_output_scale and model.hyper_readout must be positive");
  }
  if (model.trunk_width < 1 || model.trunk_depth < 1 || model.head_hidden < 1 ||
      model.hyper_width < 1 || model.hyper_depth < 1) {
    throw ConfigError("model sizes must be positive");
  }

  const Json& t = j.at("train");
  TrainConfig train;
  train.steps = get<int>(t, "steps", "train.");
  train.online_batch = get<int>(t, "online_batch", "train.");
  train.offline_batch = get<int>(t, "offline_batch", "train.");
  train.hindsight_gamma = get<double>(t, "hindsight_gamma", "train.");
  train.uniform_epsilon = get<double>(t, "uniform_epsilon", "train.");
  train.learning_rate = get<double>(t, "learning_rate", "train.");
  train.reward_exponent = get<double>(t, "reward_exponent", "train.");
  train.reward_norm = get<double>(t, "reward_norm", "train.");
  train.min_reward = get<double>(t, "min_reward", "train.");
  train.grad_clip = get<double>(t, "grad_clip", "train.");
  train.replay_capacity = get<std::size_t>(t, "replay_capacity", "train.");
  train.alpha = Eigen::VectorXd::Ones(c.objectives);
  {
    // Targets are only known per round; validate the counts here.
    TrainConfig probe = train;
    probe.hindsight_gamma = 0.0;
    probe.validate();
    if (!(train.hindsight_gamma >= 0.0 && train.hindsight_gamma <= 1.0)) {
      throw ConfigError("hindsight gamma must lie in [0, 1]");
    }
  }

  const Json& s = j.at("surrogate");
  SurrogateConfig sur;
  const auto kind = get<std::string>(s, "kind", "surrogate.");
  if (kind == "evidential") {
    sur.kind = SurrogateKind::kEvidential;
  } else if (kind == "ensemble") {
    sur.kind = SurrogateKind::kEnsemble;
  } else {
    throw ConfigError("surrogate.kind must be evidential or ensemble");
  }
  sur.hidden = get<int>(s, "hidden", "surrogate.");
  sur.depth = get<int>(s, "depth", "surrogate.");
  sur.learning_rate = get<double>(s, "learning_rate", "surrogate.");
  sur.batch_size = get<int>(s, "batch_size", "surrogate.");
  sur.max_iterations = get<int>(s, "max_iterations", "surrogate.");
  sur.patience = get<int>(s, "patience", "surrogate.");
  sur.eval_every = get<int>(s, "eval_every", "surrogate.");
  sur.validation_fraction = get<double>(s, "validation_fraction", "surrogate.");
  sur.dropout = get<double>(s, "dropout", "surrogate.");
  sur.weight_decay = get<double>(s, "weight_decay", "surrogate.");
  sur.evidential_reg = get<double>(s, "evidential_reg", "surrogate.");
  sur.ensemble_size = get<int>(s, "ensemble_size", "surrogate.");
  sur.min_dataset = get<std::size_t>(s, "min_dataset", "surrogate.");
  sur.validate();

  const Json& y = j.at("synthetic");
  c.synthetic.steps = train.steps;
  c.synthetic.samples = get<std::size_t>(y, "samples", "synthetic.");
  c.synthetic.top_k = get<std::size_t>(y, "top_k", "synthetic.");
  c.synthetic.cor_test_size = get<std::size_t>(y, "cor_test_size", "synthetic.");
  c.synthetic.train = train;
  c.synthetic.model = model;
  for (const auto& v : get<std::vector<std::string>>(y, "variants", "synthetic.")) {
    c.variants.push_back(parse_variant(v));
  }

  const Json& b = j.at("mobo");
  MoboConfig& mobo = c.mobo;
  mobo.rounds = get<int>(b, "rounds", "mobo.");
  mobo.batch = get<std::size_t>(b, "batch", "mobo.");
  mobo.initial = get<std::size_t>(b, "initial", "mobo.");
  mobo.k = get<std::size_t>(b, "k", "mobo.");
  const auto alpha = get<std::vector<double>>(b, "alpha", "mobo.");
  mobo.alpha = detail::to_vector(alpha);
  mobo.scalarization = detail::parse_scalarization(get<std::string>(b, "scalarization", "mobo."));
  mobo.beta_ucb = get<double>(b, "beta_ucb", "mobo.");
  mobo.mc_samples = get<int>(b, "mc_samples", "mobo.");
  mobo.reinit_heads = get<bool>(b, "reinit_heads", "mobo.");
  mobo.cor_test_size = get<std::size_t>(b, "cor_test_size", "mobo.");
  mobo.top_k = get<std::size_t>(b, "top_k", "mobo.");
  mobo.train = train;
  mobo.model = model;
  mobo.surrogate = sur;
  c.gamma_sweep = get<std::vector<double>>(b, "gamma_sweep", "mobo.");
  for (double g : c.gamma_sweep) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma_sweep values must lie in [0, 1]");
  }
  c.random_baseline = get<bool>(b, "random_baseline", "mobo.");

  const Json& a = j.at("ablation");
  for (const auto& v : get<std::vector<std::vector<double>>>(a, "alphas", "ablation.")) {
    if (int(v.size()) != c.objectives && command == Command::kAblation) {
      throw ConfigError("ablation alphas need one entry per objective");
    }
    c.ablation_alphas.push_back(detail::to_vector(v));
  }
  for (const auto& s2 : get<std::vector<std::string>>(a, "scalarizations", "ablation.")) {
    c.ablation_scalarizations.push_back(detail::parse_scalarization(s2));
  }

  for (const auto& f : j.at("fixtures")) {
    if (!f.is_object() || !f.contains("env") || !f.contains("objectives") || f.size() != 2) {
      throw ConfigError("fixtures entries need exactly \"env\" and \"objectives\"");
    }
    FixtureSpec fs;
    fs.env = detail::parse_env(f.at("env"), "fixtures[].env.");
    fs.objectives = get<int>(f, "objectives", "fixtures[].");
    c.fixtures.push_back(fs);
  }

  if (command == Command::kMobo || command == Command::kAblation) {
    mobo.validate(c.objectives);
  }
  if (command == Command::kSynthetic) {
    if (c.objectives != 2) throw ConfigError("the synthetic scenario uses two objectives");
    if (train.hindsight_gamma != 0.0) {
      throw ConfigError("the synthetic scenario has no target preferences; set train.hindsight_gamma to 0");
    }
    if (c.variants.empty()) throw ConfigError("synthetic.variants must be non-empty");
  }
  if (command == Command::kAblation &&
      (c.ablation_alphas.empty() || c.ablation_scalarizations.empty())) {
    throw ConfigError("the ablation grid must be non-empty");
  }
  return c;
}

/// Defaults, command defaults, file, overrides; then the typed view.
inline RunConfig load_run_config(Command command, const std::string& path,
                                 const std::vector<std::string>& overrides) {
  Json cfg = default_config();
  merge_strict(cfg, command_defaults(command));
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    Json file = Json::parse(in, nullptr, false, /*ignore_comments=*/true);
    if (file.is_discarded()) throw ConfigError("config file \"" + path + "\" is not valid JSON");
    // A manifest carries the fully resolved config of an earlier run.
    if (file.is_object() && file.contains("hngfn_manifest")) {
      if (file.value("command", "") != to_string(command)) {
        throw ConfigError("manifest \"" + path + "\" belongs to another command");
      }
      file = file.at("config");
    }
    merge_strict(cfg, file);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return parse_run_config(command, cfg);
}

}  // namespace hngfn

#endif  // HNGFN_CONFIG_HPP_
