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

#ifndef HNGFN_EXPERIMENTS_HPP_
#define HNGFN_EXPERIMENTS_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hngfn/config.hpp"
#include "hngfn/exact.hpp"
#include "hngfn/mobo.hpp"
#include "hngfn/objectives.hpp"
#include "hngfn/synthetic.hpp"

#ifndef HNGFN_SOURCE_HASH
#define HNGFN_SOURCE_HASH "unknown"
#endif

namespace hngfn {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

/// 12 significant digits; non-finite values print as "nan".
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Minimal CSV writer; fields never contain commas or quotes here.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and sample standard deviation (0 for a single value).
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / double(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  r.std = xs.size() > 1 ? std::sqrt(v / double(xs.size() - 1)) : 0.0;
  return r;
}

inline std::string join_numbers(const Eigen::VectorXd& v, char sep) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_number(v[i]);
  }
  return out;
}

inline void write_manifest(const RunConfig& cfg, const fs::path& dir,
                           const std::vector<std::string>& argv) {
  fs::create_directories(dir);
  Json m = {{"hngfn_manifest", 1},
            {"command", to_string(cfg.command)},
            {"code_hash", HNGFN_SOURCE_HASH},
            {"seeds", cfg.seeds},
            {"argv", argv},
            {"config", cfg.resolved}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Golden fixtures

inline std::string fixture_name(const EnvSpec& env, int objectives) {
  std::ostringstream s;
  s << (env.kind == EnvKind::kHyperGrid ? "hypergrid" : "bagbuilder") << "_" << env.components
    << "_" << env.extent << "_m" << objectives << ".json";
  return s.str();
}

inline Json exact_front_fixture(const EnvSpec& spec, int objectives) {
  const Environment env(spec);
  const auto oracle = SyntheticOracle::reference(env, objectives);
  const auto terminals = env.enumerate_terminals();
  const ParetoFront front = exact_pareto_front(
      [&](const State& x) { return oracle.evaluate(env, x); }, env);
  Json members = Json::array();
  for (const auto& m : front.members) {
    members.push_back({{"object", Environment::encode(terminals[m.id])},
                       {"f", std::vector<double>(m.value.data(), m.value.data() + m.value.size())}});
  }
  Json profiles = Json::array();
  for (const auto& c : oracle.profiles()) {
    profiles.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  return {{"spec", spec.describe()},
          {"spec_hash", spec.hash()},
          {"terminals", terminals.size()},
          {"objectives", objectives},
          {"profiles", profiles},
          {"front", members},
          {"hv_star", hypervolume(front)}};
}

/// HV* from a golden front file; rejects fixtures for another environment
/// or objective count.
inline double load_hv_star(const std::string& path, const EnvSpec& spec, int objectives) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture \"" + path + "\"");
  const Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("hv_star")) {
    throw ConfigError("fixture \"" + path + "\" is not a front fixture");
  }
  if (j.at("spec_hash").get<std::uint64_t>() != spec.hash() ||
      j.at("objectives").get<int>() != objectives) {
    throw ConfigError("fixture \"" + path + "\" was built for " +
                      j.at("spec").get<std::string>() + " with " +
                      std::to_string(j.at("objectives").get<int>()) + " objectives");
  }
  return j.at("hv_star").get<double>();
}

inline void run_oracle_fixtures(const RunConfig& cfg, const Logger& log) {
  fs::create_directories(cfg.out);
  for (const auto& f : cfg.fixtures) {
    const fs::path path = fs::path(cfg.out) / fixture_name(f.env, f.objectives);
    const Json j = exact_front_fixture(f.env, f.objectives);
    std::ofstream(path) << j.dump(2) << "\n";
    log("wrote " + path.string() + " (HV* = " + format_number(j.at("hv_star")) + ")");
  }
}

// ---------------------------------------------------------------------------
// Synthetic scenario

struct SyntheticSummary {
  std::vector<VariantResult> runs;  // variant-major, then seed
};

inline SyntheticSummary run_synthetic(const RunConfig& cfg, const Logger& log) {
  const Environment env(cfg.env);
  const auto oracle = SyntheticOracle::reference(env, cfg.objectives);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  SyntheticSummary summary;
  CsvWriter train(dir / "train.csv", {"variant", "seed", "model", "step", "loss", "mean_reward"});
  for (Variant v : cfg.variants) {
    for (std::uint64_t seed : cfg.seeds) {
      log(std::string("synthetic: training ") + to_string(v) + " seed " + std::to_string(seed));
      auto hook = [&](std::size_t model, const StepStats& s) {
        train.row({to_string(v), std::to_string(seed), std::to_string(model),
                   std::to_string(s.step), format_number(s.loss), format_number(s.mean_reward)});
      };
      summary.runs.push_back(run_synthetic_variant(cfg.synthetic, env, oracle, v, seed, hook));
      const auto& r = summary.runs.back();
      log("  HV " + format_number(r.hypervolume) + "  Div " + format_number(r.diversity) +
          "  Cor " + format_number(r.correlation) + "  L1 " + format_number(r.l1));
    }
  }

  std::vector<std::string> pref_header{"variant", "seed"};
  std::vector<std::string> front_header{"variant", "seed"};
  for (int m = 0; m < cfg.objectives; ++m) pref_header.push_back("lambda" + std::to_string(m + 1));
  for (const char* c : {"L1", "Cor", "Div"}) pref_header.push_back(c);
  for (int m = 0; m < cfg.objectives; ++m) {
    pref_header.push_back("top_f" + std::to_string(m + 1));
    front_header.push_back("f" + std::to_string(m + 1));
  }
  front_header.push_back("object");
  CsvWriter prefs(dir / "preferences.csv", pref_header);
  CsvWriter seeds(dir / "seeds.csv", {"variant", "seed", "HV", "Div", "Cor", "L1"});
  CsvWriter front(dir / "front.csv", front_header);
  std::map<Variant, std::vector<const VariantResult*>> by_variant;
  for (const auto& r : summary.runs) {
    by_variant[r.variant].push_back(&r);
    const std::string v = to_string(r.variant), s = std::to_string(r.seed);
    seeds.row({v, s, format_number(r.hypervolume), format_number(r.diversity),
               format_number(r.correlation), format_number(r.l1)});
    std::vector<State> objects;
    std::vector<ObjectiveVector> values;
    for (const auto& p : r.preferences) {
      std::vector<std::string> row{v, s};
      for (Eigen::Index m = 0; m < p.lambda.size(); ++m) {
        row.push_back(format_number(p.lambda.weights()[m]));
      }
      row.push_back(format_number(p.l1));
      row.push_back(format_number(p.correlation));
      row.push_back(format_number(p.diversity));
      for (Eigen::Index m = 0; m < p.top_mean.size(); ++m) row.push_back(format_number(p.top_mean[m]));
      prefs.row(row);
      objects.insert(objects.end(), p.samples.begin(), p.samples.end());
      values.insert(values.end(), p.sample_values.begin(), p.sample_values.end());
    }
    for (const auto& m : pareto_front(values).members) {
      std::vector<std::string> row{v, s};
      for (Eigen::Index i = 0; i < m.value.size(); ++i) row.push_back(format_number(m.value[i]));
      row.push_back(Environment::encode(objects[m.id]));
      front.row(row);
    }
  }
  CsvWriter metrics(dir / "metrics.csv",
                    {"variant", "HV", "HV_std", "Div", "Div_std", "Cor", "Cor_std", "L1", "L1_std"});
  for (Variant v : cfg.variants) {
    std::vector<double> hv, div, cor, l1;
    for (const auto* r : by_variant[v]) {
      hv.push_back(r->hypervolume);
      div.push_back(r->diversity);
      cor.push_back(r->correlation);
      l1.push_back(r->l1);
    }
    std::vector<std::string> row{to_string(v)};
    for (const auto& xs : {hv, div, cor, l1}) {
      const MeanStd ms = mean_std(xs);
      row.push_back(format_number(ms.mean));
      row.push_back(format_number(ms.std));
    }
    metrics.row(row);
  }
  return summary;
}

// ---------------------------------------------------------------------------
// MOBO scenario

/// HV* of the configured environment: from the fixture when one is named,
/// else by exhaustive enumeration.
inline double reference_hv_star(const RunConfig& cfg) {
  if (!cfg.hv_fixture.empty()) return load_hv_star(cfg.hv_fixture, cfg.env, cfg.objectives);
  const Environment env(cfg.env);
  const auto oracle = SyntheticOracle::reference(env, cfg.objectives);
  return hypervolume(exact_pareto_front([&](const State& x) { return oracle.evaluate(env, x); }, env));
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  MoboResult mobo;
  std::optional<MoboResult> baseline;
};

/// Runs (or, with `resume`, continues) one seed and writes its files under
/// `dir`: rounds.jsonl, rounds.csv, front.csv, baseline.csv,
/// train_round_<i>.csv and checkpoint.json.
inline SeedOutcome run_mobo_seed(const RunConfig& cfg, const MoboConfig& mobo_cfg,
                                 const fs::path& dir, bool resume, const Logger& log) {
  const Environment env(cfg.env);
  const auto oracle = SyntheticOracle::reference(env, cfg.objectives);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "checkpoint.json";
  std::optional<MoboState> state;
  if (resume && fs::exists(ckpt)) {
    std::ifstream in(ckpt);
    state = state_from_json(Json::parse(in), env);
    log("resuming " + dir.string() + " after round " + std::to_string(state->completed_round));
  }

  std::vector<std::vector<std::string>> rows;
  MoboHooks hooks;
  hooks.on_step = [&](int, const StepStats& s, double top) {
    rows.push_back({std::to_string(s.step), format_number(s.loss), to_string(s.source),
                    format_number(s.mean_reward), format_number(top)});
  };
  hooks.on_round = [&](const RoundReport& r) {
    if (r.round > 0) {
      CsvWriter w(dir / ("train_round_" + std::to_string(r.round) + ".csv"),
                  {"step", "loss", "source", "mean_reward",
                   "average_top" + std::to_string(mobo_cfg.top_k)});
      for (const auto& row : rows) w.row(row);
    }
    rows.clear();
    log("  round " + std::to_string(r.round) + ": HV " + format_number(r.hypervolume) +
        "  Div " + format_number(r.diversity) + "  Cor " + format_number(r.correlation) +
        "  (" + format_number(std::round(r.seconds * 10.0) / 10.0) + " s)");
  };
  hooks.on_checkpoint = [&](const MoboState& s) {
    const fs::path tmp = dir / "checkpoint.json.tmp";
    std::ofstream(tmp) << state_to_json(s).dump() << "\n";
    fs::rename(tmp, ckpt);
  };

  SeedOutcome out;
  out.seed = mobo_cfg.seed;
  out.mobo = run_mobo(mobo_cfg, env, oracle, hooks, state);

  {
    std::ofstream jsonl(dir / "rounds.jsonl");
    for (const auto& r : out.mobo.reports) jsonl << report_to_json(r).dump() << "\n";
  }
  CsvWriter rounds(dir / "rounds.csv", {"round", "HV", "Div", "Cor", "dataset_size"});
  for (const auto& r : out.mobo.reports) {
    rounds.row({std::to_string(r.round), format_number(r.hypervolume), format_number(r.diversity),
                format_number(r.correlation), std::to_string(r.dataset_size)});
  }
  std::vector<std::string> header;
  for (int m = 0; m < cfg.objectives; ++m) header.push_back("f" + std::to_string(m + 1));
  header.push_back("object");
  CsvWriter front(dir / "front.csv", header);
  for (const auto& m : out.mobo.front.members) {
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < m.value.size(); ++i) row.push_back(format_number(m.value[i]));
    row.push_back(Environment::encode(out.mobo.dataset.objects()[m.id]));
    front.row(row);
  }
  if (cfg.random_baseline) {
    out.baseline = run_random_baseline(mobo_cfg, env, oracle);
    CsvWriter base(dir / "baseline.csv", {"round", "HV", "Div"});
    for (const auto& r : out.baseline->reports) {
      base.row({std::to_string(r.round), format_number(r.hypervolume), format_number(r.diversity)});
    }
  }
  return out;
}

/// Aggregate HV/Div/Cor per round over seeds (and the random baseline).
inline void write_mobo_aggregate(const fs::path& dir, const std::vector<SeedOutcome>& seeds,
                                 double hv_star) {
  CsvWriter rounds(dir / "rounds.csv", {"method", "seed", "round", "HV", "Div", "Cor"});
  for (const auto& s : seeds) {
    for (const auto& r : s.mobo.reports) {
      rounds.row({"hngfn", std::to_string(s.seed), std::to_string(r.round),
                  format_number(r.hypervolume), format_number(r.diversity),
                  format_number(r.correlation)});
    }
    if (s.baseline) {
      for (const auto& r : s.baseline->reports) {
        rounds.row({"random", std::to_string(s.seed), std::to_string(r.round),
                    format_number(r.hypervolume), format_number(r.diversity), "nan"});
      }
    }
  }
  CsvWriter metrics(dir / "metrics.csv", {"method", "round", "HV", "HV_std", "HV_over_HVstar",
                                          "Div", "Div_std", "Cor", "Cor_std"});
  const std::size_t n_rounds = seeds.empty() ? 0 : seeds.front().mobo.reports.size();
  for (const char* method : {"hngfn", "random"}) {
    const bool random = std::string(method) == "random";
    if (random && (seeds.empty() || !seeds.front().baseline)) continue;
    for (std::size_t i = 0; i < n_rounds; ++i) {
      std::vector<double> hv, div, cor;
      for (const auto& s : seeds) {
        const auto& r = random ? s.baseline->reports[i] : s.mobo.reports[i];
        hv.push_back(r.hypervolume);
        if (std::isfinite(r.diversity)) div.push_back(r.diversity);
        if (std::isfinite(r.correlation)) cor.push_back(r.correlation);
      }
      const MeanStd h = mean_std(hv), d = mean_std(div), c = mean_std(cor);
      metrics.row({method, std::to_string(i), format_number(h.mean), format_number(h.std),
                   format_number(h.mean / hv_star), format_number(d.mean), format_number(d.std),
                   format_number(c.mean), format_number(c.std)});
    }
  }
}

inline std::string gamma_dir(double g) {
  std::ostringstream s;
  s << "gamma_" << std::fixed << std::setprecision(2) << g;
  return s.str();
}

inline void run_mobo_command(const RunConfig& cfg, bool resume, const Logger& log) {
  const double hv_star = reference_hv_star(cfg);
  log("mobo: " + cfg.env.describe() + ", HV* = " + format_number(hv_star));
  std::vector<std::optional<double>> gammas;
  if (cfg.gamma_sweep.empty()) {
    gammas.emplace_back();
  } else {
    for (double g : cfg.gamma_sweep) gammas.emplace_back(g);
  }
  for (const auto& g : gammas) {
    const fs::path dir = g ? fs::path(cfg.out) / gamma_dir(*g) : fs::path(cfg.out);
    std::vector<SeedOutcome> outcomes;
    for (std::uint64_t seed : cfg.seeds) {
      MoboConfig m = cfg.mobo;
      m.seed = seed;
      if (g) m.train.hindsight_gamma = *g;
      log("mobo seed " + std::to_string(seed) + (g ? " gamma " + format_number(*g) : ""));
      outcomes.push_back(
          run_mobo_seed(cfg, m, dir / ("seed_" + std::to_string(seed)), resume, log));
    }
    write_mobo_aggregate(dir, outcomes, hv_star);
  }
}

// ---------------------------------------------------------------------------
// Ablation: alpha grid x scalarization

inline std::string alpha_label(const Eigen::VectorXd& a) { return join_numbers(a, '-'); }

inline void run_ablation_command(const RunConfig& cfg, bool resume, const Logger& log) {
  const fs::path root(cfg.out);
  fs::create_directories(root);
  CsvWriter table(root / "ablation.csv",
                  {"alpha", "scalarization", "HV", "HV_std", "Div", "Div_std"});
  for (const auto& alpha : cfg.ablation_alphas) {
    for (Scalarization s : cfg.ablation_scalarizations) {
      const std::string cell = "alpha_" + alpha_label(alpha) + "_" + scalarization_name(s);
      std::vector<double> hv, div;
      for (std::uint64_t seed : cfg.seeds) {
        MoboConfig m = cfg.mobo;
        m.seed = seed;
        m.alpha = alpha;
        m.scalarization = s;
        m.validate(cfg.objectives);
        log("ablation " + cell + " seed " + std::to_string(seed));
        RunConfig no_baseline = cfg;
        no_baseline.random_baseline = false;
        const SeedOutcome o = run_mobo_seed(no_baseline, m,
                                            root / cell / ("seed_" + std::to_string(seed)),
                                            resume, log);
        hv.push_back(o.mobo.reports.back().hypervolume);
        // Batch diversity averaged over the BO rounds.
        std::vector<double> d;
        for (const auto& r : o.mobo.reports) {
          if (r.round > 0 && std::isfinite(r.diversity)) d.push_back(r.diversity);
        }
        div.push_back(mean_std(d).mean);
      }
      const MeanStd h = mean_std(hv), d = mean_std(div);
      table.row({alpha_label(alpha), scalarization_name(s), format_number(h.mean),
                 format_number(h.std), format_number(d.mean), format_number(d.std)});
    }
  }
}

}  // namespace hngfn

#endif  // HNGFN_EXPERIMENTS_HPP_
