// Command-line front end: generate synthetic benchmarks, fit models, score
// estimated graphs, run benchmark sweeps, and execute the verification
// battery. Exit codes: 0 success, 1 runtime failure, 2 usage/validation.

#include <gpm/config.hpp>
#include <gpm/eval.hpp>
#include <gpm/graphs.hpp>
#include <gpm/synthgen.hpp>
#include <gpm/train.hpp>
#include <gpm/types.hpp>
#include <gpm/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "basis.k",          "basis.alpha",      "basis.bandwidth_scale",
    "train.lr",         "train.beta1",      "train.beta2",
    "train.eps_adam",   "train.max_iters",  "train.tol",
    "train.tol_window", "train.batch",      "penalty.kind",
    "penalty.lambda",   "penalty.scad_a",   "penalty.mcp_gamma",
    "penalty.epsilon",  "threshold.policy", "threshold.tau",
    "standardize",      "seed",             "deterministic",
};

struct FitSettings {
  gpm::BasisConfig basis;
  gpm::PenaltyConfig penalty;
  gpm::TrainConfig train;
  gpm::ThresholdPolicy threshold;
  bool standardize_first = true;
  uint64_t seed = 0;
  bool deterministic = false;
};

FitSettings settings_from_config(const gpm::FlatConfig& cfg) {
  cfg.reject_unknown(kKnownKeys);
  FitSettings s;
  s.basis.k = static_cast<int>(cfg.get_int("basis.k", 100));
  s.basis.alpha = cfg.get_double("basis.alpha", 0.05);
  s.basis.bandwidth_scale = cfg.get_double("basis.bandwidth_scale", 1.0);
  s.train.lr = cfg.get_double("train.lr", 0.01);
  s.train.beta1 = cfg.get_double("train.beta1", 0.9);
  s.train.beta2 = cfg.get_double("train.beta2", 0.999);
  s.train.eps_adam = cfg.get_double("train.eps_adam", 1e-8);
  s.train.max_iters = static_cast<int>(cfg.get_int("train.max_iters", 2000));
  s.train.tol = cfg.get_double("train.tol", 1e-6);
  s.train.tol_window = static_cast<int>(cfg.get_int("train.tol_window", 20));
  const std::string batch = cfg.get_string("train.batch", "full");
  s.train.batch = batch == "full" ? 0 : std::stoi(batch);
  s.penalty.kind = gpm::penalty_kind_from_name(cfg.get_string("penalty.kind", "scad"));
  s.penalty.lambda = cfg.get_double("penalty.lambda", 0.1);
  s.penalty.scad_a = cfg.get_double("penalty.scad_a", 3.7);
  s.penalty.mcp_gamma = cfg.get_double("penalty.mcp_gamma", 3.0);
  s.penalty.epsilon = cfg.get_double("penalty.epsilon", 1e-6);
  const std::string policy = cfg.get_string("threshold.policy", "gap");
  if (policy == "gap") {
    s.threshold.kind = gpm::ThresholdPolicy::Kind::Gap;
  } else if (policy == "absolute") {
    s.threshold.kind = gpm::ThresholdPolicy::Kind::Absolute;
  } else {
    throw gpm::ConfigError("unknown threshold policy '" + policy + "'");
  }
  s.threshold.tau = cfg.get_double("threshold.tau", 1e-3);
  s.standardize_first = cfg.get_bool("standardize", true);
  s.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  s.train.seed = s.seed;
  s.deterministic = cfg.get_bool("deterministic", false);
  s.train.deterministic = s.deterministic;
  return s;
}

gpm::Dataset load_any_dataset(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream f(path);
    if (!f) throw gpm::DataError("cannot open dataset file '" + path + "'");
    json j;
    f >> j;
    return gpm::dataset_from_json(j);
  }
  return gpm::load_dataset_csv(path);
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw gpm::DataError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << "\n";
}

// Attaches every fit-related flag to a subcommand; each flag that the user
// passes lands in `overrides` under its dotted config key.
void add_fit_flags(CLI::App* cmd, gpm::FlatConfig& overrides, std::string& config_path) {
  cmd->add_option("--config", config_path, "key=value config file; flags override it");
  auto bind = [cmd, &overrides](const std::string& flag, const std::string& key,
                                const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.set(key, v); }, help);
  };
  bind("--k", "basis.k", "feature count (capped at n; default 100)");
  bind("--alpha", "basis.alpha", "quadratic anchor weight (default 0.05)");
  bind("--bandwidth-scale", "basis.bandwidth_scale",
       "multiplier on the median-heuristic bandwidths (default 1)");
  bind("--lr", "train.lr", "Adam learning rate (default 0.01)");
  bind("--max-iters", "train.max_iters", "iteration cap (default 2000)");
  bind("--tol", "train.tol",
       "relative windowed loss-change stop; 0 disables (default 1e-6)");
  bind("--batch", "train.batch", "minibatch size or 'full' (default full)");
  bind("--penalty", "penalty.kind", "l1 | adaptive-l1 | scad | mcp (default scad)");
  bind("--lambda", "penalty.lambda", "penalty strength in [0,1] (default 0.1)");
  bind("--scad-a", "penalty.scad_a", "SCAD shape (default 3.7)");
  bind("--mcp-gamma", "penalty.mcp_gamma", "MCP shape (default 3.0)");
  bind("--epsilon", "penalty.epsilon", "adaptive-l1 pilot offset (default 1e-6)");
  bind("--threshold", "threshold.policy", "gap | absolute (default gap)");
  bind("--tau", "threshold.tau", "absolute threshold value (default 1e-3)");
  bind("--seed", "seed", "random seed (default 0)");
  cmd->add_flag_function(
      "--deterministic",
      [&overrides](int64_t) { overrides.set("deterministic", "true"); },
      "single-threaded execution with fixed reduction order");
  cmd->add_flag_function(
      "--no-standardize",
      [&overrides](int64_t) { overrides.set("standardize", "false"); },
      "skip standardization of continuous columns");
}

FitSettings resolve_settings(const std::string& config_path,
                             const gpm::FlatConfig& overrides) {
  gpm::FlatConfig cfg;
  if (!config_path.empty()) cfg = gpm::FlatConfig::from_file(config_path);
  cfg.merge_overrides(overrides);
  return settings_from_config(cfg);
}

int run_generate(const gpm::GenSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  gpm::Generated gen = gpm::generate(spec);
  gpm::save_dataset_csv(gen.data, (fs::path(out_dir) / "dataset.csv").string());
  gpm::save_graph_json(gen.truth, (fs::path(out_dir) / "truth.json").string());
  write_json(gpm::genspec_to_json(spec), fs::path(out_dir) / "provenance.json");
  std::cout << "wrote dataset.csv, truth.json, provenance.json to " << out_dir << "\n";
  return 0;
}

int run_fit(const std::string& data_path, const FitSettings& s, const std::string& out_dir) {
  fs::create_directories(out_dir);
  gpm::Dataset raw = load_any_dataset(data_path);
  gpm::Dataset ds = s.standardize_first ? gpm::standardize(raw).first : raw;

  std::ofstream log((fs::path(out_dir) / "train_log.jsonl").string());
  gpm::TrainConfig tc = s.train;
  const std::string checkpoint_path = (fs::path(out_dir) / "checkpoint.json").string();
  tc.on_iteration = [&](int iter, const gpm::EnergyModel& model,
                        const gpm::LossReport& rep) {
    json entry;
    entry["iter"] = iter;
    entry["total"] = rep.total;
    entry["penalty"] = rep.penalty;
    entry["per_variable"] =
        std::vector<double>(rep.per_variable.begin(), rep.per_variable.end());
    log << entry.dump() << "\n";
    if (iter % 500 == 0) gpm::save_model_json(model, checkpoint_path);
  };

  gpm::FitResult res = gpm::fit(ds, s.basis, s.penalty, tc, s.threshold);
  gpm::save_model_json(res.model, (fs::path(out_dir) / "model.json").string());
  gpm::save_omega_csv(res.gpm, (fs::path(out_dir) / "omega_squared.csv").string());
  gpm::GpmMatrix rooted = res.gpm;
  rooted.convention = gpm::OmegaConvention::Rooted;
  for (int i = 0; i < rooted.d(); ++i)
    for (int j = 0; j < rooted.d(); ++j)
      if (i != j && rooted.kind(i, j) == gpm::PairKind::CC)
        rooted.omega(i, j) = std::sqrt(rooted.omega(i, j));
  gpm::save_omega_csv(rooted, (fs::path(out_dir) / "omega_rooted.csv").string());
  gpm::save_graph_json(res.graph, (fs::path(out_dir) / "graph.json").string());

  std::cout << "fit finished: " << res.history.size() << " iterations, "
            << res.graph.edge_count() << " edges"
            << (res.monotone_warning ? " (non-monotone loss warning)" : "") << "\n";
  return 0;
}

int run_eval(const std::string& estimate_path, const std::string& truth_path) {
  const gpm::UndirectedGraph est = gpm::load_graph_json(estimate_path);
  const gpm::UndirectedGraph truth = gpm::load_graph_json(truth_path);
  int extra = 0, missing = 0;
  if (est.d() != truth.d())
    throw gpm::GraphError("graphs have different vertex counts");
  for (int i = 0; i < est.d(); ++i)
    for (int j = i + 1; j < est.d(); ++j) {
      if (est.has_edge(i, j) && !truth.has_edge(i, j)) ++extra;
      if (!est.has_edge(i, j) && truth.has_edge(i, j)) ++missing;
    }
  json out;
  out["hamming"] = gpm::hamming(est, truth);
  out["d"] = est.d();
  out["extra_edges"] = extra;
  out["missing_edges"] = missing;
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric Markov network structure learning via regularized "
               "score matching and a generalized precision matrix"};
  app.require_subcommand(1);

  // generate ----------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset with ground truth");
  std::string gen_family = "butterfly-c", gen_out = ".";
  int gen_pairs = 0, gen_d = 8, gen_n = 1000, gen_card = 3, gen_mlp = 16;
  int gen_card_min = 2, gen_card_max = 4;
  double gen_density = 0.3;
  uint64_t gen_seed = 0;
  gen_cmd->add_option("--family", gen_family,
                      "butterfly-c|butterfly-d|butterfly-m|randgraph-c|randgraph-d|randgraph-m");
  gen_cmd->add_option("--pairs", gen_pairs, "butterfly pair count (d = 2 * pairs)");
  gen_cmd->add_option("--d", gen_d, "variable count (default 8)");
  gen_cmd->add_option("--n", gen_n, "sample count (default 1000)");
  gen_cmd->add_option("--seed", gen_seed, "random seed (default 0)");
  gen_cmd->add_option("--cardinality", gen_card, "category count for discrete butterflies (default 3)");
  gen_cmd->add_option("--density", gen_density, "random-graph edge density (default 0.3)");
  gen_cmd->add_option("--mlp-width", gen_mlp, "SEM hidden width (default 16)");
  gen_cmd->add_option("--card-min", gen_card_min, "random-graph min cardinality (default 2)");
  gen_cmd->add_option("--card-max", gen_card_max, "random-graph max cardinality (default 4)");
  gen_cmd->add_option("--out", gen_out, "output directory (default .)");

  // fit ---------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and extract the estimated graph");
  std::string fit_data, fit_out = ".", fit_config;
  gpm::FlatConfig fit_overrides;
  fit_cmd->add_option("data", fit_data, "dataset CSV (or .json)")->required();
  fit_cmd->add_option("--out", fit_out, "output directory (default .)");
  add_fit_flags(fit_cmd, fit_overrides, fit_config);

  // eval ----------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "compare an estimated graph against ground truth");
  std::string eval_est, eval_truth;
  eval_cmd->add_option("--estimate", eval_est, "estimated graph JSON")->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth graph JSON")->required();

  // benchmark -----------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("benchmark", "run a sweep and score Hamming distances");
  std::string bench_preset = "butterfly-small", bench_out = "bench_out", bench_config;
  int bench_jobs = 1, bench_seeds = 5, bench_n = 1000;
  bool bench_scaling = false;
  std::vector<int> bench_dlist;
  gpm::FlatConfig bench_overrides;
  bench_cmd->add_option("--preset", bench_preset,
                        "butterfly-small | butterfly-all | randgraph-small | scaling");
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_cmd->add_option("--jobs", bench_jobs, "parallel cells (default 1)");
  bench_cmd->add_option("--seeds", bench_seeds, "trials per cell (default 5)");
  bench_cmd->add_option("--n", bench_n, "sample count per cell (default 1000)");
  bench_cmd->add_option("--d-list", bench_dlist, "explicit d list")->delimiter(',');
  bench_cmd->add_flag("--scaling", bench_scaling, "measure the wall-time scaling curve");
  add_fit_flags(bench_cmd, bench_overrides, bench_config);

  // verify ----------------------------------------------------------------------
  auto* verify_cmd = app.add_subcommand("verify", "run the exact verification battery");
  int verify_trials = 200;
  uint64_t verify_seed = 1;
  verify_cmd->add_option("--trials", verify_trials, "discrete tables to enumerate (default 200)");
  verify_cmd->add_option("--seed", verify_seed, "random seed (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) {
      gpm::GenSpec spec;
      spec.family = gpm::family_from_name(gen_family);
      spec.d = gen_pairs > 0 ? 2 * gen_pairs : gen_d;
      spec.n = gen_n;
      spec.seed = gen_seed;
      spec.cardinality = gen_card;
      spec.edge_density = gen_density;
      spec.mlp_width = gen_mlp;
      spec.card_min = gen_card_min;
      spec.card_max = gen_card_max;
      try {
        spec.validate();
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
      return run_generate(spec, gen_out);
    }

    if (*fit_cmd) {
      FitSettings s;
      try {
        s = resolve_settings(fit_config, fit_overrides);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
      if (!fs::exists(fit_data)) {
        std::cerr << "error: dataset file '" << fit_data << "' does not exist\n";
        return 2;
      }
      return run_fit(fit_data, s, fit_out);
    }

    if (*eval_cmd) {
      if (!fs::exists(eval_est) || !fs::exists(eval_truth)) {
        std::cerr << "error: graph file missing\n";
        return 2;
      }
      try {
        return run_eval(eval_est, eval_truth);
      } catch (const gpm::GraphError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }

    if (*bench_cmd) {
      FitSettings s;
      try {
        s = resolve_settings(bench_config, bench_overrides);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
      fs::create_directories(bench_out);
      gpm::FitConfigBundle bundle{s.basis, s.penalty, s.train, s.threshold,
                                  s.standardize_first};
      if (bench_scaling || bench_preset == "scaling") {
        std::vector<int> dlist = bench_dlist.empty() ? std::vector<int>{50, 100, 200}
                                                     : bench_dlist;
        auto curve = gpm::scaling_curve(gpm::GenFamily::ButterflyContinuous, dlist,
                                        bench_n, bundle, s.seed);
        json points = json::array();
        for (const auto& p : curve.points)
          points.push_back({{"d", p.d}, {"wall_time", p.wall_time}});
        json out = {{"points", points}};
        if (curve.slope) out["loglog_slope"] = *curve.slope;
        write_json(out, fs::path(bench_out) / "scaling.json");
        std::cout << out.dump(2) << "\n";
        return 0;
      }

      gpm::BenchmarkSpec spec;
      spec.fit = bundle;
      spec.jobs = s.deterministic ? 1 : bench_jobs;
      spec.seeds.clear();
      for (int t = 0; t < bench_seeds; ++t) spec.seeds.push_back(s.seed + t);
      spec.results_path = (fs::path(bench_out) / "results.csv").string();
      auto add_cells = [&](gpm::GenFamily family, std::vector<int> ds, int card = 3) {
        for (int d : ds) {
          gpm::GenSpec cell;
          cell.family = family;
          cell.d = d;
          cell.n = bench_n;
          cell.cardinality = card;
          spec.cells.push_back(cell);
        }
      };
      if (bench_preset == "butterfly-small") {
        add_cells(gpm::GenFamily::ButterflyContinuous,
                  bench_dlist.empty() ? std::vector<int>{4, 8} : bench_dlist);
      } else if (bench_preset == "butterfly-all") {
        add_cells(gpm::GenFamily::ButterflyContinuous, {8});
        add_cells(gpm::GenFamily::ButterflyDiscrete, {6}, 2);
        add_cells(gpm::GenFamily::ButterflyMixed, {6}, 2);
      } else if (bench_preset == "randgraph-small") {
        add_cells(gpm::GenFamily::RandomGraphContinuous,
                  bench_dlist.empty() ? std::vector<int>{6} : bench_dlist);
        add_cells(gpm::GenFamily::RandomGraphDiscrete,
                  bench_dlist.empty() ? std::vector<int>{6} : bench_dlist);
        add_cells(gpm::GenFamily::RandomGraphMixed,
                  bench_dlist.empty() ? std::vector<int>{6} : bench_dlist);
      } else {
        std::cerr << "error: unknown preset '" << bench_preset << "'\n";
        return 2;
      }
      auto rows = gpm::run_benchmark(spec);
      write_json(gpm::summarize_results(rows), fs::path(bench_out) / "summary.json");
      std::cout << "wrote " << rows.size() << " rows to " << spec.results_path << "\n";
      return 0;
    }

    if (*verify_cmd) {
      gpm::VerifyOptions opts;
      opts.trials = verify_trials;
      opts.seed = verify_seed;
      const gpm::VerifyReport report = gpm::run_verify_battery(opts);
      std::cout << report.to_json().dump(2) << "\n";
      return report.pass ? 0 : 1;
    }
  } catch (const gpm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
