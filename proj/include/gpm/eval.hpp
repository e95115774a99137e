#pragma once

// Benchmark harness: sweep generator specs and seeds, fit each cell, score
// the recovered graph by Hamming distance, and measure how fit wall-time
// scales with the variable count. Cells are isolated; a failing cell is
// recorded rather than aborting the sweep, and completed cells are skipped
// on re-runs via their (family, d, n, seed) key.

#include <gpm/gpm_matrix.hpp>
#include <gpm/graphs.hpp>
#include <gpm/synthgen.hpp>
#include <gpm/train.hpp>
#include <gpm/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace gpm {

struct FitConfigBundle {
  BasisConfig basis;
  PenaltyConfig penalty;
  TrainConfig train;
  ThresholdPolicy threshold;
  bool standardize_first = true;
};

struct BenchmarkSpec {
  std::vector<GenSpec> cells;   // seed field is overridden per trial
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  FitConfigBundle fit;
  std::string results_path;     // empty = in-memory only
  int jobs = 1;
};

struct ResultRow {
  std::string family;
  int d = 0;
  int n = 0;
  uint64_t seed = 0;
  int hamming = -1;
  double wall_time = 0.0;
  bool converged = false;

  std::string key() const {
    return family + "/" + std::to_string(d) + "/" + std::to_string(n) + "/" +
           std::to_string(seed);
  }
};

struct EstimateOutcome {
  UndirectedGraph graph;
  double wall_time = 0.0;
  bool converged = true;
};

using Estimator = std::function<EstimateOutcome(const Dataset&, const GenSpec&)>;

/// Default estimator: optional standardization, then a full fit.
inline Estimator make_fit_estimator(const FitConfigBundle& cfg) {
  return [cfg](const Dataset& raw, const GenSpec& cell) {
    Dataset ds = raw;
    if (cfg.standardize_first) ds = standardize(raw).first;
    TrainConfig tc = cfg.train;
    tc.seed = cell.seed;
    FitResult res = fit(ds, cfg.basis, cfg.penalty, tc, cfg.threshold);
    return EstimateOutcome{res.graph, res.wall_time, true};
  };
}

inline void save_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << "family,d,n,seed,hamming,wall_time,converged\n";
  for (const auto& r : rows)
    f << r.family << "," << r.d << "," << r.n << "," << r.seed << "," << r.hamming << ","
      << detail::fmt_full(r.wall_time) << "," << (r.converged ? 1 : 0) << "\n";
}

inline std::vector<ResultRow> load_results_csv(const std::string& path) {
  std::ifstream f(path);
  std::vector<ResultRow> rows;
  if (!f) return rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 7) continue;
    ResultRow r;
    r.family = cells[0];
    r.d = std::stoi(cells[1]);
    r.n = std::stoi(cells[2]);
    r.seed = std::stoull(cells[3]);
    r.hamming = std::stoi(cells[4]);
    r.wall_time = std::stod(cells[5]);
    r.converged = cells[6] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Mean/sd Hamming per (family, d) for external plotting.
inline nlohmann::json summarize_results(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : rows)
    if (r.converged) groups[{r.family, r.d}].push_back(r.hamming);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, vals] : groups) {
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var = vals.size() > 1 ? var / (vals.size() - 1) : 0.0;
    out.push_back({{"family", key.first},
                   {"d", key.second},
                   {"trials", vals.size()},
                   {"mean_hamming", mean},
                   {"sd_hamming", std::sqrt(var)}});
  }
  return out;
}

/// Runs every (cell, seed) combination; rows come back sorted by key so the
/// result table is stable regardless of job count.
inline std::vector<ResultRow> run_benchmark(const BenchmarkSpec& spec,
                                            const Estimator& estimator) {
  std::vector<ResultRow> done =
      spec.results_path.empty() ? std::vector<ResultRow>{} : load_results_csv(spec.results_path);
  std::map<std::string, ResultRow> table;
  for (const auto& r : done) table[r.key()] = r;

  struct Job {
    GenSpec cell;
    ResultRow row;
  };
  std::vector<Job> jobs;
  for (const auto& cell_spec : spec.cells) {
    for (uint64_t seed : spec.seeds) {
      GenSpec cell = cell_spec;
      cell.seed = seed;
      ResultRow row;
      row.family = family_name(cell.family);
      row.d = cell.d;
      row.n = cell.n;
      row.seed = seed;
      if (table.count(row.key())) continue;  // idempotent re-run
      jobs.push_back({cell, row});
    }
  }

  std::mutex table_mutex;
  auto run_job = [&](Job& job) {
    ResultRow row = job.row;
    try {
      Generated gen = generate(job.cell);
      EstimateOutcome est = estimator(gen.data, job.cell);
      row.hamming = hamming(est.graph, gen.truth);
      row.wall_time = est.wall_time;
      row.converged = est.converged;
    } catch (const std::exception&) {
      row.hamming = -1;
      row.converged = false;
    }
    std::lock_guard<std::mutex> lock(table_mutex);
    table[row.key()] = row;
    if (!spec.results_path.empty()) {
      std::vector<ResultRow> rows;
      for (const auto& [k, r] : table) rows.push_back(r);
      save_results_csv(rows, spec.results_path);  // atomic per cell: whole rewrite
    }
  };

  if (spec.jobs <= 1) {
    for (auto& job : jobs) run_job(job);
  } else {
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    for (int t = 0; t < spec.jobs; ++t)
      workers.emplace_back([&] {
        for (;;) {
          const size_t idx = next.fetch_add(1);
          if (idx >= jobs.size()) return;
          run_job(jobs[idx]);
        }
      });
    for (auto& w : workers) w.join();
  }

  std::vector<ResultRow> rows;
  for (const auto& [k, r] : table) rows.push_back(r);
  return rows;
}

inline std::vector<ResultRow> run_benchmark(const BenchmarkSpec& spec) {
  return run_benchmark(spec, make_fit_estimator(spec.fit));
}

struct ScalingPoint {
  int d = 0;
  double wall_time = 0.0;
};

struct ScalingCurve {
  std::vector<ScalingPoint> points;
  std::optional<double> slope;  // least-squares slope of log time vs log d
};

/// Fit wall-time as a function of d for one family; generation time is
/// excluded, characterization-matrix extraction included.
inline ScalingCurve scaling_curve(GenFamily family, const std::vector<int>& d_list, int n,
                                  const FitConfigBundle& cfg, uint64_t seed = 0) {
  for (size_t i = 1; i < d_list.size(); ++i)
    if (d_list[i] <= d_list[i - 1])
      throw std::invalid_argument("scaling_curve: d list must ascend");
  ScalingCurve curve;
  const Estimator est = make_fit_estimator(cfg);
  for (int d : d_list) {
    GenSpec cell;
    cell.family = family;
    cell.d = d;
    cell.n = n;
    cell.seed = seed;
    Generated gen = generate(cell);
    EstimateOutcome out = est(gen.data, cell);
    curve.points.push_back({d, out.wall_time});
  }
  if (curve.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(curve.points.size());
    for (const auto& p : curve.points) {
      const double x = std::log(static_cast<double>(p.d));
      const double y = std::log(std::max(p.wall_time, 1e-9));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    curve.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return curve;
}

}  // namespace gpm
