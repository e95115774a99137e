#include <gpm/eval.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>

using namespace gpm;
namespace fs = std::filesystem;

namespace {

BenchmarkSpec tiny_spec(int cells = 1, int seeds = 3) {
  BenchmarkSpec spec;
  for (int c = 0; c < cells; ++c) {
    GenSpec cell;
    cell.family = GenFamily::ButterflyContinuous;
    cell.d = 4 + 2 * c;
    cell.n = 60;
    spec.cells.push_back(cell);
  }
  spec.seeds.clear();
  for (int s = 0; s < seeds; ++s) spec.seeds.push_back(s);
  return spec;
}

Estimator oracle_estimator() {
  return [](const Dataset&, const GenSpec& cell) {
    Generated gen = generate(cell);  // pure function of the cell spec
    return EstimateOutcome{gen.truth, 0.01, true};
  };
}

}  // namespace

TEST_CASE("an oracle estimator scores zero everywhere") {
  BenchmarkSpec spec = tiny_spec(2, 3);
  auto rows = run_benchmark(spec, oracle_estimator());
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.hamming == 0);
    CHECK(r.converged);
  }
}

TEST_CASE("an empty spec yields an empty table") {
  BenchmarkSpec spec;
  spec.cells.clear();
  CHECK(run_benchmark(spec, oracle_estimator()).empty());
}

TEST_CASE("benchmarks are deterministic and idempotent") {
  const std::string path = (fs::temp_directory_path() / "gpm_bench_results.csv").string();
  fs::remove(path);
  BenchmarkSpec spec = tiny_spec(1, 3);
  spec.results_path = path;

  std::atomic<int> calls{0};
  Estimator counting = [&calls](const Dataset& ds, const GenSpec& cell) {
    ++calls;
    return oracle_estimator()(ds, cell);
  };

  auto first = run_benchmark(spec, counting);
  CHECK(calls.load() == 3);
  auto again = run_benchmark(spec, counting);
  CHECK(calls.load() == 3);  // completed cells are skipped
  REQUIRE(first.size() == again.size());
  for (size_t t = 0; t < first.size(); ++t) {
    CHECK(first[t].key() == again[t].key());
    CHECK(first[t].hamming == again[t].hamming);
  }
  auto loaded = load_results_csv(path);
  CHECK(loaded.size() == first.size());
}

TEST_CASE("one failing cell never corrupts the others") {
  BenchmarkSpec spec = tiny_spec(1, 4);
  Estimator flaky = [](const Dataset& ds, const GenSpec& cell) {
    if (cell.seed == 2) throw std::runtime_error("injected failure");
    return oracle_estimator()(ds, cell);
  };
  auto rows = run_benchmark(spec, flaky);
  REQUIRE(rows.size() == 4);
  int failed = 0;
  for (const auto& r : rows) {
    if (!r.converged) {
      ++failed;
      CHECK(r.seed == 2);
      CHECK(r.hamming == -1);
    } else {
      CHECK(r.hamming == 0);
    }
  }
  CHECK(failed == 1);
}

TEST_CASE("parallel execution returns the same table") {
  BenchmarkSpec spec = tiny_spec(2, 4);
  auto serial = run_benchmark(spec, oracle_estimator());
  spec.jobs = 4;
  auto parallel = run_benchmark(spec, oracle_estimator());
  REQUIRE(serial.size() == parallel.size());
  for (size_t t = 0; t < serial.size(); ++t) CHECK(serial[t].key() == parallel[t].key());
}

TEST_CASE("summaries aggregate by family and size") {
  std::vector<ResultRow> rows;
  for (int h : {0, 2, 4}) {
    ResultRow r;
    r.family = "butterfly-c";
    r.d = 4;
    r.n = 60;
    r.seed = static_cast<uint64_t>(h);
    r.hamming = h;
    r.converged = true;
    rows.push_back(r);
  }
  auto summary = summarize_results(rows);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0]["mean_hamming"].get<double>() == 2.0);
  CHECK(summary[0]["trials"].get<int>() == 3);
}

TEST_CASE("scaling curves report a slope only with two or more points") {
  FitConfigBundle cfg;
  cfg.basis.k = 20;
  cfg.penalty.kind = PenaltyKind::L1;
  cfg.penalty.lambda = 0.0;
  cfg.train.max_iters = 25;
  cfg.train.tol = 0.0;

  ScalingCurve single = scaling_curve(GenFamily::ButterflyContinuous, {6}, 80, cfg);
  CHECK(single.points.size() == 1);
  CHECK_FALSE(single.slope.has_value());

  ScalingCurve multi = scaling_curve(GenFamily::ButterflyContinuous, {4, 8, 12}, 80, cfg);
  REQUIRE(multi.slope.has_value());
  for (const auto& p : multi.points) CHECK(p.wall_time > 0);

  CHECK_THROWS_AS(scaling_curve(GenFamily::ButterflyContinuous, {8, 4}, 80, cfg),
                  std::invalid_argument);
}

TEST_CASE("result csv round trips") {
  std::vector<ResultRow> rows(2);
  rows[0] = {"butterfly-c", 4, 60, 1, 3, 0.125, true};
  rows[1] = {"randgraph-m", 10, 500, 2, 7, 2.5, false};
  const std::string path = (fs::temp_directory_path() / "gpm_rows_roundtrip.csv").string();
  save_results_csv(rows, path);
  auto back = load_results_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].key() == rows[0].key());
  CHECK(back[1].wall_time == rows[1].wall_time);
  CHECK(back[1].converged == rows[1].converged);
}
