#include <gpm/oracle.hpp>
#include <gpm/scorematch.hpp>
#include <gpm/synthgen.hpp>
#include <gpm/train.hpp>
#include <gpm/verify.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace gpm;

namespace {

/// Pure-anchor model (no feature weight) over the given schema.
EnergyModel anchor_model(const Schema& schema, double alpha) {
  FeatureBasis basis;
  basis.alpha = alpha;
  basis.centers = Eigen::MatrixXd::Zero(1, schema.size());
  basis.bandwidth = Eigen::VectorXd::Ones(schema.size());
  basis.codebook.resize(schema.size());
  for (int j = 0; j < schema.size(); ++j)
    if (schema.is_discrete(j)) basis.codebook[j] = default_codes(schema.cardinality(j));
  return EnergyModel(schema, basis);
}

Dataset mixed_rows(uint64_t seed, int n = 50) {
  Schema schema({continuous_var("x"), discrete_var("a", 3), continuous_var("y"),
                 discrete_var("b", 2)});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd rows(n, 4);
  for (int i = 0; i < n; ++i) {
    rows(i, 0) = gauss(rng);
    rows(i, 1) = static_cast<double>(rng() % 3);
    rows(i, 2) = gauss(rng);
    rows(i, 3) = static_cast<double>(rng() % 2);
  }
  return Dataset{schema, rows};
}

}  // namespace

TEST_CASE("continuous term closed forms for the quadratic model") {
  Schema schema({continuous_var("x")});
  EnergyModel model = anchor_model(schema, 0.5);
  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK_THAT(continuous_term(model, x, 0), Catch::Matchers::WithinAbs(-1.0, 1e-14));
  x << 1.0;
  CHECK_THAT(continuous_term(model, x, 0), Catch::Matchers::WithinAbs(-0.5, 1e-14));
  CHECK_THROWS_AS(discrete_term(model, x, 0), ModelError);
}

TEST_CASE("discrete term closed forms for the flat model") {
  Schema schema({discrete_var("a", 3), discrete_var("b", 2)});
  EnergyModel model = anchor_model(schema, 0.0);
  Eigen::VectorXd x(2);
  x << 1, 0;
  CHECK_THAT(discrete_term(model, x, 0), Catch::Matchers::WithinAbs(-4.5, 1e-12));
  CHECK_THAT(discrete_term(model, x, 1), Catch::Matchers::WithinAbs(-2.0, 1e-12));
  CHECK_THROWS_AS(continuous_term(model, x, 0), ModelError);
}

TEST_CASE("mixed rows add the two closed forms") {
  Schema schema({continuous_var("x"), discrete_var("b", 2)});
  EnergyModel model = anchor_model(schema, 0.5);
  Eigen::MatrixXd rows(2, 2);
  rows << 0, 0, 0, 1;
  Dataset ds{schema, rows};
  LossReport rep = mixed_loss(model, ds);
  CHECK_THAT(rep.per_variable[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  CHECK_THAT(rep.per_variable[1], Catch::Matchers::WithinAbs(-2.0, 1e-12));
  CHECK_THAT(rep.total, Catch::Matchers::WithinAbs(-3.0, 1e-12));
}

TEST_CASE("homogeneous datasets reduce to the single-type objectives") {
  Dataset ds = mixed_rows(3);
  FeatureBasis basis = build_basis(ds, 20, 5);
  EnergyModel model(ds.schema, basis);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 0.5);
  Eigen::VectorXd theta(20);
  for (int k = 0; k < 20; ++k) theta[k] = gauss(rng);
  model.set_theta(theta);

  LossReport rep = mixed_loss(model, ds);
  double manual = 0;
  for (int r = 0; r < ds.n(); ++r) {
    const Eigen::VectorXd row = ds.rows.row(r);
    for (int i = 0; i < ds.d(); ++i)
      manual += ds.schema.is_continuous(i) ? continuous_term(model, row, i)
                                           : discrete_term(model, row, i);
  }
  manual /= ds.n();
  CHECK_THAT(rep.total, Catch::Matchers::WithinAbs(manual, 1e-10));
}

TEST_CASE("fused evaluator matches the per-term template path") {
  Dataset ds = mixed_rows(17);
  FeatureBasis basis = build_basis(ds, 25, 19);
  EnergyModel model(ds.schema, basis);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0.0, 0.8);
  Eigen::VectorXd theta(25);
  for (int k = 0; k < 25; ++k) theta[k] = gauss(rng);
  model.set_theta(theta);
  const LossReport generic = mixed_loss(model, ds);
  const LossAndGrad fused = LossEvaluator(model, ds).evaluate(theta);
  CHECK_THAT(fused.report.total, Catch::Matchers::WithinAbs(generic.total, 1e-10));
  CHECK((fused.report.per_variable - generic.per_variable).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("discrete term matches the enumeration oracle on a binary pair") {
  Schema schema({discrete_var("a", 2), discrete_var("b", 2)});
  std::mt19937_64 rng(23);
  TabularDistribution td = random_joint_table(schema, rng);
  EnergyModel base = random_discrete_model(schema, 6, rng);
  for (int draw = 0; draw < 10; ++draw) {
    EnergyModel model = base;
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd theta(model.K());
    for (int k = 0; k < model.K(); ++k) theta[k] = gauss(rng);
    model.set_theta(theta);

    auto forms = exact_discrete_objective_constant(
        td, [&](const Eigen::VectorXd& row) { return model.log_density(row); });

    // expectation of the per-variable terms over the exact joint
    double expectation = 0;
    for (int s = 0; s < td.state_count(); ++s) {
      const auto vals = td.unrank(s);
      Eigen::VectorXd row(2);
      row << vals[0], vals[1];
      expectation +=
          td.prob_state(s) * (discrete_term(model, row, 0) + discrete_term(model, row, 1));
    }
    CHECK_THAT(forms.model_only, Catch::Matchers::WithinAbs(expectation, 1e-10));
    // identity between the two objective forms, theta-independent constant
    CHECK_THAT(forms.data_matched - 2.0 * forms.model_only,
               Catch::Matchers::WithinAbs(forms.constant, 1e-12));
  }
}

TEST_CASE("fitting a 1-d gaussian drives the score toward -x") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Schema schema({continuous_var("x")});
  Eigen::MatrixXd rows(2000, 1);
  for (int i = 0; i < 2000; ++i) rows(i, 0) = gauss(rng);
  Dataset ds{schema, rows};

  BasisConfig basis;
  basis.k = 100;
  PenaltyConfig pen;
  pen.kind = PenaltyKind::L1;
  pen.lambda = 0.0;
  TrainConfig train;
  train.max_iters = 800;
  train.seed = 1;
  FitResult res = fit(ds, basis, pen, train);

  double mse = 0;
  int count = 0;
  for (double x = -2.0; x <= 2.0 + 1e-9; x += 0.05) {
    Eigen::VectorXd row(1);
    row << x;
    const double err = res.model.grad(row, 0) - (-x);
    mse += err * err;
    ++count;
  }
  mse /= count;
  CHECK(mse < 0.05);
}

TEST_CASE("loss gradient vanishes at the calibrated symmetric fixture") {
  // single feature at the origin, unit bandwidth, alpha = 1/2: the two
  // gradient contributions cancel exactly at |x| = 1/sqrt(2 alpha + 1)
  Schema schema({continuous_var("x")});
  FeatureBasis basis;
  basis.alpha = 0.5;
  basis.centers = Eigen::MatrixXd::Zero(1, 1);
  basis.bandwidth = Eigen::VectorXd::Ones(1);
  basis.codebook.resize(1);
  EnergyModel model(schema, basis);

  const double xstar = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd rows(2, 1);
  rows << xstar, -xstar;
  Dataset ds{schema, rows};
  const Eigen::VectorXd grad = loss_theta_gradient(model, ds);
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("loss gradient matches finite differences") {
  Dataset ds = mixed_rows(31, 40);
  FeatureBasis basis = build_basis(ds, 15, 37);
  EnergyModel model(ds.schema, basis);
  LossEvaluator eval(model, ds);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss(0.0, 0.6);
  Eigen::VectorXd theta(15);
  for (int k = 0; k < 15; ++k) theta[k] = gauss(rng);

  const Eigen::VectorXd analytic = eval.evaluate(theta).grad;
  const double h = 1e-5;
  Eigen::VectorXd fd(15);
  for (int k = 0; k < 15; ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    fd[k] = (eval.evaluate(tp).report.total - eval.evaluate(tm).report.total) / (2 * h);
  }
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
  CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
}

TEST_CASE("single-row gradient equals the row mean at n = 1") {
  Dataset ds = mixed_rows(43, 1);
  FeatureBasis basis = build_basis(ds, 1, 47);
  EnergyModel model(ds.schema, basis);
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.3);
  model.set_theta(theta);
  LossEvaluator eval(model, ds);
  const Eigen::VectorXd whole = eval.evaluate(theta).grad;
  const Eigen::VectorXd single = eval.evaluate(theta, {0}).grad;
  CHECK((whole - single).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the loss is invariant to row order") {
  Dataset ds = mixed_rows(53, 30);
  FeatureBasis basis = build_basis(ds, 12, 59);
  EnergyModel model(ds.schema, basis);
  std::mt19937_64 rng(61);
  std::normal_distribution<double> gauss(0.0, 0.5);
  Eigen::VectorXd theta(12);
  for (int k = 0; k < 12; ++k) theta[k] = gauss(rng);
  model.set_theta(theta);

  Dataset shuffled = ds;
  std::vector<int> perm(ds.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < ds.n(); ++i) shuffled.rows.row(i) = ds.rows.row(perm[i]);

  CHECK_THAT(mixed_loss(model, shuffled).total,
             Catch::Matchers::WithinAbs(mixed_loss(model, ds).total, 1e-12));
}

TEST_CASE("fitted score deviation shrinks with sample size") {
  // realizable-by-basis data: standard gaussian, growing n
  std::vector<double> deviation;
  for (int n : {200, 1000, 5000}) {
    std::mt19937_64 rng(67);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Schema schema({continuous_var("x")});
    Eigen::MatrixXd rows(n, 1);
    for (int i = 0; i < n; ++i) rows(i, 0) = gauss(rng);
    Dataset ds{schema, rows};
    BasisConfig basis;
    basis.k = 60;
    PenaltyConfig pen;
    pen.kind = PenaltyKind::L1;
    pen.lambda = 0.0;
    TrainConfig train;
    train.max_iters = 500;
    train.seed = 2;
    FitResult res = fit(ds, basis, pen, train);
    double mse = 0;
    int count = 0;
    for (double x = -2.0; x <= 2.0 + 1e-9; x += 0.1) {
      Eigen::VectorXd row(1);
      row << x;
      const double err = res.model.grad(row, 0) + x;
      mse += err * err;
      ++count;
    }
    deviation.push_back(mse / count);
  }
  CHECK(deviation[2] < deviation[0]);
  CHECK(deviation[1] <= deviation[0] * 1.5);
  CHECK(deviation[2] <= deviation[1] * 1.5);
}
