#include <gpm/energy.hpp>
#include <gpm/synthgen.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace gpm;

namespace {

Dataset mixed_fixture(int n = 60, uint64_t seed = 3) {
  Schema schema({continuous_var("x"), continuous_var("y"), discrete_var("a", 3),
                 discrete_var("b", 2)});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd rows(n, 4);
  for (int i = 0; i < n; ++i) {
    rows(i, 0) = gauss(rng);
    rows(i, 1) = gauss(rng) * rows(i, 0);
    rows(i, 2) = static_cast<double>(rng() % 3);
    rows(i, 3) = static_cast<double>(rng() % 2);
  }
  return Dataset{schema, rows};
}

EnergyModel random_model(const Dataset& ds, int K, uint64_t seed, double alpha = 0.05) {
  FeatureBasis basis = build_basis(ds, K, seed, alpha);
  EnergyModel model(ds.schema, basis);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> gauss(0.0, 0.7);
  Eigen::VectorXd theta(K);
  for (int k = 0; k < K; ++k) theta[k] = gauss(rng);
  model.set_theta(theta);
  return model;
}

double fd_grad(const EnergyModel& m, Eigen::VectorXd x, int i, double h = 1e-4) {
  x[i] += h;
  const double up = m.log_density(x);
  x[i] -= 2 * h;
  const double dn = m.log_density(x);
  return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("basis codes, bandwidth floor, and determinism") {
  Schema schema({continuous_var("x"), discrete_var("k", 2)});
  Eigen::MatrixXd rows(6, 2);
  rows << 0.0, 0, 0.0, 1, 0.0, 0, 0.0, 1, 0.0, 0, 0.0, 1;
  Dataset ds{schema, rows};
  FeatureBasis basis = build_basis(ds, 4, 9);
  CHECK(basis.codebook[1][0] == 0.0);
  CHECK(basis.codebook[1][1] == 1.0);
  // the continuous column is constant, so its bandwidth hits the floor
  CHECK(basis.bandwidth[0] == 1e-3);
  FeatureBasis again = build_basis(ds, 4, 9);
  CHECK(basis.centers == again.centers);
  CHECK(basis.bandwidth == again.bandwidth);
  CHECK_THROWS_AS(build_basis(ds, 7, 9), ModelError);
}

TEST_CASE("three-category codes are evenly spaced") {
  const Eigen::VectorXd codes = default_codes(3);
  CHECK(codes[0] == 0.0);
  CHECK_THAT(codes[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK(codes[2] == 1.0);
}

TEST_CASE("zero parameters give the pure anchor") {
  Schema schema({continuous_var("x")});
  Eigen::MatrixXd rows(3, 1);
  rows << -1, 0, 1;
  Dataset ds{schema, rows};
  FeatureBasis basis = build_basis(ds, 2, 1, /*alpha=*/0.0);
  EnergyModel flat(schema, basis);
  Eigen::VectorXd x(1);
  x << 2.0;
  CHECK(flat.log_density(x) == 0.0);

  basis.alpha = 1.0;
  EnergyModel anchored(schema, basis);
  CHECK_THAT(anchored.log_density(x), Catch::Matchers::WithinAbs(-4.0, 1e-15));
  CHECK_THAT(anchored.grad(x, 0), Catch::Matchers::WithinAbs(-4.0, 1e-15));
  CHECK_THAT(anchored.hess(x, 0), Catch::Matchers::WithinAbs(-2.0, 1e-15));
}

TEST_CASE("a kernel evaluated at its own center contributes its weight") {
  Schema schema({continuous_var("x"), continuous_var("y")});
  FeatureBasis basis;
  basis.alpha = 0.0;
  basis.centers.resize(1, 2);
  basis.centers << 0.5, -1.0;
  basis.bandwidth = Eigen::VectorXd::Constant(2, 0.8);
  basis.codebook.resize(2);
  EnergyModel model(schema, basis);
  model.set_theta(Eigen::VectorXd::Constant(1, 3.0));
  Eigen::VectorXd x(2);
  x << 0.5, -1.0;
  CHECK_THAT(model.log_density(x), Catch::Matchers::WithinAbs(3.0, 1e-15));
}

TEST_CASE("derivatives match finite differences") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 25, 17);
  std::mt19937_64 rng(23);
  const auto cont = ds.schema.continuous_indices();
  REQUIRE(cont.size() >= 2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x = ds.rows.row(rng() % ds.n());
    for (int i : cont) {
      const double analytic = model.grad(x, i);
      const double fd = fd_grad(model, x, i);
      CHECK_THAT(analytic, Catch::Matchers::WithinRel(fd, 1e-5) ||
                               Catch::Matchers::WithinAbs(fd, 1e-7));
    }
    // cross derivatives against finite differences of the gradient
    const int i = cont[0], j = cont[1];
    const double h = 1e-4;
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd_cross = (model.grad(xp, i) - model.grad(xm, i)) / (2 * h);
    CHECK_THAT(model.cross(x, i, j), Catch::Matchers::WithinRel(fd_cross, 1e-4) ||
                                         Catch::Matchers::WithinAbs(fd_cross, 1e-6));
    Eigen::VectorXd hp = x, hm = x;
    hp[i] += h;
    hm[i] -= h;
    const double fd_hess = (model.grad(hp, i) - model.grad(hm, i)) / (2 * h);
    CHECK_THAT(model.hess(x, i), Catch::Matchers::WithinRel(fd_hess, 1e-4) ||
                                     Catch::Matchers::WithinAbs(fd_hess, 1e-6));
  }
}

TEST_CASE("derivative bundle agrees with scalar accessors") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 20, 29);
  Eigen::VectorXd x = ds.rows.row(7);
  DerivBundle bundle = model.derivatives(x, {true, true, true});
  for (int i : ds.schema.continuous_indices()) {
    CHECK(bundle.grad_of(i) == model.grad(x, i));
    CHECK(bundle.hess_of(i) == model.hess(x, i));
  }
  const auto cont = ds.schema.continuous_indices();
  CHECK(bundle.cross_of(cont[0], cont[1]) == model.cross(x, cont[0], cont[1]));
  CHECK(bundle.cross == bundle.cross.transpose());
}

TEST_CASE("derivatives w.r.t. discrete coordinates are rejected") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 10, 31);
  const auto disc = ds.schema.discrete_indices();
  REQUIRE_FALSE(disc.empty());
  Eigen::VectorXd x = ds.rows.row(0);
  CHECK_THROWS_AS(model.grad(x, disc[0]), ModelError);
  CHECK_THROWS_AS(model.substitute(x, ds.schema.continuous_indices()[0]), ModelError);
}

TEST_CASE("substitution returns the self value at the current category") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 20, 37);
  const auto disc = ds.schema.discrete_indices();
  REQUIRE_FALSE(disc.empty());
  for (int r = 0; r < 5; ++r) {
    Eigen::VectorXd x = ds.rows.row(r);
    for (int i : disc) {
      const Eigen::VectorXd subs = model.substitute(x, i);
      REQUIRE(subs.size() == ds.schema.cardinality(i));
      CHECK_THAT(subs[static_cast<int>(x[i])],
                 Catch::Matchers::WithinAbs(model.log_density(x), 1e-12));
    }
  }
}

TEST_CASE("a collapsed codebook makes substitution flat") {
  Dataset ds = mixed_fixture();
  FeatureBasis basis = build_basis(ds, 15, 41);
  const auto disc = ds.schema.discrete_indices();
  basis.codebook[disc[0]].setConstant(0.3);  // categories become indistinguishable
  EnergyModel model(ds.schema, basis);
  std::mt19937_64 rng(43);
  Eigen::VectorXd theta(15);
  for (int k = 0; k < 15; ++k) theta[k] = 0.5 * std::sin(static_cast<double>(rng() % 100));
  model.set_theta(theta);
  Eigen::VectorXd x = ds.rows.row(2);
  const Eigen::VectorXd subs = model.substitute(x, disc[0]);
  CHECK((subs.array() - subs[0]).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("theta gradients flow through recorded functionals") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 18, 47);
  Eigen::VectorXd x = ds.rows.row(3);

  // log density: gradient is the feature vector
  GradScalar ld = model.log_density_g(x);
  CHECK((theta_gradient(model, ld) - model.features(x)).cwiseAbs().maxCoeff() == 0.0);

  // squared slope: chain rule on a linear map
  const int i = ds.schema.continuous_indices()[0];
  GradScalar sq = square(model.grad_g(x, i));
  const Eigen::VectorXd expected = 2.0 * model.grad(x, i) * model.grad_g(x, i).g;
  CHECK((theta_gradient(model, sq) - expected).cwiseAbs().maxCoeff() <= 1e-12);

  // random functional vs central finite differences
  auto functional = [&](const EnergyModel& m) {
    GradScalar acc = square(m.grad_g(x, i)) * 0.5 + m.hess_g(x, i);
    const auto subs = m.substitute_g(x, ds.schema.discrete_indices()[0]);
    GradScalar lse(0.0);
    for (const auto& s : subs) lse = lse + exp(s - subs[0]);
    return acc + lse;
  };
  GradScalar rec = functional(model);
  const Eigen::VectorXd analytic = theta_gradient(model, rec);
  const double h = 1e-5;
  Eigen::VectorXd fd(model.K());
  for (int k = 0; k < model.K(); ++k) {
    EnergyModel pert = model;
    Eigen::VectorXd tp = model.theta(), tm = model.theta();
    tp[k] += h;
    tm[k] -= h;
    pert.set_theta(tp);
    const double up = functional(pert).v;
    pert.set_theta(tm);
    const double dn = functional(pert).v;
    fd[k] = (up - dn) / (2 * h);
  }
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
  CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
}

TEST_CASE("stale tapes are rejected after theta changes") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 10, 53);
  GradScalar rec = model.log_density_g(ds.rows.row(0));
  Eigen::VectorXd theta = model.theta();
  theta[0] += 1.0;
  model.set_theta(theta);
  CHECK_THROWS_AS(theta_gradient(model, rec), ModelError);
  GradScalar fresh = model.log_density_g(ds.rows.row(0));
  CHECK_THROWS_AS(rec + fresh, ModelError);
}

TEST_CASE("derivative outputs are linear in theta apart from the anchor") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 16, 59);
  EnergyModel zero = model;
  zero.set_theta(Eigen::VectorXd::Zero(model.K()));
  EnergyModel shifted = model;
  std::mt19937_64 rng(61);
  Eigen::VectorXd other(model.K());
  for (int k = 0; k < model.K(); ++k)
    other[k] = 0.3 * std::cos(static_cast<double>(rng() % 50));
  shifted.set_theta(other);
  EnergyModel sum = model;
  sum.set_theta(model.theta() + other);

  Eigen::VectorXd x = ds.rows.row(5);
  const int i = ds.schema.continuous_indices()[0];
  CHECK_THAT(sum.grad(x, i),
             Catch::Matchers::WithinAbs(model.grad(x, i) + shifted.grad(x, i) -
                                            zero.grad(x, i), 1e-10));
  CHECK_THAT(sum.hess(x, i),
             Catch::Matchers::WithinAbs(model.hess(x, i) + shifted.hess(x, i) -
                                            zero.hess(x, i), 1e-10));
}

TEST_CASE("the anchor forces decay along random rays") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 16, 67, /*alpha=*/0.05);
  std::mt19937_64 rng(71);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto cont = ds.schema.continuous_indices();
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(ds.d());
    for (int i : cont) dir[i] = gauss(rng);
    dir /= std::sqrt(dir.squaredNorm());
    Eigen::VectorXd base = ds.rows.row(0);
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {20.0, 40.0, 80.0}) {
      Eigen::VectorXd x = base;
      for (int i : cont) x[i] = base[i] + t * dir[i];
      const double v = model.log_density(x);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(prev < -10.0);  // heading to minus infinity
  }
}

TEST_CASE("model json round trip is exact") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 12, 73);
  EnergyModel back = model_from_json(model_to_json(model));
  CHECK(back.theta() == model.theta());
  CHECK(back.basis().centers == model.basis().centers);
  CHECK(back.basis().bandwidth == model.basis().bandwidth);
  CHECK(back.schema() == model.schema());
  Eigen::VectorXd x = ds.rows.row(1);
  CHECK(back.log_density(x) == model.log_density(x));
}

TEST_CASE("non-finite inputs are rejected") {
  Dataset ds = mixed_fixture();
  EnergyModel model = random_model(ds, 8, 79);
  Eigen::VectorXd x = ds.rows.row(0);
  x[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(model.log_density(x), ModelError);
}
