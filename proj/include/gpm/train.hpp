#pragma once

// Adam minimization of the mixed score-matching loss plus an entry-wise
// penalty on the characterization matrix, with windowed convergence control
// and an internal unpenalized pilot fit for the adaptive-l1 penalty.

#include <gpm/energy.hpp>
#include <gpm/gpm_matrix.hpp>
#include <gpm/penalty.hpp>
#include <gpm/scorematch.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpm {

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

struct BasisConfig {
  int k = 100;                  // capped at n
  double alpha = 0.05;
  double bandwidth_scale = 1.0;
};

struct TrainConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int max_iters = 2000;
  double tol = 1e-6;      // relative change of the windowed loss mean; 0 disables
  int tol_window = 20;
  int batch = 0;          // 0 = full batch
  uint64_t seed = 0;
  bool deterministic = true;
  std::function<void(int iter, const EnergyModel&, const LossReport&)> on_iteration;

  void validate() const {
    if (!(lr > 0)) throw TrainError("learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw TrainError("adam betas must lie in [0, 1)");
    if (max_iters < 0) throw TrainError("max_iters must be nonnegative");
  }
};

struct FitResult {
  EnergyModel model;
  std::vector<LossReport> history;
  GpmMatrix gpm;  // squared convention
  UndirectedGraph graph;
  double wall_time = 0.0;
  bool converged = false;        // stopped by the tolerance before max_iters
  bool monotone_warning = false; // smoothed objective increased after burn-in
};

namespace detail {

inline bool smoothed_monotone(const std::vector<double>& objective, int burn_in = 100,
                              int window = 50) {
  if (static_cast<int>(objective.size()) <= burn_in + window) return true;
  std::vector<double> smooth;
  for (size_t t = window - 1; t < objective.size(); ++t) {
    double acc = 0;
    for (int s = 0; s < window; ++s) acc += objective[t - s];
    smooth.push_back(acc / window);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < smooth.size(); ++t) {
    const int iter = static_cast<int>(t) + window - 1;
    if (iter >= burn_in) {
      if (smooth[t] > prev + 1e-7 * std::max(1.0, std::abs(prev))) return false;
      prev = std::min(prev, smooth[t]);
    }
  }
  return true;
}

}  // namespace detail

/// Fits an energy model on the dataset: zero-initialized theta, Adam on the
/// loss gradient plus the penalty gradient, characterization matrix and
/// graph computed from the final model. Adaptive-l1 configurations without
/// preset weights trigger an unpenalized pilot fit first.
inline FitResult fit(const Dataset& ds, const BasisConfig& basis_cfg,
                     PenaltyConfig penalty_cfg, const TrainConfig& train_cfg,
                     const ThresholdPolicy& policy = {}) {
  ds.validate();
  train_cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  if (penalty_cfg.kind == PenaltyKind::AdaptiveL1 && !penalty_cfg.adaptive_weights) {
    PenaltyConfig pilot_pen;
    pilot_pen.kind = PenaltyKind::L1;
    pilot_pen.lambda = 0.0;
    TrainConfig pilot_train = train_cfg;
    pilot_train.on_iteration = nullptr;
    FitResult pilot = fit(ds, basis_cfg, pilot_pen, pilot_train, policy);
    penalty_cfg.adaptive_weights =
        adaptive_weights_from_pilot(pilot.gpm, penalty_cfg.epsilon);
  }
  penalty_cfg.validate(ds.d());

  const int K = std::min(basis_cfg.k, ds.n());
  FeatureBasis basis = build_basis(ds, K, train_cfg.seed, basis_cfg.alpha,
                                   basis_cfg.bandwidth_scale);
  EnergyModel model(ds.schema, std::move(basis));

  auto cache = std::make_shared<FeatureCache>(model, ds);
  LossEvaluator loss_eval(cache);
  GpmEvaluator gpm_eval(cache);
  const bool penalized = penalty_cfg.lambda > 0.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(model.K());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(model.K());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(model.K());

  std::mt19937_64 rng(train_cfg.seed + 0x9e3779b97f4a7c15ull);
  std::vector<int> batch_rows;
  std::vector<int> row_pool(ds.n());
  std::iota(row_pool.begin(), row_pool.end(), 0);

  FitResult out;
  std::vector<double> objective;
  bool converged = false;

  for (int iter = 1; iter <= train_cfg.max_iters; ++iter) {
    const std::vector<int>* rows = nullptr;
    if (train_cfg.batch > 0 && train_cfg.batch < ds.n()) {
      batch_rows.clear();
      for (int b = 0; b < train_cfg.batch; ++b) {
        std::uniform_int_distribution<int> pick(b, ds.n() - 1);
        std::swap(row_pool[b], row_pool[pick(rng)]);
        batch_rows.push_back(row_pool[b]);
      }
      rows = &batch_rows;
    }

    LossAndGrad lg = loss_eval.evaluate(theta, rows ? *rows : std::vector<int>{});
    Eigen::VectorXd grad = lg.grad;
    if (penalized) {
      GpmTape tape = gpm_eval.evaluate(theta, true, rows ? *rows : std::vector<int>{});
      lg.report.penalty = penalty_value(penalty_cfg, tape.gpm);
      grad += penalty_theta_gradient(penalty_cfg, tape);
    }

    const double obj = lg.report.total + lg.report.penalty;
    if (!std::isfinite(obj) || !grad.allFinite()) {
      std::string bad_rows;
      for (int r = 0; r < ds.n() && bad_rows.size() < 64; ++r) {
        LossAndGrad one = loss_eval.evaluate(theta, {r});
        if (!std::isfinite(one.report.total)) bad_rows += " " + std::to_string(r);
      }
      throw TrainError("non-finite loss at iteration " + std::to_string(iter) +
                       (bad_rows.empty() ? "" : "; offending rows:" + bad_rows));
    }

    objective.push_back(obj);
    out.history.push_back(lg.report);
    if (train_cfg.on_iteration) {
      model.set_theta(theta);
      train_cfg.on_iteration(iter, model, lg.report);
    }

    // Adam step
    m = train_cfg.beta1 * m + (1.0 - train_cfg.beta1) * grad;
    v = train_cfg.beta2 * v + (1.0 - train_cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(train_cfg.beta1, iter);
    const double bc2 = 1.0 - std::pow(train_cfg.beta2, iter);
    theta -= (train_cfg.lr / bc1) * m.cwiseQuotient(
                 ((v / bc2).cwiseSqrt().array() + train_cfg.eps_adam).matrix());

    // windowed relative-change stop
    const int w = train_cfg.tol_window;
    if (train_cfg.tol > 0 && static_cast<int>(objective.size()) >= 2 * w) {
      double m1 = 0, m2 = 0;
      const size_t t = objective.size();
      for (int s = 0; s < w; ++s) {
        m1 += objective[t - 2 * w + s];
        m2 += objective[t - w + s];
      }
      m1 /= w;
      m2 /= w;
      if (std::abs(m1 - m2) <= train_cfg.tol * std::max(1.0, std::abs(m2))) {
        converged = true;
        break;
      }
    }
  }

  model.set_theta(theta);
  out.model = model;
  GpmTape final_tape = gpm_eval.evaluate(theta, false);
  out.gpm = std::move(final_tape.gpm);
  out.graph = extract_graph(out.gpm, policy);
  out.converged = converged;

  std::vector<double> objs;
  for (const auto& rep : out.history) objs.push_back(rep.total + rep.penalty);
  out.monotone_warning = !detail::smoothed_monotone(objs);

  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct GradientCheckReport {
  double max_rel_error = 0.0;          // loss + penalty
  double max_rel_error_loss = 0.0;     // loss only
  std::vector<double> per_draw;
};

namespace detail {

inline double rel_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({1e-12, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace detail

/// Compares the analytic objective gradient against central finite
/// differences at random theta draws. Intended for small datasets.
inline GradientCheckReport gradient_selfcheck(const EnergyModel& model, const Dataset& ds,
                                              const PenaltyConfig& penalty_cfg,
                                              int draws = 5, uint64_t seed = 0,
                                              double step = 1e-5) {
  auto cache = std::make_shared<FeatureCache>(model, ds);
  LossEvaluator loss_eval(cache);
  GpmEvaluator gpm_eval(cache);
  const bool penalized = penalty_cfg.lambda > 0.0;

  auto objective = [&](const Eigen::VectorXd& theta, bool with_penalty) {
    double val = loss_eval.evaluate(theta).report.total;
    if (with_penalty && penalized)
      val += penalty_value(penalty_cfg, gpm_eval.evaluate(theta, false).gpm);
    return val;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.5);
  GradientCheckReport report;
  for (int dr = 0; dr < draws; ++dr) {
    Eigen::VectorXd theta(model.K());
    for (int k = 0; k < model.K(); ++k) theta[k] = gauss(rng);

    Eigen::VectorXd analytic = loss_eval.evaluate(theta).grad;
    Eigen::VectorXd analytic_loss = analytic;
    if (penalized)
      analytic += penalty_theta_gradient(penalty_cfg, gpm_eval.evaluate(theta, true));

    Eigen::VectorXd fd(model.K()), fd_loss(model.K());
    for (int k = 0; k < model.K(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += step;
      tm[k] -= step;
      fd[k] = (objective(tp, true) - objective(tm, true)) / (2 * step);
      fd_loss[k] = (objective(tp, false) - objective(tm, false)) / (2 * step);
    }
    const double err = detail::rel_gap(analytic, fd);
    report.per_draw.push_back(err);
    report.max_rel_error = std::max(report.max_rel_error, err);
    report.max_rel_error_loss =
        std::max(report.max_rel_error_loss, detail::rel_gap(analytic_loss, fd_loss));
  }
  return report;
}

}  // namespace gpm
