#pragma once

// Score-matching losses on empirical data. Continuous variables contribute
// 0.5 * (d log density / dx_i)^2 + d^2 log density / dx_i^2; discrete
// variables contribute the marginalization-ratio form
// 0.5 * r(x)^2 - sum_v r(x[i->v]) with r = sum_v exp(L_v - L_x), both on the
// same half-weighted scale so mixed rows add up termwise.

#include <gpm/energy.hpp>
#include <gpm/types.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace gpm {

struct LossReport {
  double total = 0.0;
  Eigen::VectorXd per_variable;  // mean per-variable terms; total is their sum
  double penalty = 0.0;          // filled by the caller
};

template <class Model>
double continuous_term(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                       int i) {
  if (!model.schema().is_continuous(i))
    throw ModelError("continuous_term: variable " + std::to_string(i) +
                     " is not continuous");
  const double g = model.grad(x, i);
  const double h = model.hess(x, i);
  return 0.5 * g * g + h;
}

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

// Marginalization ratios are exponentials of energy gaps. Data with empty
// configurations drives some gaps toward infinity during training; the
// ratio exponent saturates here so the loss and its gradient stay finite
// (the squared ratio must also stay inside the double range).
constexpr double kMaxRatioExponent = 250.0;

inline double bounded_ratio(double log_gap) {
  return std::exp(std::min(log_gap, kMaxRatioExponent));
}

}  // namespace detail

template <class Model>
double discrete_term(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                     int i) {
  if (!model.schema().is_discrete(i))
    throw ModelError("discrete_term: variable " + std::to_string(i) + " is not discrete");
  const Eigen::VectorXd L = model.substitute(x, i);
  const int xi = static_cast<int>(x[i]);
  const double log_s = detail::log_sum_exp(L);
  const double r = detail::bounded_ratio(log_s - L[xi]);
  double sum_rv = 0;
  for (int v = 0; v < L.size(); ++v) sum_rv += detail::bounded_ratio(log_s - L[v]);
  return 0.5 * r * r - sum_rv;
}

/// Unpenalized mixed objective over a dataset: empirical mean of the
/// per-variable terms, dispatched on variable kind. Reduces to the pure
/// continuous or pure discrete objective when the schema is homogeneous.
template <class Model>
LossReport mixed_loss(const Model& model, const Dataset& ds) {
  if (!(ds.schema == model.schema()))
    throw ModelError("mixed_loss: dataset schema does not match the model");
  const int d = ds.d();
  LossReport rep;
  rep.per_variable = Eigen::VectorXd::Zero(d);
  for (int r = 0; r < ds.n(); ++r) {
    const Eigen::VectorXd row = ds.rows.row(r);
    for (int i = 0; i < d; ++i) {
      rep.per_variable[i] += ds.schema.is_continuous(i) ? continuous_term(model, row, i)
                                                        : discrete_term(model, row, i);
    }
  }
  rep.per_variable /= static_cast<double>(ds.n());
  rep.total = rep.per_variable.sum();
  return rep;
}

struct LossAndGrad {
  LossReport report;
  Eigen::VectorXd grad;
};

/// Loss and exact theta-gradient evaluator over cached row geometry; one
/// evaluation costs three K-vector products per row and continuous variable
/// plus O(K * M_i) per discrete variable.
class LossEvaluator {
 public:
  LossEvaluator(const EnergyModel& model, const Dataset& ds)
      : cache_(std::make_shared<FeatureCache>(model, ds)) {}
  explicit LossEvaluator(std::shared_ptr<const FeatureCache> cache)
      : cache_(std::move(cache)) {}

  const FeatureCache& cache() const { return *cache_; }

  LossAndGrad evaluate(const Eigen::VectorXd& theta,
                       const std::vector<int>& rows = {}) const {
    const FeatureCache& c = *cache_;
    const int K = c.K();
    const int nc = static_cast<int>(c.cont.size());
    const double alpha = c.basis.alpha;

    LossAndGrad out;
    out.report.per_variable = Eigen::VectorXd::Zero(c.schema.size());
    out.grad = Eigen::VectorXd::Zero(K);

    std::vector<int> all;
    const std::vector<int>* use = &rows;
    if (rows.empty()) {
      all.resize(c.n);
      std::iota(all.begin(), all.end(), 0);
      use = &all;
    }

    Eigen::MatrixXd a(K, nc), a2(K, nc);
    Eigen::VectorXd tphi(K), g(nc), h(nc);
    for (int r : *use) {
      const Eigen::VectorXd phi = c.phi.row(r);
      tphi = theta.cwiseProduct(phi);
      const double tphi_sum = tphi.sum();

      if (nc > 0) {
        for (int s = 0; s < nc; ++s) a.col(s) = c.acoef(r, c.cont[s]);
        a2 = a.array().square();
        g.noalias() = a.transpose() * tphi;
        g -= 2.0 * alpha * c.xcont.row(r).transpose();
        h.noalias() = a2.transpose() * tphi;
        for (int s = 0; s < nc; ++s) h[s] -= c.w[c.cont[s]] * tphi_sum + 2.0 * alpha;
        for (int s = 0; s < nc; ++s)
          out.report.per_variable[c.cont[s]] += 0.5 * g[s] * g[s] + h[s];
        out.grad.noalias() += phi.cwiseProduct(a * g);
        out.grad.noalias() += phi.cwiseProduct(a2.rowwise().sum());
        out.grad.noalias() -= c.wc_sum * phi;
      }

      for (size_t s = 0; s < c.disc.size(); ++s) {
        const int i = c.disc[s];
        const int m = c.schema.cardinality(i);
        const Eigen::MatrixXd& sub = c.sub_phi_of(r, static_cast<int>(s));
        Eigen::VectorXd lv(m);
        for (int v = 0; v < m; ++v) lv[v] = theta.dot(sub.col(v));
        // the anchor is constant across substitutions and cancels in ratios
        const double log_s = detail::log_sum_exp(lv);
        const int xi = c.disc_value[r][s];
        Eigen::VectorXd rv(m), soft(m);
        for (int v = 0; v < m; ++v) {
          rv[v] = detail::bounded_ratio(log_s - lv[v]);
          soft[v] = std::exp(lv[v] - log_s);
        }
        const double rx = rv[xi];
        out.report.per_variable[i] += 0.5 * rx * rx - rv.sum();
        // psi = d log_s / d theta and d r_v / d theta = r_v (psi - sub_v), so
        // the term gradient is rx^2 (psi - sub_x) - [sum_v r_v psi - sub * rv].
        const Eigen::VectorXd psi = sub * soft;
        out.grad += rx * rx * (psi - sub.col(xi)) - (rv.sum() * psi - sub * rv);
      }
    }

    const double count = static_cast<double>(use->size());
    out.report.per_variable /= count;
    out.grad /= count;
    out.report.total = out.report.per_variable.sum();
    return out;
  }

 private:
  std::shared_ptr<const FeatureCache> cache_;
};

/// Exact gradient of mixed_loss(model, ds).total w.r.t. theta.
inline Eigen::VectorXd loss_theta_gradient(const EnergyModel& model, const Dataset& ds) {
  return LossEvaluator(model, ds).evaluate(model.theta()).grad;
}

}  // namespace gpm
