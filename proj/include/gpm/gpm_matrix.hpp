#pragma once

// Generalized precision matrix: a symmetric nonnegative d x d matrix whose
// (i, j) entry aggregates a squared conditional-independence statistic.
// Continuous pairs use the cross derivative of the log density, discrete
// pairs the double log-difference against the reference category, and mixed
// pairs the score difference across categories. A zero entry certifies
// conditional independence of the pair given the rest.

#include <gpm/energy.hpp>
#include <gpm/graphs.hpp>
#include <gpm/types.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpm {

enum class OmegaConvention { Squared, Rooted };
enum class PairKind { CC, DD, CD };

struct GpmMatrix {
  Eigen::MatrixXd omega;  // symmetric, zero diagonal, entries >= 0
  Schema schema;
  OmegaConvention convention = OmegaConvention::Squared;

  int d() const { return static_cast<int>(omega.rows()); }

  PairKind kind(int i, int j) const {
    const bool di = schema.is_discrete(i), dj = schema.is_discrete(j);
    if (di && dj) return PairKind::DD;
    if (!di && !dj) return PairKind::CC;
    return PairKind::CD;
  }
};

/// Cross derivative of the log density for a continuous pair; the model
/// normalization has zero cross derivative, so unnormalized models suffice.
template <class Model>
double cc_stat(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x, int i,
               int j) {
  if (i == j) throw ModelError("cc_stat: i and j must differ");
  if (!model.schema().is_continuous(i) || !model.schema().is_continuous(j))
    throw ModelError("cc_stat: both variables must be continuous");
  return model.cross(x, i, j);
}

/// Double log-difference (L(0,0) - L(k,0)) - (L(0,l) - L(k,l)) for a
/// discrete pair, with L(a,b) the log density after substituting categories.
/// Category 0 is the reference; k, l must name non-reference categories.
template <class Model>
double dd_stat(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x, int i,
               int j, int k, int l) {
  const Schema& schema = model.schema();
  if (i == j) throw ModelError("dd_stat: i and j must differ");
  if (!schema.is_discrete(i) || !schema.is_discrete(j))
    throw ModelError("dd_stat: both variables must be discrete");
  if (k < 1 || k >= schema.cardinality(i) || l < 1 || l >= schema.cardinality(j))
    throw ModelError("dd_stat: category indices must be in [1, cardinality)");
  Eigen::VectorXd row = x;
  auto lp = [&](int a, int b) {
    row[i] = a;
    row[j] = b;
    return model.log_density(row);
  };
  return (lp(0, 0) - lp(k, 0)) - (lp(0, l) - lp(k, l));
}

/// Score difference across categories for a continuous/discrete pair:
/// d log density / dx_c at (x with dvar -> 0) minus at (x with dvar -> k).
template <class Model>
double cd_stat(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x, int c,
               int dvar, int k) {
  const Schema& schema = model.schema();
  if (!schema.is_continuous(c) || !schema.is_discrete(dvar))
    throw ModelError("cd_stat: expected a continuous and a discrete variable");
  if (k < 1 || k >= schema.cardinality(dvar))
    throw ModelError("cd_stat: category index must be in [1, cardinality)");
  Eigen::VectorXd row = x;
  row[dvar] = 0;
  const double g0 = model.grad(row, c);
  row[dvar] = k;
  return g0 - model.grad(row, c);
}

namespace detail {

inline int pair_index(int i, int j, int d) {
  // upper-triangle enumeration with i < j
  return i * d - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace detail

/// Characterization matrix plus the theta-gradient of every entry, enough
/// for penalties to chain through the squared-convention entries.
struct GpmTape {
  GpmMatrix gpm;           // squared convention
  Eigen::MatrixXd domega;  // pair-count x K; rows follow pair_index order
};

/// Fused evaluator over cached geometry; produces the squared-convention
/// matrix and, on request, per-entry theta-gradients.
class GpmEvaluator {
 public:
  GpmEvaluator(const EnergyModel& model, const Dataset& ds)
      : cache_(std::make_shared<FeatureCache>(model, ds)) {}
  explicit GpmEvaluator(std::shared_ptr<const FeatureCache> cache)
      : cache_(std::move(cache)) {}

  GpmTape evaluate(const Eigen::VectorXd& theta, bool want_grad = true,
                   const std::vector<int>& rows = {}) const {
    const FeatureCache& c = *cache_;
    const int K = c.K();
    const int d = c.schema.size();
    const int nc = static_cast<int>(c.cont.size());
    const int nd = static_cast<int>(c.disc.size());
    const int pairs = d * (d - 1) / 2;

    GpmTape out;
    out.gpm.schema = c.schema;
    out.gpm.convention = OmegaConvention::Squared;
    out.gpm.omega = Eigen::MatrixXd::Zero(d, d);
    if (want_grad) out.domega = Eigen::MatrixXd::Zero(pairs, K);

    std::vector<int> all;
    const std::vector<int>* use = &rows;
    if (rows.empty()) {
      all.resize(c.n);
      std::iota(all.begin(), all.end(), 0);
      use = &all;
    }
    const double count = static_cast<double>(use->size());

    Eigen::MatrixXd a(K, nc);
    Eigen::VectorXd tphi(K);
    for (int r : *use) {
      const Eigen::VectorXd phi = c.phi.row(r);
      tphi = theta.cwiseProduct(phi);
      for (int s = 0; s < nc; ++s) a.col(s) = c.acoef(r, c.cont[s]);

      // continuous pairs
      for (int s = 0; s < nc; ++s) {
        for (int t = s + 1; t < nc; ++t) {
          const int i = c.cont[s], j = c.cont[t];
          const Eigen::VectorXd vec = phi.cwiseProduct(a.col(s).cwiseProduct(a.col(t)));
          const double f = theta.dot(vec);
          out.gpm.omega(i, j) += f * f / count;
          if (want_grad)
            out.domega.row(detail::pair_index(i, j, d)) += (2.0 * f / count) * vec;
        }
      }

      // discrete pairs
      for (int s = 0; s < nd; ++s) {
        for (int t = s + 1; t < nd; ++t) {
          const int i = c.disc[s], j = c.disc[t];
          const int mi = c.schema.cardinality(i), mj = c.schema.cardinality(j);
          for (int k = 1; k < mi; ++k) {
            for (int l = 1; l < mj; ++l) {
              Eigen::VectorXd vec = c.double_sub_phi(r, s, 0, t, 0) -
                                    c.double_sub_phi(r, s, k, t, 0) -
                                    c.double_sub_phi(r, s, 0, t, l) +
                                    c.double_sub_phi(r, s, k, t, l);
              const double f = theta.dot(vec);
              out.gpm.omega(i, j) += f * f / count;
              if (want_grad)
                out.domega.row(detail::pair_index(i, j, d)) += (2.0 * f / count) * vec;
            }
          }
        }
      }

      // continuous-discrete pairs
      for (int s = 0; s < nc; ++s) {
        for (int t = 0; t < nd; ++t) {
          const int ci = c.cont[s], dj = c.disc[t];
          const int m = c.schema.cardinality(dj);
          const Eigen::MatrixXd& sub = c.sub_phi_of(r, t);
          const int lo = std::min(ci, dj), hi = std::max(ci, dj);
          for (int k = 1; k < m; ++k) {
            Eigen::VectorXd vec = a.col(s).cwiseProduct(sub.col(0) - sub.col(k));
            const double f = theta.dot(vec);
            out.gpm.omega(lo, hi) += f * f / count;
            if (want_grad)
              out.domega.row(detail::pair_index(lo, hi, d)) += (2.0 * f / count) * vec;
          }
        }
      }
    }

    out.gpm.omega = out.gpm.omega.selfadjointView<Eigen::Upper>();
    return out;
  }

 private:
  std::shared_ptr<const FeatureCache> cache_;
};

/// Empirical characterization matrix for any model implementing the
/// evaluation concept. Each entry averages the squared pair statistic over
/// the dataset rows; the rooted convention square-roots continuous pairs.
template <class Model>
GpmMatrix compute_gpm(const Model& model, const Dataset& ds,
                      OmegaConvention convention = OmegaConvention::Squared) {
  if (!(ds.schema == model.schema()))
    throw ModelError("compute_gpm: dataset schema does not match the model");
  const int d = ds.d();
  GpmMatrix out;
  out.schema = ds.schema;
  out.convention = convention;
  out.omega = Eigen::MatrixXd::Zero(d, d);
  for (int r = 0; r < ds.n(); ++r) {
    const Eigen::VectorXd row = ds.rows.row(r);
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        double acc = 0;
        if (out.kind(i, j) == PairKind::CC) {
          const double f = cc_stat(model, row, i, j);
          acc = f * f;
        } else if (out.kind(i, j) == PairKind::DD) {
          for (int k = 1; k < ds.schema.cardinality(i); ++k)
            for (int l = 1; l < ds.schema.cardinality(j); ++l) {
              const double f = dd_stat(model, row, i, j, k, l);
              acc += f * f;
            }
        } else {
          const int c = ds.schema.is_continuous(i) ? i : j;
          const int dv = ds.schema.is_continuous(i) ? j : i;
          for (int k = 1; k < ds.schema.cardinality(dv); ++k) {
            const double f = cd_stat(model, row, c, dv, k);
            acc += f * f;
          }
        }
        out.omega(i, j) += acc / ds.n();
      }
    }
  }
  out.omega = out.omega.selfadjointView<Eigen::Upper>();
  if (convention == OmegaConvention::Rooted) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j && out.kind(i, j) == PairKind::CC)
          out.omega(i, j) = std::sqrt(out.omega(i, j));
  }
  return out;
}

/// Fused overload for the energy model (same result, one pass over cached
/// geometry instead of per-pair row evaluations).
inline GpmMatrix compute_gpm(const EnergyModel& model, const Dataset& ds,
                             OmegaConvention convention = OmegaConvention::Squared) {
  GpmMatrix out = GpmEvaluator(model, ds).evaluate(model.theta(), false).gpm;
  if (convention == OmegaConvention::Rooted) {
    out.convention = OmegaConvention::Rooted;
    for (int i = 0; i < out.d(); ++i)
      for (int j = 0; j < out.d(); ++j)
        if (i != j && out.kind(i, j) == PairKind::CC)
          out.omega(i, j) = std::sqrt(out.omega(i, j));
  }
  return out;
}

struct ThresholdPolicy {
  enum class Kind { Gap, Absolute };
  Kind kind = Kind::Gap;
  double tau = 1e-3;  // absolute policy only
};

/// Thresholds the matrix into a graph. The gap policy cuts at the largest
/// relative gap in the sorted positive entries (log scale); when the spread
/// is under one order of magnitude every positive entry becomes an edge.
inline UndirectedGraph extract_graph(const GpmMatrix& gpm, const ThresholdPolicy& policy) {
  const int d = gpm.d();
  UndirectedGraph g(d);
  if (policy.kind == ThresholdPolicy::Kind::Absolute) {
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (gpm.omega(i, j) > policy.tau) g.set_edge(i, j);
    return g;
  }

  std::vector<std::pair<double, std::pair<int, int>>> entries;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (gpm.omega(i, j) > 0) entries.push_back({gpm.omega(i, j), {i, j}});
  if (entries.empty()) return g;
  std::sort(entries.begin(), entries.end());

  const double lo = entries.front().first, hi = entries.back().first;
  if (hi / lo < 10.0) {
    for (const auto& e : entries) g.set_edge(e.second.first, e.second.second);
    return g;
  }
  size_t cut = 0;
  double best_gap = -1;
  for (size_t t = 0; t + 1 < entries.size(); ++t) {
    const double gap = std::log(entries[t + 1].first) - std::log(entries[t].first);
    if (gap > best_gap) {
      best_gap = gap;
      cut = t + 1;
    }
  }
  for (size_t t = cut; t < entries.size(); ++t)
    g.set_edge(entries[t].second.first, entries[t].second.second);
  return g;
}

inline void save_omega_csv(const GpmMatrix& gpm, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ModelError("cannot open '" + path + "' for writing");
  for (int i = 0; i < gpm.d(); ++i) {
    for (int j = 0; j < gpm.d(); ++j)
      f << (j ? "," : "") << detail::fmt_full(gpm.omega(i, j));
    f << "\n";
  }
}

inline Eigen::MatrixXd load_omega_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ModelError("cannot open omega file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace gpm
