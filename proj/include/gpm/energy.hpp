#pragma once

// Feature-linear unnormalized energy model over mixed-type rows:
//
//   log_density(x) = sum_k theta_k * exp(-0.5 * ||emb(x) - c_k||^2_w) - alpha * ||x_cont||^2
//
// emb maps continuous coordinates to themselves and discrete categories to
// fixed real codes, so one radial-basis feature set serves all data types.
// Everything is linear in theta except the fixed quadratic anchor, which
// keeps the density integrable and every derivative closed-form.

#include <gpm/types.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpm {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

struct FeatureBasis {
  Eigen::MatrixXd centers;                 // K x d, embedded space
  Eigen::VectorXd bandwidth;               // per embedded coordinate, > 0
  std::vector<Eigen::VectorXd> codebook;   // per variable; empty for continuous
  double alpha = 0.05;

  int K() const { return static_cast<int>(centers.rows()); }
  int d() const { return static_cast<int>(centers.cols()); }
};

inline Eigen::VectorXd default_codes(int cardinality) {
  Eigen::VectorXd codes(cardinality);
  for (int v = 0; v < cardinality; ++v)
    codes[v] = cardinality > 1 ? static_cast<double>(v) / (cardinality - 1) : 0.0;
  return codes;
}

namespace detail {

inline Eigen::VectorXd embed_row(const Schema& schema,
                                 const std::vector<Eigen::VectorXd>& codebook,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd u(x.size());
  for (int j = 0; j < x.size(); ++j) {
    if (schema.is_discrete(j))
      u[j] = codebook[j][static_cast<int>(x[j])];
    else
      u[j] = x[j];
  }
  return u;
}

inline Eigen::MatrixXd embed_all(const Schema& schema,
                                 const std::vector<Eigen::VectorXd>& codebook,
                                 const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd u = rows;
  for (int j = 0; j < rows.cols(); ++j) {
    if (!schema.is_discrete(j)) continue;
    for (int i = 0; i < rows.rows(); ++i)
      u(i, j) = codebook[j][static_cast<int>(rows(i, j))];
  }
  return u;
}

}  // namespace detail

/// Centers are K distinct training rows; per-coordinate bandwidths come from
/// the median pairwise absolute difference over a subsample of <= 500 rows,
/// floored at 1e-3.
inline FeatureBasis build_basis(const Dataset& ds, int K, uint64_t seed,
                                double alpha = 0.05, double bandwidth_scale = 1.0) {
  if (K < 1) throw ModelError("build_basis: K >= 1 required");
  if (K > ds.n())
    throw ModelError("build_basis: K = " + std::to_string(K) + " exceeds n = " +
                     std::to_string(ds.n()));
  std::mt19937_64 rng(seed);

  FeatureBasis basis;
  basis.alpha = alpha;
  basis.codebook.resize(ds.d());
  for (int j = 0; j < ds.d(); ++j)
    if (ds.schema.is_discrete(j)) basis.codebook[j] = default_codes(ds.schema.cardinality(j));

  const Eigen::MatrixXd embedded = detail::embed_all(ds.schema, basis.codebook, ds.rows);

  std::vector<int> idx(ds.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  basis.centers.resize(K, ds.d());
  for (int k = 0; k < K; ++k) basis.centers.row(k) = embedded.row(idx[k]);

  const int s = std::min(ds.n(), 500);
  std::vector<int> sub(idx.begin(), idx.begin() + s);  // reuse the shuffle
  basis.bandwidth.resize(ds.d());
  std::vector<double> diffs;
  diffs.reserve(static_cast<size_t>(s) * (s - 1) / 2);
  for (int j = 0; j < ds.d(); ++j) {
    diffs.clear();
    for (int a = 0; a < s; ++a)
      for (int b = a + 1; b < s; ++b)
        diffs.push_back(std::abs(embedded(sub[a], j) - embedded(sub[b], j)));
    double med = 0.0;
    if (!diffs.empty()) {
      auto mid = diffs.begin() + diffs.size() / 2;
      std::nth_element(diffs.begin(), mid, diffs.end());
      med = *mid;
    }
    basis.bandwidth[j] = std::max(med * bandwidth_scale, 1e-3);
  }
  return basis;
}

/// Scalar carrying its gradient w.r.t. theta. `stamp` identifies the model
/// revision the gradient refers to; mixing quantities from different model
/// states throws.
struct GradScalar {
  double v = 0.0;
  Eigen::VectorXd g;
  uint64_t stamp = 0;

  GradScalar() = default;
  GradScalar(double value, Eigen::VectorXd grad, uint64_t s)
      : v(value), g(std::move(grad)), stamp(s) {}
  explicit GradScalar(double value) : v(value) {}
};

namespace detail {

inline uint64_t merge_stamps(const GradScalar& a, const GradScalar& b) {
  if (a.stamp != 0 && b.stamp != 0 && a.stamp != b.stamp)
    throw ModelError("gradient tape references a stale model");
  return a.stamp != 0 ? a.stamp : b.stamp;
}

inline Eigen::VectorXd combine(const GradScalar& a, double ca, const GradScalar& b,
                               double cb) {
  if (a.g.size() == 0 && b.g.size() == 0) return {};
  if (a.g.size() == 0) return cb * b.g;
  if (b.g.size() == 0) return ca * a.g;
  return ca * a.g + cb * b.g;
}

}  // namespace detail

inline GradScalar operator+(const GradScalar& a, const GradScalar& b) {
  return {a.v + b.v, detail::combine(a, 1, b, 1), detail::merge_stamps(a, b)};
}
inline GradScalar operator-(const GradScalar& a, const GradScalar& b) {
  return {a.v - b.v, detail::combine(a, 1, b, -1), detail::merge_stamps(a, b)};
}
inline GradScalar operator*(const GradScalar& a, const GradScalar& b) {
  return {a.v * b.v, detail::combine(a, b.v, b, a.v), detail::merge_stamps(a, b)};
}
inline GradScalar operator/(const GradScalar& a, const GradScalar& b) {
  return {a.v / b.v, detail::combine(a, 1.0 / b.v, b, -a.v / (b.v * b.v)),
          detail::merge_stamps(a, b)};
}
inline GradScalar operator+(const GradScalar& a, double c) { return a + GradScalar(c); }
inline GradScalar operator+(double c, const GradScalar& a) { return GradScalar(c) + a; }
inline GradScalar operator-(const GradScalar& a, double c) { return a - GradScalar(c); }
inline GradScalar operator-(double c, const GradScalar& a) { return GradScalar(c) - a; }
inline GradScalar operator*(const GradScalar& a, double c) { return a * GradScalar(c); }
inline GradScalar operator*(double c, const GradScalar& a) { return GradScalar(c) * a; }
inline GradScalar operator/(const GradScalar& a, double c) { return a / GradScalar(c); }
inline GradScalar operator-(const GradScalar& a) { return GradScalar(0.0) - a; }

inline GradScalar exp(const GradScalar& a) {
  const double e = std::exp(a.v);
  return {e, a.g.size() ? Eigen::VectorXd(e * a.g) : Eigen::VectorXd(), a.stamp};
}
inline GradScalar square(const GradScalar& a) { return a * a; }

/// Requested derivative blocks for a row evaluation.
struct DerivRequest {
  bool grad = true;
  bool hess_diag = false;
  bool cross = false;
};

/// First/second/cross derivatives of the log density w.r.t. the continuous
/// coordinates of one row.
struct DerivBundle {
  double value = 0.0;
  std::vector<int> cont_vars;     // variable indices the slots refer to
  Eigen::VectorXd grad;           // per slot
  Eigen::VectorXd hess_diag;      // per slot
  Eigen::MatrixXd cross;          // per slot pair, symmetric, diagonal = hess_diag

  int slot_of(int var) const {
    for (size_t s = 0; s < cont_vars.size(); ++s)
      if (cont_vars[s] == var) return static_cast<int>(s);
    throw ModelError("derivative requested w.r.t. a non-continuous variable " +
                     std::to_string(var));
  }
  double grad_of(int var) const { return grad[slot_of(var)]; }
  double hess_of(int var) const { return hess_diag[slot_of(var)]; }
  double cross_of(int vi, int vj) const { return cross(slot_of(vi), slot_of(vj)); }
};

class EnergyModel {
 public:
  EnergyModel() = default;
  EnergyModel(Schema schema, FeatureBasis basis)
      : schema_(std::move(schema)),
        basis_(std::move(basis)),
        theta_(Eigen::VectorXd::Zero(basis_.K())),
        id_(next_id()) {
    if (basis_.d() != schema_.size())
      throw ModelError("basis dimension does not match schema");
    for (int j = 0; j < schema_.size(); ++j)
      if (basis_.bandwidth[j] <= 0) throw ModelError("bandwidths must be positive");
  }

  const Schema& schema() const { return schema_; }
  const FeatureBasis& basis() const { return basis_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  int K() const { return basis_.K(); }
  int d() const { return schema_.size(); }

  void set_theta(Eigen::VectorXd theta) {
    if (theta.size() != basis_.K()) throw ModelError("theta length must equal K");
    theta_ = std::move(theta);
    ++revision_;
  }

  uint64_t stamp() const { return (id_ << 24) ^ revision_; }

  Eigen::VectorXd embed(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return detail::embed_row(schema_, basis_.codebook, x);
  }

  /// Theta-independent row geometry shared by every evaluation.
  struct Geometry {
    Eigen::VectorXd u;      // embedded row
    Eigen::VectorXd dist2;  // K, bandwidth-scaled squared distances
    Eigen::VectorXd phi;    // K, feature values
    double anchor = 0.0;    // -alpha * ||x_cont||^2
  };

  Geometry geometry(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_row(x);
    Geometry geo;
    geo.u = embed(x);
    geo.dist2.resize(K());
    const Eigen::VectorXd w = inv_bw_sq();
    for (int k = 0; k < K(); ++k) {
      double s = 0;
      for (int j = 0; j < d(); ++j) {
        const double delta = geo.u[j] - basis_.centers(k, j);
        s += delta * delta * w[j];
      }
      geo.dist2[k] = s;
    }
    geo.phi = (-0.5 * geo.dist2.array()).exp();
    double sq = 0;
    for (int j = 0; j < d(); ++j)
      if (schema_.is_continuous(j)) sq += x[j] * x[j];
    geo.anchor = -basis_.alpha * sq;
    return geo;
  }

  /// Column of d(phi)/d(u_j): phi .* acoef where acoef_k = (c_kj - u_j) / h_j^2.
  Eigen::VectorXd acoef(const Geometry& geo, int j) const {
    const double w = 1.0 / (basis_.bandwidth[j] * basis_.bandwidth[j]);
    return (basis_.centers.col(j).array() - geo.u[j]) * w;
  }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Geometry geo = geometry(x);
    return theta_.dot(geo.phi) + geo.anchor;
  }

  /// Feature vector; equals the theta-gradient of log_density.
  Eigen::VectorXd features(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return geometry(x).phi;
  }

  DerivBundle derivatives(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const DerivRequest& req = {}) const {
    const Geometry geo = geometry(x);
    DerivBundle out;
    out.value = theta_.dot(geo.phi) + geo.anchor;
    out.cont_vars = schema_.continuous_indices();
    const int nc = static_cast<int>(out.cont_vars.size());
    Eigen::MatrixXd a(K(), nc);
    for (int s = 0; s < nc; ++s) a.col(s) = acoef(geo, out.cont_vars[s]);
    const Eigen::VectorXd tphi = theta_.cwiseProduct(geo.phi);
    if (req.grad) {
      out.grad.resize(nc);
      for (int s = 0; s < nc; ++s)
        out.grad[s] = tphi.dot(a.col(s)) - 2.0 * basis_.alpha * x[out.cont_vars[s]];
    }
    if (req.hess_diag || req.cross) {
      out.hess_diag.resize(nc);
      for (int s = 0; s < nc; ++s) {
        const int j = out.cont_vars[s];
        const double w = 1.0 / (basis_.bandwidth[j] * basis_.bandwidth[j]);
        out.hess_diag[s] =
            tphi.dot((a.col(s).array().square() - w).matrix()) - 2.0 * basis_.alpha;
      }
    }
    if (req.cross) {
      out.cross.resize(nc, nc);
      for (int s = 0; s < nc; ++s) {
        out.cross(s, s) = out.hess_diag[s];
        for (int t = s + 1; t < nc; ++t) {
          const double v = tphi.dot(a.col(s).cwiseProduct(a.col(t)));
          out.cross(s, t) = v;
          out.cross(t, s) = v;
        }
      }
    }
    return out;
  }

  double grad(const Eigen::Ref<const Eigen::VectorXd>& x, int i) const {
    require_continuous(i);
    const Geometry geo = geometry(x);
    return theta_.cwiseProduct(geo.phi).dot(acoef(geo, i)) - 2.0 * basis_.alpha * x[i];
  }

  double hess(const Eigen::Ref<const Eigen::VectorXd>& x, int i) const {
    require_continuous(i);
    const Geometry geo = geometry(x);
    const double w = 1.0 / (basis_.bandwidth[i] * basis_.bandwidth[i]);
    const Eigen::VectorXd a = acoef(geo, i);
    return theta_.cwiseProduct(geo.phi).dot((a.array().square() - w).matrix()) -
           2.0 * basis_.alpha;
  }

  double cross(const Eigen::Ref<const Eigen::VectorXd>& x, int i, int j) const {
    require_continuous(i);
    require_continuous(j);
    if (i == j) return hess(x, i);
    const Geometry geo = geometry(x);
    return theta_.cwiseProduct(geo.phi).dot(acoef(geo, i).cwiseProduct(acoef(geo, j)));
  }

  /// Squared distances after substituting category v into discrete variable i.
  Eigen::VectorXd subst_dist2(const Geometry& geo, int i, int v) const {
    const double w = 1.0 / (basis_.bandwidth[i] * basis_.bandwidth[i]);
    const double code = basis_.codebook[i][v];
    Eigen::VectorXd out = geo.dist2;
    for (int k = 0; k < K(); ++k) {
      const double d_old = geo.u[i] - basis_.centers(k, i);
      const double d_new = code - basis_.centers(k, i);
      out[k] += (d_new * d_new - d_old * d_old) * w;
      if (out[k] < 0) out[k] = 0;
    }
    return out;
  }

  /// Log densities at x with discrete coordinate i replaced by each category.
  Eigen::VectorXd substitute(const Eigen::Ref<const Eigen::VectorXd>& x, int i) const {
    require_discrete(i);
    const Geometry geo = geometry(x);
    const int m = schema_.cardinality(i);
    Eigen::VectorXd out(m);
    for (int v = 0; v < m; ++v) {
      const Eigen::VectorXd phi_v = (-0.5 * subst_dist2(geo, i, v).array()).exp();
      out[v] = theta_.dot(phi_v) + geo.anchor;
    }
    return out;
  }

  // --- gradient-carrying variants -----------------------------------------

  GradScalar log_density_g(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Geometry geo = geometry(x);
    return {theta_.dot(geo.phi) + geo.anchor, geo.phi, stamp()};
  }

  GradScalar grad_g(const Eigen::Ref<const Eigen::VectorXd>& x, int i) const {
    require_continuous(i);
    const Geometry geo = geometry(x);
    Eigen::VectorXd feat = geo.phi.cwiseProduct(acoef(geo, i));
    return {theta_.dot(feat) - 2.0 * basis_.alpha * x[i], std::move(feat), stamp()};
  }

  GradScalar hess_g(const Eigen::Ref<const Eigen::VectorXd>& x, int i) const {
    require_continuous(i);
    const Geometry geo = geometry(x);
    const double w = 1.0 / (basis_.bandwidth[i] * basis_.bandwidth[i]);
    const Eigen::VectorXd a = acoef(geo, i);
    Eigen::VectorXd feat = geo.phi.cwiseProduct((a.array().square() - w).matrix());
    return {theta_.dot(feat) - 2.0 * basis_.alpha, std::move(feat), stamp()};
  }

  GradScalar cross_g(const Eigen::Ref<const Eigen::VectorXd>& x, int i, int j) const {
    require_continuous(i);
    require_continuous(j);
    if (i == j) return hess_g(x, i);
    const Geometry geo = geometry(x);
    Eigen::VectorXd feat = geo.phi.cwiseProduct(acoef(geo, i).cwiseProduct(acoef(geo, j)));
    return {theta_.dot(feat), std::move(feat), stamp()};
  }

  std::vector<GradScalar> substitute_g(const Eigen::Ref<const Eigen::VectorXd>& x,
                                       int i) const {
    require_discrete(i);
    const Geometry geo = geometry(x);
    const int m = schema_.cardinality(i);
    std::vector<GradScalar> out;
    out.reserve(m);
    for (int v = 0; v < m; ++v) {
      Eigen::VectorXd phi_v = (-0.5 * subst_dist2(geo, i, v).array()).exp();
      out.emplace_back(theta_.dot(phi_v) + geo.anchor, std::move(phi_v), stamp());
    }
    return out;
  }

  Eigen::VectorXd inv_bw_sq() const {
    return basis_.bandwidth.array().square().inverse();
  }

  void require_continuous(int i) const {
    if (i < 0 || i >= d() || !schema_.is_continuous(i))
      throw ModelError("variable " + std::to_string(i) + " is not continuous");
  }
  void require_discrete(int i) const {
    if (i < 0 || i >= d() || !schema_.is_discrete(i))
      throw ModelError("variable " + std::to_string(i) + " is not discrete");
  }

 private:
  void check_row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != schema_.size()) throw ModelError("row width does not match schema");
    for (int j = 0; j < x.size(); ++j)
      if (!std::isfinite(x[j])) throw ModelError("non-finite input coordinate");
  }

  static uint64_t next_id() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  Schema schema_;
  FeatureBasis basis_;
  Eigen::VectorXd theta_;
  uint64_t id_ = 0;
  uint64_t revision_ = 0;
};

/// Theta-independent per-row geometry for a whole dataset, shared by the
/// loss and characterization-matrix evaluators so training iterations only
/// pay for theta-dependent work. Substituted features are derived from
/// distance shifts so they stay in [0, 1] and never overflow, even at the
/// bandwidth floor.
struct FeatureCache {
  Schema schema;
  FeatureBasis basis;
  std::vector<int> cont, disc;
  int n = 0;
  Eigen::VectorXd w;        // 1 / bandwidth^2
  double wc_sum = 0;        // sum of w over continuous coordinates
  Eigen::MatrixXd u;        // n x d embedded rows
  Eigen::MatrixXd xcont;    // n x |cont| raw continuous values
  Eigen::MatrixXd phi;      // n x K
  Eigen::MatrixXd dist2;    // n x K
  std::vector<Eigen::MatrixXd> sub_shift;  // (row * |disc| + slot): K x M distance shifts
  std::vector<Eigen::MatrixXd> sub_phi;    // same indexing: substituted features
  std::vector<std::vector<int>> disc_value;  // per row, category per disc slot

  FeatureCache(const EnergyModel& model, const Dataset& ds)
      : schema(model.schema()),
        basis(model.basis()),
        cont(schema.continuous_indices()),
        disc(schema.discrete_indices()) {
    if (!(ds.schema == schema))
      throw ModelError("feature cache: dataset schema does not match the model");
    ds.validate();
    n = ds.n();
    const int K = basis.K();
    const int d = schema.size();
    w = basis.bandwidth.array().square().inverse();
    for (int i : cont) wc_sum += w[i];

    u = detail::embed_all(schema, basis.codebook, ds.rows);
    xcont.resize(n, cont.size());
    for (size_t s = 0; s < cont.size(); ++s) xcont.col(s) = ds.rows.col(cont[s]);

    phi.resize(n, K);
    dist2.resize(n, K);
    sub_shift.reserve(static_cast<size_t>(n) * disc.size());
    sub_phi.reserve(static_cast<size_t>(n) * disc.size());
    disc_value.resize(n);
    for (int r = 0; r < n; ++r) {
      for (int k = 0; k < K; ++k) {
        double acc = 0;
        for (int j = 0; j < d; ++j) {
          const double delta = u(r, j) - basis.centers(k, j);
          acc += delta * delta * w[j];
        }
        dist2(r, k) = acc;
      }
      phi.row(r) = (-0.5 * dist2.row(r).array()).exp();
      for (size_t s = 0; s < disc.size(); ++s) {
        const int i = disc[s];
        const int m = schema.cardinality(i);
        Eigen::MatrixXd shift(K, m), feats(K, m);
        for (int v = 0; v < m; ++v) {
          const double code = basis.codebook[i][v];
          for (int k = 0; k < K; ++k) {
            const double d_old = u(r, i) - basis.centers(k, i);
            const double d_new = code - basis.centers(k, i);
            shift(k, v) = (d_new * d_new - d_old * d_old) * w[i];
            feats(k, v) = std::exp(-0.5 * std::max(0.0, dist2(r, k) + shift(k, v)));
          }
        }
        sub_shift.push_back(std::move(shift));
        sub_phi.push_back(std::move(feats));
        disc_value[r].push_back(static_cast<int>(ds.rows(r, i)));
      }
    }
  }

  int K() const { return basis.K(); }

  /// d(phi)/d(u_j) coefficient column for one row.
  Eigen::VectorXd acoef(int row, int j) const {
    return (basis.centers.col(j).array() - u(row, j)) * w[j];
  }

  const Eigen::MatrixXd& shift_of(int row, int disc_slot) const {
    return sub_shift[static_cast<size_t>(row) * disc.size() + disc_slot];
  }
  const Eigen::MatrixXd& sub_phi_of(int row, int disc_slot) const {
    return sub_phi[static_cast<size_t>(row) * disc.size() + disc_slot];
  }

  /// Features after substituting categories (a, b) into two discrete
  /// variables at once; shifts decompose per coordinate.
  Eigen::VectorXd double_sub_phi(int row, int slot_i, int a, int slot_j, int b) const {
    const Eigen::MatrixXd& si = shift_of(row, slot_i);
    const Eigen::MatrixXd& sj = shift_of(row, slot_j);
    Eigen::VectorXd out(K());
    for (int k = 0; k < K(); ++k)
      out[k] = std::exp(-0.5 * std::max(0.0, dist2(row, k) + si(k, a) + sj(k, b)));
    return out;
  }
};

/// Extracts the theta-gradient of a recorded scalar, rejecting stale tapes.
inline Eigen::VectorXd theta_gradient(const EnergyModel& model, const GradScalar& s) {
  if (s.stamp != 0 && s.stamp != model.stamp())
    throw ModelError("gradient tape references a stale model");
  if (s.g.size() == 0) return Eigen::VectorXd::Zero(model.K());
  return s.g;
}

inline nlohmann::json model_to_json(const EnergyModel& m) {
  nlohmann::json j;
  j["schema"] = schema_to_json(m.schema());
  nlohmann::json b;
  b["alpha"] = m.basis().alpha;
  b["bandwidth"] = std::vector<double>(m.basis().bandwidth.begin(),
                                       m.basis().bandwidth.end());
  nlohmann::json centers = nlohmann::json::array();
  for (int k = 0; k < m.K(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int jj = 0; jj < m.d(); ++jj) row.push_back(m.basis().centers(k, jj));
    centers.push_back(row);
  }
  b["centers"] = centers;
  nlohmann::json codebook = nlohmann::json::array();
  for (const auto& codes : m.basis().codebook)
    codebook.push_back(std::vector<double>(codes.begin(), codes.end()));
  b["codebook"] = codebook;
  j["basis"] = b;
  j["theta"] = std::vector<double>(m.theta().begin(), m.theta().end());
  return j;
}

inline EnergyModel model_from_json(const nlohmann::json& j) {
  Schema schema = schema_from_json(j.at("schema"));
  const auto& b = j.at("basis");
  FeatureBasis basis;
  basis.alpha = b.at("alpha").get<double>();
  const auto bw = b.at("bandwidth").get<std::vector<double>>();
  basis.bandwidth = Eigen::Map<const Eigen::VectorXd>(bw.data(), bw.size());
  const auto& centers = b.at("centers");
  basis.centers.resize(centers.size(), schema.size());
  for (size_t k = 0; k < centers.size(); ++k)
    for (int jj = 0; jj < schema.size(); ++jj)
      basis.centers(k, jj) = centers.at(k).at(jj).get<double>();
  for (const auto& codes : b.at("codebook")) {
    const auto cv = codes.get<std::vector<double>>();
    basis.codebook.push_back(Eigen::Map<const Eigen::VectorXd>(cv.data(), cv.size()));
  }
  EnergyModel m(std::move(schema), std::move(basis));
  const auto th = j.at("theta").get<std::vector<double>>();
  m.set_theta(Eigen::Map<const Eigen::VectorXd>(th.data(), th.size()));
  return m;
}

inline void save_model_json(const EnergyModel& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ModelError("cannot open '" + path + "' for writing");
  f << model_to_json(m).dump(2) << "\n";
}

inline EnergyModel load_model_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ModelError("cannot open model file '" + path + "'");
  nlohmann::json j;
  f >> j;
  return model_from_json(j);
}

}  // namespace gpm
