#pragma once

// Synthetic benchmark generators with known ground-truth Markov networks:
// butterfly distributions (pairs that are uncorrelated but dependent) in
// continuous, discrete, and mixed variants, and distributions sampled from
// random decomposable DAGs (nonlinear SEMs, random multinomials, and a mixed
// scheme that temporarily discretizes continuous parents).

#include <gpm/graphs.hpp>
#include <gpm/types.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpm {

enum class GenFamily {
  ButterflyContinuous,
  ButterflyDiscrete,
  ButterflyMixed,
  RandomGraphContinuous,
  RandomGraphDiscrete,
  RandomGraphMixed,
};

inline std::string family_name(GenFamily f) {
  switch (f) {
    case GenFamily::ButterflyContinuous: return "butterfly-c";
    case GenFamily::ButterflyDiscrete: return "butterfly-d";
    case GenFamily::ButterflyMixed: return "butterfly-m";
    case GenFamily::RandomGraphContinuous: return "randgraph-c";
    case GenFamily::RandomGraphDiscrete: return "randgraph-d";
    case GenFamily::RandomGraphMixed: return "randgraph-m";
  }
  return "?";
}

inline GenFamily family_from_name(const std::string& s) {
  if (s == "butterfly-c") return GenFamily::ButterflyContinuous;
  if (s == "butterfly-d") return GenFamily::ButterflyDiscrete;
  if (s == "butterfly-m") return GenFamily::ButterflyMixed;
  if (s == "randgraph-c") return GenFamily::RandomGraphContinuous;
  if (s == "randgraph-d") return GenFamily::RandomGraphDiscrete;
  if (s == "randgraph-m") return GenFamily::RandomGraphMixed;
  throw std::invalid_argument("unknown family '" + s + "'");
}

inline bool is_butterfly(GenFamily f) {
  return f == GenFamily::ButterflyContinuous || f == GenFamily::ButterflyDiscrete ||
         f == GenFamily::ButterflyMixed;
}

struct GenSpec {
  GenFamily family = GenFamily::ButterflyContinuous;
  int d = 8;                  // butterfly families require even d (d = 2 * pairs)
  int n = 1000;
  uint64_t seed = 0;
  double edge_density = 0.3;  // random-graph families
  int mlp_width = 16;         // nonlinear SEM hidden width
  int cardinality = 3;        // butterfly-d / butterfly-m category count
  int card_min = 2;           // random-graph discrete cardinality range
  int card_max = 4;

  void validate() const {
    if (n < 1) throw std::invalid_argument("generator: n >= 1 required");
    if (is_butterfly(family)) {
      if (d < 2 || d % 2 != 0)
        throw std::invalid_argument("butterfly families require even d >= 2");
      if (cardinality < 2) throw std::invalid_argument("cardinality must be >= 2");
    } else {
      if (d < 2) throw std::invalid_argument("generator: d >= 2 required");
      if (!(edge_density > 0 && edge_density <= 1))
        throw std::invalid_argument("edge density must be in (0, 1]");
      if (card_min < 2 || card_max < card_min)
        throw std::invalid_argument("invalid cardinality range");
    }
  }
};

struct Generated {
  Dataset data;
  UndirectedGraph truth;
};

namespace detail {

inline UndirectedGraph matching_graph(int pairs) {
  UndirectedGraph g(2 * pairs);
  for (int p = 0; p < pairs; ++p) g.set_edge(2 * p, 2 * p + 1);
  return g;
}

inline Eigen::VectorXd dirichlet_ones(int m, std::mt19937_64& rng) {
  std::exponential_distribution<double> expd(1.0);
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v[i] = expd(rng) + 1e-9;
  return v / v.sum();
}

inline int sample_categorical(const Eigen::VectorXd& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (int i = 0; i < p.size(); ++i) {
    u -= p[i];
    if (u <= 0) return i;
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace detail

/// Pairs (P, Q = W * P) with independent standard-normal P and W:
/// uncorrelated within the pair yet dependent. Columns are ordered
/// (P1, Q1, ..., Pr, Qr); the ground truth is the perfect matching.
inline Generated gen_butterfly_continuous(int pairs, int n, uint64_t seed) {
  if (pairs < 1) throw std::invalid_argument("butterfly: pairs >= 1 required");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<VariableSpec> vars;
  for (int p = 0; p < pairs; ++p) {
    vars.push_back(continuous_var("P" + std::to_string(p + 1)));
    vars.push_back(continuous_var("Q" + std::to_string(p + 1)));
  }
  Eigen::MatrixXd rows(n, 2 * pairs);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < pairs; ++p) {
      const double pv = gauss(rng);
      const double wv = gauss(rng);
      rows(i, 2 * p) = pv;
      rows(i, 2 * p + 1) = wv * pv;
    }
  Dataset ds{Schema(std::move(vars)), std::move(rows)};
  return {std::move(ds), detail::matching_graph(pairs)};
}

/// Discrete analogue of the product coupling: P uniform on {0..M-1},
/// Q = (W * P) mod M with independent uniform W. Uniform marginals,
/// nontrivial within-pair dependence, pairs mutually independent.
inline Generated gen_butterfly_discrete(int pairs, int n, uint64_t seed, int cardinality) {
  if (pairs < 1) throw std::invalid_argument("butterfly: pairs >= 1 required");
  if (cardinality < 2) throw std::invalid_argument("butterfly: cardinality >= 2 required");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> unif(0, cardinality - 1);
  std::vector<VariableSpec> vars;
  for (int p = 0; p < pairs; ++p) {
    vars.push_back(discrete_var("P" + std::to_string(p + 1), cardinality));
    vars.push_back(discrete_var("Q" + std::to_string(p + 1), cardinality));
  }
  Eigen::MatrixXd rows(n, 2 * pairs);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < pairs; ++p) {
      const int pv = unif(rng);
      const int wv = unif(rng);
      rows(i, 2 * p) = pv;
      rows(i, 2 * p + 1) = (wv * pv) % cardinality;
    }
  Dataset ds{Schema(std::move(vars)), std::move(rows)};
  return {std::move(ds), detail::matching_graph(pairs)};
}

/// Each pair is independently continuous or discrete; the continuous
/// proportion is itself drawn once, uniformly, per dataset.
inline Generated gen_butterfly_mixed(int pairs, int n, uint64_t seed, int cardinality = 3) {
  if (pairs < 1) throw std::invalid_argument("butterfly: pairs >= 1 required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  const double continuous_share = unif01(rng);
  std::vector<bool> pair_continuous(pairs);
  for (int p = 0; p < pairs; ++p) pair_continuous[p] = unif01(rng) < continuous_share;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> unifm(0, cardinality - 1);
  std::vector<VariableSpec> vars;
  for (int p = 0; p < pairs; ++p) {
    if (pair_continuous[p]) {
      vars.push_back(continuous_var("P" + std::to_string(p + 1)));
      vars.push_back(continuous_var("Q" + std::to_string(p + 1)));
    } else {
      vars.push_back(discrete_var("P" + std::to_string(p + 1), cardinality));
      vars.push_back(discrete_var("Q" + std::to_string(p + 1), cardinality));
    }
  }
  Eigen::MatrixXd rows(n, 2 * pairs);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < pairs; ++p) {
      if (pair_continuous[p]) {
        const double pv = gauss(rng);
        rows(i, 2 * p) = pv;
        rows(i, 2 * p + 1) = gauss(rng) * pv;
      } else {
        const int pv = unifm(rng);
        rows(i, 2 * p) = pv;
        rows(i, 2 * p + 1) = (unifm(rng) * pv) % cardinality;
      }
    }
  Dataset ds{Schema(std::move(vars)), std::move(rows)};
  return {std::move(ds), detail::matching_graph(pairs)};
}

namespace detail {

/// One-hidden-layer tanh perceptron with standard-normal weights.
struct RandomMlp {
  Eigen::MatrixXd w1;  // width x inputs
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;  // width
  double b2 = 0;

  static RandomMlp make(int inputs, int width, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    RandomMlp mlp;
    mlp.w1.resize(width, inputs);
    for (int i = 0; i < width; ++i)
      for (int j = 0; j < inputs; ++j) mlp.w1(i, j) = gauss(rng);
    mlp.b1.resize(width);
    for (int i = 0; i < width; ++i) mlp.b1[i] = gauss(rng);
    mlp.w2.resize(width);
    for (int i = 0; i < width; ++i) mlp.w2[i] = gauss(rng);
    mlp.b2 = gauss(rng);
    return mlp;
  }

  double operator()(const Eigen::VectorXd& x) const {
    return w2.dot(((w1 * x + b1).array().tanh()).matrix()) + b2;
  }
};

/// Equal-frequency bin index per row for a generated column.
inline std::vector<int> equal_frequency_bins(const Eigen::VectorXd& col, int bins) {
  const int n = static_cast<int>(col.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return col[a] < col[b]; });
  std::vector<int> out(n);
  for (int rank = 0; rank < n; ++rank)
    out[order[rank]] = std::min(bins - 1, rank * bins / n);
  return out;
}

}  // namespace detail

/// Sampled parameters a test can check the output against.
struct GenDetails {
  std::map<int, Eigen::VectorXd> root_cpds;  // parentless discrete variables
  std::vector<bool> is_continuous;
};

/// Data from a random decomposable DAG. Continuous family: nonlinear SEM
/// with random-weight perceptrons and centered Exp(1) noise. Discrete
/// family: multinomial CPDs drawn per parent configuration. Mixed family:
/// types assigned with equal probability; continuous parents get temporary
/// equal-frequency discretized copies that partition the regressions and
/// parameterize child CPDs, and are dropped afterwards.
inline Generated gen_random_graph(const GenSpec& spec, GenDetails* details = nullptr) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Dag dag = random_decomposable_dag(spec.d, spec.edge_density, rng());
  const UndirectedGraph truth = moralize(dag);
  const auto topo = dag.topological_order();
  const int n = spec.n;
  const int d = spec.d;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> expd(1.0);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);

  if (details) details->is_continuous.assign(d, spec.family == GenFamily::RandomGraphContinuous);

  if (spec.family == GenFamily::RandomGraphContinuous) {
    Eigen::MatrixXd cols(n, d);
    for (int v : topo) {
      const auto& ps = dag.parents[v];
      if (ps.empty()) {
        for (int i = 0; i < n; ++i) cols(i, v) = expd(rng) - 1.0;
      } else {
        auto mlp = detail::RandomMlp::make(static_cast<int>(ps.size()), spec.mlp_width, rng);
        Eigen::VectorXd pa(ps.size());
        for (int i = 0; i < n; ++i) {
          for (size_t s = 0; s < ps.size(); ++s) pa[s] = cols(i, ps[s]);
          cols(i, v) = mlp(pa) + (expd(rng) - 1.0);
        }
      }
    }
    std::vector<VariableSpec> vars;
    for (int v = 0; v < d; ++v) vars.push_back(continuous_var("X" + std::to_string(v + 1)));
    Dataset ds{Schema(std::move(vars)), std::move(cols)};
    return {std::move(ds), truth};
  }

  if (spec.family == GenFamily::RandomGraphDiscrete) {
    std::uniform_int_distribution<int> card_pick(spec.card_min, spec.card_max);
    std::vector<int> card(d);
    for (int v = 0; v < d; ++v) card[v] = card_pick(rng);
    Eigen::MatrixXd cols(n, d);
    for (int v : topo) {
      const auto& ps = dag.parents[v];
      int configs = 1;
      for (int p : ps) configs *= card[p];
      std::vector<Eigen::VectorXd> cpd(configs);
      for (int cfg = 0; cfg < configs; ++cfg) cpd[cfg] = detail::dirichlet_ones(card[v], rng);
      if (details && ps.empty()) details->root_cpds[v] = cpd[0];
      for (int i = 0; i < n; ++i) {
        int cfg = 0;
        for (int p : ps) cfg = cfg * card[p] + static_cast<int>(cols(i, p));
        cols(i, v) = detail::sample_categorical(cpd[cfg], rng);
      }
    }
    std::vector<VariableSpec> vars;
    for (int v = 0; v < d; ++v)
      vars.push_back(discrete_var("X" + std::to_string(v + 1), card[v]));
    Dataset ds{Schema(std::move(vars)), std::move(cols)};
    return {std::move(ds), truth};
  }

  // mixed family
  std::uniform_int_distribution<int> bins_pick(2, 5);
  std::uniform_int_distribution<int> card_pick(spec.card_min, spec.card_max);
  std::vector<bool> is_cont(d);
  std::vector<int> card(d, 0), bins(d, 0);
  for (int v = 0; v < d; ++v) {
    is_cont[v] = unif01(rng) < 0.5;
    if (is_cont[v])
      bins[v] = bins_pick(rng);
    else
      card[v] = card_pick(rng);
  }
  if (details) details->is_continuous.assign(is_cont.begin(), is_cont.end());

  Eigen::MatrixXd cols(n, d);
  std::vector<std::vector<int>> temp_bins(d);  // discretized copies of continuous columns
  for (int v : topo) {
    const auto& ps = dag.parents[v];
    // every parent contributes a discrete partition key: its own categories
    // when discrete, its temporary binned copy when continuous
    std::vector<int> key_card;
    for (int p : ps) key_card.push_back(is_cont[p] ? bins[p] : card[p]);
    int configs = 1;
    for (int kc : key_card) configs *= kc;
    auto config_of = [&](int i) {
      int cfg = 0;
      for (size_t s = 0; s < ps.size(); ++s) {
        const int p = ps[s];
        const int val = is_cont[p] ? temp_bins[p][i] : static_cast<int>(cols(i, p));
        cfg = cfg * key_card[s] + val;
      }
      return cfg;
    };

    if (is_cont[v]) {
      std::vector<int> cont_parents;
      for (int p : ps)
        if (is_cont[p]) cont_parents.push_back(p);
      if (ps.empty()) {
        for (int i = 0; i < n; ++i) cols(i, v) = gauss(rng);
      } else {
        // per-partition random linear regression on the continuous parents
        std::vector<Eigen::VectorXd> coef(configs);
        std::vector<double> intercept(configs);
        for (int cfg = 0; cfg < configs; ++cfg) {
          coef[cfg].resize(cont_parents.size());
          for (int s = 0; s < coef[cfg].size(); ++s) coef[cfg][s] = gauss(rng);
          intercept[cfg] = 2.0 * gauss(rng);
        }
        for (int i = 0; i < n; ++i) {
          const int cfg = config_of(i);
          double val = intercept[cfg] + gauss(rng);
          for (size_t s = 0; s < cont_parents.size(); ++s)
            val += coef[cfg][s] * cols(i, cont_parents[s]);
          cols(i, v) = val;
        }
      }
      temp_bins[v] = detail::equal_frequency_bins(cols.col(v), bins[v]);
    } else {
      std::vector<Eigen::VectorXd> cpd(configs);
      for (int cfg = 0; cfg < configs; ++cfg) cpd[cfg] = detail::dirichlet_ones(card[v], rng);
      if (details && ps.empty()) details->root_cpds[v] = cpd[0];
      for (int i = 0; i < n; ++i)
        cols(i, v) = detail::sample_categorical(cpd[config_of(i)], rng);
    }
  }
  // temporary discretized copies are dropped; only the d real columns remain
  std::vector<VariableSpec> vars;
  for (int v = 0; v < d; ++v) {
    if (is_cont[v])
      vars.push_back(continuous_var("X" + std::to_string(v + 1)));
    else
      vars.push_back(discrete_var("X" + std::to_string(v + 1), card[v]));
  }
  Dataset ds{Schema(std::move(vars)), std::move(cols)};
  return {std::move(ds), truth};
}

/// Dispatch on the family.
inline Generated generate(const GenSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case GenFamily::ButterflyContinuous:
      return gen_butterfly_continuous(spec.d / 2, spec.n, spec.seed);
    case GenFamily::ButterflyDiscrete:
      return gen_butterfly_discrete(spec.d / 2, spec.n, spec.seed, spec.cardinality);
    case GenFamily::ButterflyMixed:
      return gen_butterfly_mixed(spec.d / 2, spec.n, spec.seed, spec.cardinality);
    default:
      return gen_random_graph(spec);
  }
}

inline nlohmann::json genspec_to_json(const GenSpec& s) {
  nlohmann::json j;
  j["family"] = family_name(s.family);
  j["d"] = s.d;
  j["n"] = s.n;
  j["seed"] = s.seed;
  if (!is_butterfly(s.family)) {
    j["edge_density"] = s.edge_density;
    j["card_min"] = s.card_min;
    j["card_max"] = s.card_max;
    if (s.family == GenFamily::RandomGraphContinuous) j["mlp_width"] = s.mlp_width;
  } else if (s.family != GenFamily::ButterflyContinuous) {
    j["cardinality"] = s.cardinality;
  }
  return j;
}

inline GenSpec genspec_from_json(const nlohmann::json& j) {
  GenSpec s;
  s.family = family_from_name(j.at("family").get<std::string>());
  s.d = j.at("d").get<int>();
  s.n = j.at("n").get<int>();
  s.seed = j.at("seed").get<uint64_t>();
  if (j.contains("edge_density")) s.edge_density = j["edge_density"].get<double>();
  if (j.contains("mlp_width")) s.mlp_width = j["mlp_width"].get<int>();
  if (j.contains("cardinality")) s.cardinality = j["cardinality"].get<int>();
  if (j.contains("card_min")) s.card_min = j["card_min"].get<int>();
  if (j.contains("card_max")) s.card_max = j["card_max"].get<int>();
  return s;
}

}  // namespace gpm
