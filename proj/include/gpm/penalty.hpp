#pragma once

// Sparsity penalties applied to the characterization-matrix entries: plain
// and adaptive l1, SCAD, and MCP. All operate on squared-convention entries,
// which are differentiable at zero; derivative kinks use the left branch.

#include <gpm/gpm_matrix.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace gpm {

enum class PenaltyKind { L1, AdaptiveL1, Scad, Mcp };

inline std::string penalty_kind_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::AdaptiveL1: return "adaptive-l1";
    case PenaltyKind::Scad: return "scad";
    case PenaltyKind::Mcp: return "mcp";
  }
  return "?";
}

inline PenaltyKind penalty_kind_from_name(const std::string& s) {
  if (s == "l1") return PenaltyKind::L1;
  if (s == "adaptive-l1") return PenaltyKind::AdaptiveL1;
  if (s == "scad") return PenaltyKind::Scad;
  if (s == "mcp") return PenaltyKind::Mcp;
  throw std::invalid_argument("unknown penalty kind '" + s + "'");
}

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::Scad;
  double lambda = 0.1;     // in [0, 1]
  double scad_a = 3.7;     // > 2
  double mcp_gamma = 3.0;  // > 1
  double epsilon = 1e-6;   // adaptive-l1 pilot offset
  std::optional<Eigen::MatrixXd> adaptive_weights;

  void validate(int d = -1) const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw std::invalid_argument("penalty lambda must be in [0, 1]");
    if (!(scad_a > 2.0)) throw std::invalid_argument("scad_a must exceed 2");
    if (!(mcp_gamma > 1.0)) throw std::invalid_argument("mcp_gamma must exceed 1");
    if ((kind == PenaltyKind::AdaptiveL1) != adaptive_weights.has_value()) {
      if (kind == PenaltyKind::AdaptiveL1)
        throw std::invalid_argument("adaptive-l1 requires pilot weights");
      throw std::invalid_argument("pilot weights are only valid for adaptive-l1");
    }
    if (adaptive_weights && d >= 0 &&
        (adaptive_weights->rows() != d || adaptive_weights->cols() != d))
      throw std::invalid_argument("adaptive weights must be d x d");
  }
};

/// Penalty of one nonnegative entry.
inline double rho(const PenaltyConfig& cfg, double t, double weight = 1.0) {
  if (t < 0) throw std::invalid_argument("penalty argument must be nonnegative");
  const double lam = cfg.lambda;
  switch (cfg.kind) {
    case PenaltyKind::L1:
      return lam * t;
    case PenaltyKind::AdaptiveL1:
      return lam * weight * t;
    case PenaltyKind::Scad: {
      const double a = cfg.scad_a;
      if (t <= lam) return lam * t;
      if (t <= a * lam) return (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0));
      return (a + 1.0) * lam * lam / 2.0;
    }
    case PenaltyKind::Mcp: {
      const double g = cfg.mcp_gamma;
      if (t <= g * lam) return lam * t - t * t / (2.0 * g);
      return g * lam * lam / 2.0;
    }
  }
  return 0;
}

/// Left derivative of rho (the kinks of SCAD and MCP are derivative-continuous,
/// so the branch choice only matters at exact plateau boundaries).
inline double rho_prime(const PenaltyConfig& cfg, double t, double weight = 1.0) {
  if (t < 0) throw std::invalid_argument("penalty argument must be nonnegative");
  const double lam = cfg.lambda;
  switch (cfg.kind) {
    case PenaltyKind::L1:
      return lam;
    case PenaltyKind::AdaptiveL1:
      return lam * weight;
    case PenaltyKind::Scad: {
      const double a = cfg.scad_a;
      if (t <= lam) return lam;
      if (t <= a * lam) return (a * lam - t) / (a - 1.0);
      return 0.0;
    }
    case PenaltyKind::Mcp: {
      const double g = cfg.mcp_gamma;
      if (t <= g * lam) return lam - t / g;
      return 0.0;
    }
  }
  return 0;
}

inline double pair_weight(const PenaltyConfig& cfg, int i, int j) {
  if (cfg.kind != PenaltyKind::AdaptiveL1) return 1.0;
  return (*cfg.adaptive_weights)(i, j);
}

/// Total penalty over the upper triangle of a squared-convention matrix.
inline double penalty_value(const PenaltyConfig& cfg, const GpmMatrix& gpm) {
  if (gpm.convention != OmegaConvention::Squared)
    throw std::invalid_argument("penalty expects the squared convention");
  cfg.validate(gpm.d());
  double acc = 0;
  for (int i = 0; i < gpm.d(); ++i)
    for (int j = i + 1; j < gpm.d(); ++j) {
      const double t = gpm.omega(i, j);
      if (t < 0) throw std::invalid_argument("negative characterization entry");
      acc += rho(cfg, t, pair_weight(cfg, i, j));
    }
  return acc;
}

/// Chain rule through rho and the recorded d(omega)/d(theta).
inline Eigen::VectorXd penalty_theta_gradient(const PenaltyConfig& cfg,
                                              const GpmTape& tape) {
  if (tape.gpm.convention != OmegaConvention::Squared)
    throw std::invalid_argument("penalty gradient expects the squared convention");
  cfg.validate(tape.gpm.d());
  const int d = tape.gpm.d();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(tape.domega.cols());
  if (cfg.lambda == 0.0) return out;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double t = tape.gpm.omega(i, j);
      const double rp = rho_prime(cfg, t, pair_weight(cfg, i, j));
      if (rp != 0.0) out += rp * tape.domega.row(detail::pair_index(i, j, d)).transpose();
    }
  return out;
}

/// Adaptive reweighting from an unpenalized pilot estimate.
inline Eigen::MatrixXd adaptive_weights_from_pilot(const GpmMatrix& pilot,
                                                   double epsilon = 1e-6) {
  const int d = pilot.d();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) w(i, j) = 1.0 / (pilot.omega(i, j) + epsilon);
  return w;
}

}  // namespace gpm
