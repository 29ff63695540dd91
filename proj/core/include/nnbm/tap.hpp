#pragma once

#include <Eigen/Dense>
#include <optional>

#include "nnbm/model.hpp"

namespace nnbm {

/// Converged mean-field state: means m, second moments v, and the conjugate
/// site parameters (l, r) that reproduce them.
struct MomentState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  Eigen::VectorXd l;
  Eigen::VectorXd r;
};

/// Diagonal-consistency multipliers Λ. The all-zero field is the plain setting.
struct LambdaField {
  Eigen::VectorXd lam;

  static LambdaField zeros(int n) { return {Eigen::VectorXd::Zero(n)}; }
};

struct SolverConfig {
  double tol = 1e-9;       // sup-norm residual of the update map
  int max_iter = 10000;
  double damping = 0.5;    // fraction of the new iterate mixed in, (0, 1]
  double r_floor = 1e-8;   // positivity guard on the conjugate r

  // Compatibility switch: use the modified update equations in their
  // literally printed form (no square on the coupling in the l correction,
  // uncentered v in the r sum) instead of the internally consistent ones.
  bool paper_literal_eq16_17 = false;

  void check() const {
    if (!(tol > 0.0)) throw DomainError("SolverConfig: tol must be > 0");
    if (max_iter < 1) throw DomainError("SolverConfig: max_iter must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0))
      throw DomainError("SolverConfig: damping must be in (0, 1]");
    if (!(r_floor > 0.0)) throw DomainError("SolverConfig: r_floor must be > 0");
  }
};

struct TapDiagnostics {
  int iterations = 0;
  double residual = 0.0;
};

/// Damped Jacobi iteration of the self-consistency equations
///   l_i = b_i - Σ_j w_ij m_j - Σ_j w_ij² m_i (v_j - m_j²) - Λ_i m_i
///   r_i = w_ii - Σ_j w_ij² (v_j - m_j²) - Λ_i
///   m_i = site_mean(l_i, r_i),  v_i = site_second_moment(l_i, r_i, m_i)
/// until re-applying the map moves no component by more than cfg.tol.
/// An all-zero Λ gives the plain second-order equations.
MomentState tap_solve(const NnbmModel& model, const LambdaField& lambda,
                      const SolverConfig& cfg,
                      const std::optional<MomentState>& init = std::nullopt,
                      TapDiagnostics* diag = nullptr);

/// First-order variant: every w² correction deleted, Λ ≡ 0.
MomentState naive_mf_solve(const NnbmModel& model, const SolverConfig& cfg,
                           const std::optional<MomentState>& init = std::nullopt,
                           TapDiagnostics* diag = nullptr);

/// Sup-norm change of one application of the update map at s.
double tap_residual(const NnbmModel& model, const LambdaField& lambda,
                    const SolverConfig& cfg, const MomentState& s);

/// Second-order free energy evaluated at the given state.
double free_energy_2nd(const NnbmModel& model, const MomentState& s);

/// Second-order approximation of the per-sample log-likelihood:
/// b·<x>_D - ½ w_diag·<x²>_D - Σ_E w_ij <x_i x_j>_D + F_2nd.
double approx_log_likelihood(const NnbmModel& model, const MomentStats& stats,
                             const MomentState& s);

}  // namespace nnbm
