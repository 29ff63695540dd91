#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "nnbm/tap.hpp"

namespace nnbm {

/// Linear-response matrices on top of a converged moment state:
/// M = ∂m/∂b, V = ∂v/∂b, L = ∂l/∂b, R = ∂r/∂b.
struct ResponseState {
  Eigen::MatrixXd M;
  Eigen::MatrixXd V;
  Eigen::MatrixXd L;
  Eigen::MatrixXd R;
};

struct ResponseDiagnostics {
  int sweeps = 0;
  double residual = 0.0;
  std::uint64_t edge_ops = 0;  // neighbor-term evaluations, for cost-scaling checks
};

/// Solve the susceptibility equations by damped Jacobi sweeps, column by
/// column, to per-entry residual <= cfg.tol. The state s must satisfy the
/// update map for (model, lambda) to within 100*cfg.tol.
ResponseState susp_solve(const NnbmModel& model, const MomentState& s,
                         const LambdaField& lambda, const SolverConfig& cfg,
                         const std::optional<ResponseState>& init = std::nullopt,
                         ResponseDiagnostics* diag = nullptr);

/// Multipliers from the diagonal matching equation,
/// Λ_i = A_i/(v_i - m_i²) + B_i/(v_i - m_i²)².
LambdaField diagonal_matching(const NnbmModel& model, const MomentState& s,
                              const ResponseState& resp);

struct IsuspResult {
  MomentState state;
  ResponseState response;
  LambdaField lambda;
  std::vector<double> residual_trace;  // joint (m, v, Λ) change per outer loop
  int outer_iterations = 0;
};

/// Alternate the Λ-modified moment solve, the response solve, and a damped
/// diagonal-matching update of Λ until the joint change of (m, v, Λ) falls
/// below cfg.tol and |M_ii - (v_i - m_i²)| <= 10*cfg.tol everywhere.
IsuspResult isusp_solve(const NnbmModel& model, const SolverConfig& cfg,
                        const std::optional<MomentState>& init_state = std::nullopt,
                        const std::optional<LambdaField>& init_lambda = std::nullopt,
                        const std::optional<ResponseState>& init_resp = std::nullopt,
                        ResponseDiagnostics* diag = nullptr);

/// Symmetrized covariance estimate (M + Mᵀ)/2.
Eigen::MatrixXd covariance_matrix(const MomentState& s, const ResponseState& resp);

/// max_i |M_ii - (v_i - m_i²)|.
double diagonal_gap(const MomentState& s, const ResponseState& resp);

/// max_ij |M_ij - M_ji|, reported as a diagnostic rather than hidden.
double max_asymmetry(const ResponseState& resp);

}  // namespace nnbm
