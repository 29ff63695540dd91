#include "nnbm/response.hpp"

#include <cmath>
#include <sstream>

namespace nnbm {

namespace {

struct SiteCoeffs {
  Eigen::VectorXd chi;   // v - m²
  Eigen::VectorXd c;     // (l·chi + m)/(2r)
  Eigen::VectorXd s_w2;  // Σ_k w_ik² chi_k
};

SiteCoeffs site_coeffs(const NnbmModel& model, const MomentState& s) {
  const int n = model.n();
  SiteCoeffs co;
  co.chi = s.v - s.m.cwiseProduct(s.m);
  co.c.resize(n);
  co.s_w2 = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    co.c[i] = (s.l[i] * co.chi[i] + s.m[i]) / (2.0 * s.r[i]);
    for (const auto& [k, e] : model.topology.neighbors(i)) {
      const double w = model.w_edge[e];
      co.s_w2[i] += w * w * co.chi[k];
    }
  }
  return co;
}

}  // namespace

ResponseState susp_solve(const NnbmModel& model, const MomentState& s,
                         const LambdaField& lambda, const SolverConfig& cfg,
                         const std::optional<ResponseState>& init,
                         ResponseDiagnostics* diag) {
  cfg.check();
  const int n = model.n();
  if (lambda.lam.size() != n) throw DomainError("susp_solve: lambda length mismatch");
  if (s.m.size() != n || s.v.size() != n || s.l.size() != n || s.r.size() != n)
    throw DomainError("susp_solve: state size mismatch");
  if (tap_residual(model, lambda, cfg, s) > 100.0 * cfg.tol)
    throw DomainError("susp_solve: moment state is stale for this model and lambda");

  const SiteCoeffs co = site_coeffs(model, s);

  ResponseState st;
  if (init && init->M.rows() == n && init->M.cols() == n && init->V.rows() == n &&
      init->V.cols() == n) {
    st.M = init->M;
    st.V = init->V;
  } else {
    st.M = co.chi.asDiagonal();
    st.V.setZero(n, n);
    for (int i = 0; i < n; ++i) st.V(i, i) = (s.m[i] + s.l[i] * co.chi[i]) / s.r[i];
  }
  st.L.resize(n, n);
  st.R.resize(n, n);

  Eigen::MatrixXd M_hat(n, n), V_hat(n, n), L_hat(n, n), R_hat(n, n);
  double residual = 0.0;
  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    // Jacobi: (L, R) from the current (M, V), then candidate (M, V).
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        double sum_w = 0.0;   // Σ w_ik M_kj
        double sum_w2 = 0.0;  // Σ w_ik² (V_kj - 2 m_k M_kj)
        for (const auto& [k, e] : model.topology.neighbors(i)) {
          const double w = model.w_edge[e];
          sum_w += w * st.M(k, j);
          sum_w2 += w * w * (st.V(k, j) - 2.0 * s.m[k] * st.M(k, j));
        }
        if (diag) diag->edge_ops += model.topology.neighbors(i).size();
        const double lij = (i == j ? 1.0 : 0.0) - sum_w -
                           (st.M(i, j) * co.s_w2[i] + s.m[i] * sum_w2) -
                           st.M(i, j) * lambda.lam[i];
        const double rij = -sum_w2;
        L_hat(i, j) = lij;
        R_hat(i, j) = rij;
        const double mij = co.chi[i] * lij - co.c[i] * rij;
        M_hat(i, j) = mij;
        V_hat(i, j) = (s.m[i] * lij + s.l[i] * mij - s.v[i] * rij) / s.r[i];
      }
    }
    residual = std::max((M_hat - st.M).cwiseAbs().maxCoeff(),
                        (V_hat - st.V).cwiseAbs().maxCoeff());
    if (diag) {
      diag->sweeps = sweep + 1;
      diag->residual = residual;
    }
    if (residual <= cfg.tol) {
      st.L = L_hat;
      st.R = R_hat;
      return st;
    }
    st.M += cfg.damping * (M_hat - st.M);
    st.V += cfg.damping * (V_hat - st.V);
  }
  throw ConvergenceError("susp_solve: no convergence within max_iter", residual);
}

LambdaField diagonal_matching(const NnbmModel& model, const MomentState& s,
                              const ResponseState& resp) {
  const int n = model.n();
  LambdaField out = LambdaField::zeros(n);
  for (int i = 0; i < n; ++i) {
    const double chi_i = s.v[i] - s.m[i] * s.m[i];
    if (chi_i < 1e-12)
      throw DomainError("diagonal_matching: degenerate variance at vertex " +
                        std::to_string(i + 1));
    double a = 0.0;
    for (const auto& [k, e] : model.topology.neighbors(i)) {
      const double w = model.w_edge[e];
      const double chi_k = s.v[k] - s.m[k] * s.m[k];
      a -= w * resp.M(k, i);
      a -= w * w * (chi_i * chi_k + s.m[i] * (resp.V(k, i) - 2.0 * s.m[k] * resp.M(k, i)));
    }
    const double c_i = (s.l[i] * chi_i + s.m[i]) / (2.0 * s.r[i]);
    const double b = -c_i * resp.R(i, i);
    out.lam[i] = a / chi_i + b / (chi_i * chi_i);
  }
  return out;
}

IsuspResult isusp_solve(const NnbmModel& model, const SolverConfig& cfg,
                        const std::optional<MomentState>& init_state,
                        const std::optional<LambdaField>& init_lambda,
                        const std::optional<ResponseState>& init_resp,
                        ResponseDiagnostics* diag) {
  cfg.check();
  const int n = model.n();
  constexpr double kLambdaDamping = 0.5;

  IsuspResult res;
  res.lambda = init_lambda ? *init_lambda : LambdaField::zeros(n);
  res.state = tap_solve(model, res.lambda, cfg, init_state);
  res.response = susp_solve(model, res.state, res.lambda, cfg, init_resp, diag);

  for (int outer = 0; outer < cfg.max_iter; ++outer) {
    const LambdaField target = diagonal_matching(model, res.state, res.response);
    LambdaField lam_new{res.lambda.lam +
                        kLambdaDamping * (target.lam - res.lambda.lam)};
    MomentState s_new = tap_solve(model, lam_new, cfg, res.state);
    ResponseState r_new = susp_solve(model, s_new, lam_new, cfg, res.response, diag);

    const double change =
        std::max({(s_new.m - res.state.m).cwiseAbs().maxCoeff(),
                  (s_new.v - res.state.v).cwiseAbs().maxCoeff(),
                  (lam_new.lam - res.lambda.lam).cwiseAbs().maxCoeff()});
    res.state = std::move(s_new);
    res.response = std::move(r_new);
    res.lambda = std::move(lam_new);
    res.residual_trace.push_back(change);
    res.outer_iterations = outer + 1;

    if (change <= cfg.tol && diagonal_gap(res.state, res.response) <= 10.0 * cfg.tol)
      return res;
  }
  std::ostringstream msg;
  msg << "isusp_solve: no convergence within max_iter; residual trace tail:";
  const size_t tail = std::min<size_t>(res.residual_trace.size(), 8);
  for (size_t k = res.residual_trace.size() - tail; k < res.residual_trace.size(); ++k)
    msg << ' ' << res.residual_trace[k];
  throw ConvergenceError(msg.str(), res.residual_trace.back());
}

Eigen::MatrixXd covariance_matrix(const MomentState& s, const ResponseState& resp) {
  if (resp.M.rows() != s.m.size() || resp.M.cols() != s.m.size())
    throw DomainError("covariance_matrix: size mismatch");
  return 0.5 * (resp.M + resp.M.transpose());
}

double diagonal_gap(const MomentState& s, const ResponseState& resp) {
  return (resp.M.diagonal() - (s.v - s.m.cwiseProduct(s.m))).cwiseAbs().maxCoeff();
}

double max_asymmetry(const ResponseState& resp) {
  return (resp.M - resp.M.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace nnbm
