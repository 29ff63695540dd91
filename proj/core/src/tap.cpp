#include "nnbm/tap.hpp"

#include <cmath>

#include "nnbm/scalar_kernels.hpp"

namespace nnbm {

namespace {

enum class UpdateKind { Tap, Naive };

// Conjugate-parameter half of the update map.
void update_lr(const NnbmModel& model, const Eigen::VectorXd& lam, UpdateKind kind,
               bool paper_literal, const Eigen::VectorXd& m, const Eigen::VectorXd& v,
               Eigen::VectorXd& l, Eigen::VectorXd& r) {
  const int n = model.n();
  for (int i = 0; i < n; ++i) {
    double li = model.b[i];
    double ri = model.w_diag[i];
    for (const auto& [j, e] : model.topology.neighbors(i)) {
      const double w = model.w_edge[e];
      li -= w * m[j];
      if (kind == UpdateKind::Tap) {
        const double var_j = v[j] - m[j] * m[j];
        if (paper_literal) {
          li -= w * m[i] * var_j;
          ri -= w * w * v[j];
        } else {
          li -= w * w * m[i] * var_j;
          ri -= w * w * var_j;
        }
      }
    }
    li -= lam[i] * m[i];
    ri -= lam[i];
    l[i] = li;
    r[i] = ri;
  }
}

MomentState solve_impl(const NnbmModel& model, const LambdaField& lambda,
                       const SolverConfig& cfg, const std::optional<MomentState>& init,
                       UpdateKind kind, TapDiagnostics* diag) {
  cfg.check();
  const int n = model.n();
  if (lambda.lam.size() != n) throw DomainError("tap_solve: lambda length mismatch");
  {
    auto findings = validate(model);
    if (has_hard_failure(findings)) throw DomainError("tap_solve: invalid model");
  }

  MomentState s;
  bool own_start = false;
  if (init) {
    s = *init;
    if (s.m.size() != n || s.v.size() != n)
      throw DomainError("tap_solve: init state size mismatch");
  } else {
    // Independent-site start.
    own_start = true;
    s.m.resize(n);
    s.v.resize(n);
    for (int i = 0; i < n; ++i) {
      SiteParams p{model.b[i], model.w_diag[i]};
      s.m[i] = site_mean(p);
      s.v[i] = site_second_moment(p, s.m[i]);
    }
  }
  s.l.resize(n);
  s.r.resize(n);
  update_lr(model, lambda.lam, kind, cfg.paper_literal_eq16_17, s.m, s.v, s.l, s.r);
  if (s.r.minCoeff() < cfg.r_floor) {
    // Strong couplings can make the independent-site variances too large for
    // a feasible start. The first-order fixed point has smaller variances
    // (r there is just w_ii), so use it as the fallback starting state.
    if (own_start && kind == UpdateKind::Tap) {
      s = solve_impl(model, LambdaField::zeros(n), cfg, std::nullopt, UpdateKind::Naive,
                     nullptr);
      update_lr(model, lambda.lam, kind, cfg.paper_literal_eq16_17, s.m, s.v, s.l, s.r);
    }
    if (s.r.minCoeff() < cfg.r_floor)
      throw StabilityError("tap_solve: r below floor at the initial state");
  }

  Eigen::VectorXd m_hat(n), v_hat(n), m_try(n), v_try(n), l_try(n), r_try(n);
  double residual = 0.0;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    for (int i = 0; i < n; ++i) {
      SiteParams p{s.l[i], s.r[i]};
      m_hat[i] = site_mean(p);
      v_hat[i] = site_second_moment(p, m_hat[i]);
    }
    residual = std::max((m_hat - s.m).cwiseAbs().maxCoeff(),
                        (v_hat - s.v).cwiseAbs().maxCoeff());
    if (diag) {
      diag->iterations = iter;
      diag->residual = residual;
    }
    if (residual <= cfg.tol) return s;

    double gamma = cfg.damping;
    bool accepted = false;
    for (int retry = 0; retry <= 20; ++retry) {
      m_try = s.m + gamma * (m_hat - s.m);
      v_try = s.v + gamma * (v_hat - s.v);
      update_lr(model, lambda.lam, kind, cfg.paper_literal_eq16_17, m_try, v_try,
                l_try, r_try);
      if (r_try.minCoeff() >= cfg.r_floor) {
        accepted = true;
        break;
      }
      gamma *= 0.5;
    }
    if (!accepted)
      throw StabilityError("tap_solve: r stayed below floor after 20 damping retries");
    s.m.swap(m_try);
    s.v.swap(v_try);
    s.l.swap(l_try);
    s.r.swap(r_try);
  }
  throw ConvergenceError("tap_solve: no convergence within max_iter", residual);
}

}  // namespace

MomentState tap_solve(const NnbmModel& model, const LambdaField& lambda,
                      const SolverConfig& cfg, const std::optional<MomentState>& init,
                      TapDiagnostics* diag) {
  return solve_impl(model, lambda, cfg, init, UpdateKind::Tap, diag);
}

MomentState naive_mf_solve(const NnbmModel& model, const SolverConfig& cfg,
                           const std::optional<MomentState>& init, TapDiagnostics* diag) {
  return solve_impl(model, LambdaField::zeros(model.n()), cfg, init, UpdateKind::Naive,
                    diag);
}

double tap_residual(const NnbmModel& model, const LambdaField& lambda,
                    const SolverConfig& cfg, const MomentState& s) {
  const int n = model.n();
  Eigen::VectorXd l(n), r(n);
  update_lr(model, lambda.lam, UpdateKind::Tap, cfg.paper_literal_eq16_17, s.m, s.v, l, r);
  double res = std::max((l - s.l).cwiseAbs().maxCoeff(), (r - s.r).cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i) {
    SiteParams p{l[i], r[i]};
    const double m_hat = site_mean(p);
    const double v_hat = site_second_moment(p, m_hat);
    res = std::max({res, std::fabs(m_hat - s.m[i]), std::fabs(v_hat - s.v[i])});
  }
  return res;
}

double free_energy_2nd(const NnbmModel& model, const MomentState& s) {
  const int n = model.n();
  double f = -model.b.dot(s.m) + 0.5 * model.w_diag.dot(s.v);
  for (int i = 0; i < n; ++i) {
    SiteParams p{s.l[i], s.r[i]};
    f += s.l[i] * s.m[i] - 0.5 * s.r[i] * s.v[i] - site_log_partition(p);
  }
  const auto& edges = model.topology.edges();
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    const auto& [i, j] = edges[e];
    const double w = model.w_edge[e];
    f += w * s.m[i] * s.m[j];
    f -= 0.5 * w * w * (s.v[i] - s.m[i] * s.m[i]) * (s.v[j] - s.m[j] * s.m[j]);
  }
  return f;
}

double approx_log_likelihood(const NnbmModel& model, const MomentStats& stats,
                             const MomentState& s) {
  double ll = model.b.dot(stats.mean1) - 0.5 * model.w_diag.dot(stats.mean2_diag) -
              model.w_edge.dot(stats.mean2_edge);
  return ll + free_energy_2nd(model, s);
}

}  // namespace nnbm
