#include "nnbm/sampling.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace nnbm {

double sample_truncated_site(double a, double w_ii, Rng& rng) {
  if (!(w_ii > 0.0)) throw DomainError("sample_truncated_site: w_ii must be > 0");
  const double sigma = 1.0 / std::sqrt(w_ii);
  const double mu = a / w_ii;
  if (mu >= 0.0) {
    // Acceptance probability >= 1/2.
    for (;;) {
      const double x = mu + sigma * rng.normal();
      if (x >= 0.0) return x;
    }
  }
  // Standardized lower bound alpha > 0; shifted-exponential proposal with
  // the optimal rate (Robert's accept-reject for one-sided truncation).
  const double alpha = -mu / sigma;
  const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
  for (;;) {
    const double z = alpha + rng.exponential(rate);
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return mu + sigma * z;
  }
}

Dataset gibbs_sample(const NnbmModel& model, const SamplerConfig& cfg) {
  cfg.check();
  {
    auto findings = validate(model);
    if (has_hard_failure(findings)) throw DomainError("gibbs_sample: invalid model");
  }
  const int n = model.n();
  Rng rng(cfg.seed);

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = sample_truncated_site(model.b[i], model.w_diag[i], rng);

  auto sweep = [&] {
    for (int i = 0; i < n; ++i) {
      double a = model.b[i];
      for (const auto& [j, e] : model.topology.neighbors(i)) a -= model.w_edge[e] * x[j];
      x[i] = sample_truncated_site(a, model.w_diag[i], rng);
    }
  };

  for (int t = 0; t < cfg.burn_in; ++t) sweep();

  Dataset d;
  d.samples.resize(cfg.n_samples, n);
  for (int s = 0; s < cfg.n_samples; ++s) {
    for (int t = 0; t < cfg.thin; ++t) sweep();
    d.samples.row(s) = x;
  }
  d.provenance = {"gibbs", cfg.seed, cfg.burn_in, cfg.thin, kRngAlgorithm};
  return d;
}

namespace {

// Nodes and weights of the P-point Gauss-Legendre rule on [-1, 1],
// by Newton iteration on the Legendre recurrence.
void gauss_legendre(int p, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(p, 0.0);
  weights.assign(p, 0.0);
  for (int k = 0; k < (p + 1) / 2; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (p + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= p; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = p * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    nodes[k] = -x;
    nodes[p - 1 - k] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[k] = w;
    weights[p - 1 - k] = w;
  }
}

// Composite rule on [0, upper]: ceil(points/16) panels of the 16-point rule.
void composite_rule(double upper, int points, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  static const auto base = [] {
    std::pair<std::vector<double>, std::vector<double>> nw;
    gauss_legendre(16, nw.first, nw.second);
    return nw;
  }();
  const auto& gl_x = base.first;
  const auto& gl_w = base.second;
  const int panels = (points + 15) / 16;
  const double h = upper / panels;
  nodes.clear();
  weights.clear();
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (int k = 0; k < 16; ++k) {
      nodes.push_back(mid + 0.5 * h * gl_x[k]);
      weights.push_back(0.5 * h * gl_w[k]);
    }
  }
}

// Per-dimension truncation points: iterate the single-site bound
// a_i^max = b_i + Σ_j max(0, -w_ij) U_j, then U_i = max(0, a_i^max/w_ii) + z σ_i,
// with z sized so the neglected Gaussian tail is 10x below tail_mass_cut.
Eigen::VectorXd upper_limits(const NnbmModel& model, double tail_mass_cut) {
  const int n = model.n();
  double z = 6.0;
  while (0.5 * std::erfc(z / std::sqrt(2.0)) > 0.1 * tail_mass_cut && z < 40.0) z += 1.0;
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i)
    u[i] = std::max(0.0, model.b[i] / model.w_diag[i]) + z / std::sqrt(model.w_diag[i]);
  for (int pass = 0; pass < 6; ++pass) {
    for (int i = 0; i < n; ++i) {
      double a_max = model.b[i];
      for (const auto& [j, e] : model.topology.neighbors(i))
        a_max += std::max(0.0, -model.w_edge[e]) * u[j];
      u[i] = std::max(0.0, a_max / model.w_diag[i]) + z / std::sqrt(model.w_diag[i]);
    }
  }
  return u;
}

ExactMoments quadrature_pass(const NnbmModel& model, const Eigen::VectorXd& upper,
                             int points_per_dim) {
  const int n = model.n();
  std::vector<std::vector<double>> nodes(n), weights(n);
  for (int i = 0; i < n; ++i)
    composite_rule(upper[i], points_per_dim, nodes[i], weights[i]);

  const int p = static_cast<int>(nodes[0].size());
  Eigen::VectorXd x(n);
  std::vector<int> idx(n, 0);

  auto log_weight = [&](const std::vector<int>& ix) {
    double lw = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = nodes[i][ix[i]];
      lw += std::log(weights[i][ix[i]]);
    }
    return lw - energy(model, x);
  };

  // Pass 1: peak of log(weight) + log-integrand for a stable exponent shift.
  double shift = -std::numeric_limits<double>::infinity();
  const long total = static_cast<long>(std::pow(static_cast<double>(p), n));
  for (long t = 0; t < total; ++t) {
    long rem = t;
    for (int i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(rem % p);
      rem /= p;
    }
    shift = std::max(shift, log_weight(idx));
  }

  // Pass 2: accumulate normalizer and moments.
  double z_acc = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(n, n);
  for (long t = 0; t < total; ++t) {
    long rem = t;
    for (int i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(rem % p);
      rem /= p;
    }
    const double wgt = std::exp(log_weight(idx) - shift);
    z_acc += wgt;
    for (int i = 0; i < n; ++i) {
      s1[i] += wgt * x[i];
      for (int j = i; j < n; ++j) s2(i, j) += wgt * x[i] * x[j];
    }
  }
  ExactMoments out;
  out.mean1 = s1 / z_acc;
  out.second = s2 / z_acc;
  out.second = out.second.selfadjointView<Eigen::Upper>();
  out.log_partition = shift + std::log(z_acc);
  return out;
}

}  // namespace

ExactMoments quadrature_moments(const NnbmModel& model, const OracleConfig& cfg) {
  cfg.check();
  const int n = model.n();
  if (n > 3)
    throw UnsupportedSizeError("quadrature_moments: deterministic quadrature limited to n <= 3");
  {
    auto findings = validate(model);
    if (has_hard_failure(findings)) throw DomainError("quadrature_moments: invalid model");
  }
  const Eigen::VectorXd upper = upper_limits(model, cfg.tail_mass_cut);

  ExactMoments coarse = quadrature_pass(model, upper, cfg.points_per_dim);
  int points = cfg.points_per_dim;
  for (int refine = 0; refine < 5; ++refine) {
    points *= 2;
    ExactMoments fine = quadrature_pass(model, upper, points);
    const double delta = std::max(
        {(fine.mean1 - coarse.mean1).cwiseAbs().maxCoeff(),
         (fine.second - coarse.second).cwiseAbs().maxCoeff(),
         std::fabs(fine.log_partition - coarse.log_partition)});
    if (delta < 1e-9) return fine;
    coarse = std::move(fine);
  }
  throw ConvergenceError("quadrature_moments: refinement did not certify 1e-9", 1.0);
}

McMoments mc_moments(const NnbmModel& model, const SamplerConfig& cfg) {
  const Dataset d = gibbs_sample(model, cfg);
  const int n = model.n();
  const int batches = 32;
  const int per = std::max(1, cfg.n_samples / batches);
  const int used_batches = std::max(2, cfg.n_samples / per);
  if (cfg.n_samples < 2)
    throw DomainError("mc_moments: need at least 2 samples for batch-means errors");

  McMoments out;
  out.mean1 = d.samples.colwise().mean();
  Eigen::MatrixXd sec = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < d.size(); ++s)
    sec += d.samples.row(s).transpose() * d.samples.row(s);
  out.second = sec / d.size();

  Eigen::MatrixXd bm1(used_batches, n);
  std::vector<Eigen::MatrixXd> bm2(used_batches);
  for (int b = 0; b < used_batches; ++b) {
    const auto block = d.samples.middleRows(b * per, per);
    bm1.row(b) = block.colwise().mean();
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < per; ++s) s2 += block.row(s).transpose() * block.row(s);
    bm2[b] = s2 / per;
  }
  out.se_mean1.resize(n);
  for (int i = 0; i < n; ++i) {
    const double mu = bm1.col(i).mean();
    const double var = (bm1.col(i).array() - mu).square().sum() / (used_batches - 1);
    out.se_mean1[i] = std::sqrt(var / used_batches);
  }
  out.se_second.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double mu = 0.0;
      for (int b = 0; b < used_batches; ++b) mu += bm2[b](i, j);
      mu /= used_batches;
      double var = 0.0;
      for (int b = 0; b < used_batches; ++b) {
        const double dlt = bm2[b](i, j) - mu;
        var += dlt * dlt;
      }
      var /= (used_batches - 1);
      out.se_second(i, j) = std::sqrt(var / used_batches);
    }
  }
  return out;
}

}  // namespace nnbm
