#include "support/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "nnbm/rng.hpp"

namespace nnbm::testing {

namespace {

using Fn = std::function<long double(long double)>;

long double simpson(const Fn& f, long double a, long double b) {
  return (b - a) / 6.0L * (f(a) + 4.0L * f(0.5L * (a + b)) + f(b));
}

long double adaptive_simpson_rec(const Fn& f, long double a, long double b,
                                 long double whole, long double tol, int depth) {
  const long double m = 0.5L * (a + b);
  const long double left = simpson(f, a, m);
  const long double right = simpson(f, m, b);
  const long double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0L * tol)
    return left + right + delta / 15.0L;
  return adaptive_simpson_rec(f, a, m, left, 0.5L * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, right, 0.5L * tol, depth - 1);
}

long double adaptive_simpson(const Fn& f, long double a, long double b, long double tol) {
  return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 28);
}

// Adaptive refinement seeded with uniform panels, so narrow features cannot
// slip between the initial probe points. Only panels containing mass refine
// further, so a mild per-panel tolerance is enough.
long double adaptive_simpson_panels(const Fn& f, long double a, long double b,
                                    long double tol, int panels) {
  long double total = 0.0L;
  const long double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const long double lo = a + p * h;
    const long double hi = (p + 1 == panels) ? b : lo + h;
    total += adaptive_simpson(f, lo, hi, tol / 16.0L);
  }
  return total;
}

}  // namespace

long double erfcx_oracle(long double t) {
  constexpr long double two_over_sqrt_pi = 1.12837916709551257389615890312154517L;
  if (t < 0.0L) return 2.0L * std::exp(t * t) - erfcx_oracle(-t);
  const Fn f = [t](long double u) { return std::exp(-u * u - 2.0L * t * u); };
  // Integrand is below exp(-144) past u = 12 for every t >= 0, decays
  // monotonically from f(0) = 1, and so refines safely from the left edge.
  const long double scale = 1.0L / (1.0L + t);
  const long double integral = adaptive_simpson(f, 0.0L, 12.0L, 1e-17L * scale);
  return two_over_sqrt_pi * integral;
}

namespace {

// Shifted integral of x^k exp(l x - r x²/2) over [0, upper]: the exponent peak
// is subtracted so the integrand is O(1).
long double site_integral_shifted(double l, double r, int k, long double& shift_out) {
  const long double ll = l, rr = r;
  const long double peak_x = std::max(0.0L, ll / rr);
  const long double shift = ll * peak_x - 0.5L * rr * peak_x * peak_x;
  const long double sigma = 1.0L / std::sqrt(rr);
  const long double upper = peak_x + 25.0L * sigma;
  const Fn f = [=](long double x) {
    long double p = 1.0L;
    for (int i = 0; i < k; ++i) p *= x;
    return p * std::exp(ll * x - 0.5L * rr * x * x - shift);
  };
  shift_out = shift;
  const long double scale = std::pow(std::max(peak_x + sigma, sigma), k);
  const int panels = static_cast<int>(std::ceil(upper / (0.25L * sigma)));
  return adaptive_simpson_panels(f, 0.0L, upper, 1e-16L * scale * sigma, panels);
}

}  // namespace

long double site_moment_oracle(double l, double r, int k) {
  long double s0, sk;
  const long double z = site_integral_shifted(l, r, 0, s0);
  const long double mk = site_integral_shifted(l, r, k, sk);
  return mk / z;  // shifts are identical by construction
}

long double site_log_partition_oracle(double l, double r) {
  long double shift;
  const long double z = site_integral_shifted(l, r, 0, shift);
  return shift + std::log(z);
}

double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

SiteParams site_params_from_moments(double m, double v) {
  if (!(v > m * m)) throw std::invalid_argument("site_params_from_moments: need v > m²");
  // Gaussian-matching start.
  double r = 1.0 / (v - m * m);
  double l = m * r;
  for (int it = 0; it < 200; ++it) {
    SiteParams p{l, r};
    const double mean = site_mean(p);
    const double second = site_second_moment(p, mean);
    const double f1 = mean - m;
    const double f2 = second - v;
    if (std::fabs(f1) < 1e-13 && std::fabs(f2) < 1e-13) return p;
    // Moment derivatives: third and fourth moments from the recurrence
    // E[x^{k+1}] = (l E[x^k] + k E[x^{k-1}]) / r.
    const double third = (l * second + 2.0 * mean) / r;
    const double fourth = (l * third + 3.0 * second) / r;
    const double dm_dl = second - mean * mean;
    const double dm_dr = -0.5 * (third - mean * second);
    const double dv_dl = third - mean * second;
    const double dv_dr = -0.5 * (fourth - second * second);
    const double det = dm_dl * dv_dr - dm_dr * dv_dl;
    double dl = (-f1 * dv_dr + f2 * dm_dr) / det;
    double dr = (-f2 * dm_dl + f1 * dv_dl) / det;
    // Keep r positive; backtrack the full Newton step if needed.
    double step = 1.0;
    while (r + step * dr <= 0.1 * r) step *= 0.5;
    l += step * dl;
    r += step * dr;
  }
  throw std::runtime_error("site_params_from_moments: Newton did not converge");
}

NnbmModel random_complete_model(int n, double w_low, double w_high, double b_low,
                                double b_high, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  NnbmModel model;
  model.topology = Topology(n, std::move(edges));
  model.b.resize(n);
  for (int i = 0; i < n; ++i) model.b[i] = rng.uniform(b_low, b_high);
  model.w_diag = Eigen::VectorXd::Ones(n);
  model.w_edge.resize(model.topology.edge_count());
  for (int e = 0; e < model.topology.edge_count(); ++e)
    model.w_edge[e] = rng.uniform(w_low, w_high);
  return model;
}

}  // namespace nnbm::testing
