#include "nnbm/scalar_kernels.hpp"

#include <cmath>
#include <limits>

namespace nnbm {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kHalfLogPiOver2 = 0.22579135264472743236;  // 0.5*log(pi/2)

void require_finite(double t, const char* who) {
  if (!std::isfinite(t)) throw DomainError(std::string(who) + ": non-finite argument");
}

void require_positive_r(double r, const char* who) {
  if (!(r > 0.0)) throw DomainError(std::string(who) + ": r must be > 0");
}

// erfcx on [0, inf), rational approximations of W. J. Cody's CALERF
// (netlib specfun). Three regimes, each accurate to a few ulp.
double erfcx_nonneg(double y) {
  if (y <= 0.46875) {
    const double a[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                         3.77485237685302021e02, 3.20937758913846947e03,
                         1.85777706184603153e-1};
    const double b[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                         1.28261652607737228e03, 2.84423683343917062e03};
    const double z = y * y;
    double num = a[4] * z;
    double den = z;
    for (int i = 0; i < 3; ++i) {
      num = (num + a[i]) * z;
      den = (den + b[i]) * z;
    }
    const double erf_y = y * (num + a[3]) / (den + b[3]);
    return std::exp(z) * (1.0 - erf_y);
  }
  if (y <= 4.0) {
    const double c[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                         6.61191906371416295e01, 2.98635138197400131e02,
                         8.81952221241769090e02, 1.71204761263407058e03,
                         2.05107837782607147e03, 1.23033935479799725e03,
                         2.15311535474403846e-8};
    const double d[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                         5.37181101862009858e02, 1.62138957456669019e03,
                         3.29079923573345963e03, 4.36261909014324716e03,
                         3.43936767414372164e03, 1.23033935480374942e03};
    double num = c[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + c[i]) * y;
      den = (den + d[i]) * y;
    }
    return (num + c[7]) / (den + d[7]);
  }
  const double p[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                       1.25781726111229246e-1, 1.60837851487422766e-2,
                       6.58749161529837803e-4, 1.63153871373020978e-2};
  const double q[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                       5.27905102951428412e-1, 6.05183413124413191e-2,
                       2.33520497626869185e-3};
  const double z = 1.0 / (y * y);  // underflows to 0 for huge y, giving the 1/(y*sqrt(pi)) limit
  double num = p[5] * z;
  double den = z;
  for (int i = 0; i < 4; ++i) {
    num = (num + p[i]) * z;
    den = (den + q[i]) * z;
  }
  const double corr = z * (num + p[4]) / (den + q[4]);
  return (kInvSqrtPi - corr) / y;
}

// exp(t*t) with the argument split so the rounding error of t*t does not
// amplify: t*t = y16*y16 + (t-y16)(t+y16) with y16 = t rounded to 1/16,
// whose square is exact.
double exp_tt(double t) {
  const double y = std::fabs(t);
  const double y16 = std::floor(y * 16.0) / 16.0;
  const double del = (y - y16) * (y + y16);
  return std::exp(y16 * y16) * std::exp(del);
}

}  // namespace

double erfcx(double t) {
  require_finite(t, "erfcx");
  if (t >= 0.0) return erfcx_nonneg(t);
  // erfcx(t) = 2 exp(t²) - erfcx(-t); overflows past t*t > log(DBL_MAX).
  const double tt = t * t;
  if (tt > 708.0) return std::numeric_limits<double>::infinity();
  return 2.0 * exp_tt(t) - erfcx_nonneg(-t);
}

double ln_erfcx(double t) {
  require_finite(t, "ln_erfcx");
  if (t >= 0.0) return std::log(erfcx_nonneg(t));
  // ln(2 e^{t²} - erfcx(-t)) = t² + ln(2 - e^{-t²} erfcx(-t)).
  // The subtrahend lies in (0, 1], so the log argument is in [1, 2).
  const double tt = t * t;
  const double small = std::exp(-tt) * erfcx_nonneg(-t);
  return tt + std::log(2.0 - small);
}

namespace detail {

double mean_cf_tail(double s) {
  // Laplace continued fraction for 1/(sqrt(pi) erfcx(s)) = s + K(a_k / s),
  // a_k = k/2. The leading s cancels the -s of the mean formula exactly,
  // so the tail K is returned. Backward recurrence, fixed depth.
  const int depth = 96;
  double t = s;
  for (int k = depth; k >= 2; --k) t = s + (0.5 * k) / t;
  return 0.5 / t;
}

double site_mean_direct(double l, double r) {
  const double u = l / std::sqrt(2.0 * r);
  double inv;  // (1/sqrt(pi)) / erfcx(-u)
  if (u > 25.0) {
    // erfcx(-u) would overflow; the boundary correction is ~exp(-u²), gone.
    inv = 0.0;
  } else {
    inv = 1.0 / (std::sqrt(M_PI) * erfcx(-u));
  }
  return l / r + std::sqrt(2.0 / r) * inv;
}

double site_mean_cf(double l, double r) {
  const double s = -l / std::sqrt(2.0 * r);
  return std::sqrt(2.0 / r) * mean_cf_tail(s);
}

}  // namespace detail

double site_mean(const SiteParams& p) {
  require_finite(p.l, "site_mean");
  require_positive_r(p.r, "site_mean");
  const double u = p.l / std::sqrt(2.0 * p.r);
  // Below the switchover the direct formula is a difference of two nearly
  // equal terms; the continued-fraction tail evaluates it without cancellation.
  if (u < -4.0) return detail::site_mean_cf(p.l, p.r);
  return detail::site_mean_direct(p.l, p.r);
}

double site_second_moment(const SiteParams& p, double m) {
  require_finite(p.l, "site_second_moment");
  require_positive_r(p.r, "site_second_moment");
  return (1.0 + p.l * m) / p.r;
}

double site_log_partition(const SiteParams& p) {
  require_finite(p.l, "site_log_partition");
  require_positive_r(p.r, "site_log_partition");
  return kHalfLogPiOver2 - 0.5 * std::log(p.r) + ln_erfcx(-p.l / std::sqrt(2.0 * p.r));
}

}  // namespace nnbm
