#pragma once

#include "nnbm/errors.hpp"

namespace nnbm {

/// Natural parameters of the single-site density p(x) ∝ exp(l·x - r·x²/2) on [0, ∞).
/// The integral only exists for r > 0.
struct SiteParams {
  double l = 0.0;
  double r = 1.0;
};

/// Scaled complementary error function erfcx(t) = exp(t²) erfc(t).
///
/// Relative error below 1e-13 for |t| <= 26. For t < -26.6 the value
/// exceeds the double range and +inf is returned; callers needing that
/// regime must work with ln_erfcx instead.
double erfcx(double t);

/// log(erfcx(t)) without overflow for any finite t.
double ln_erfcx(double t);

/// Mean of the rectified Gaussian with parameters p. Strictly positive.
double site_mean(const SiteParams& p);

/// Second moment v = (1 + l·m)/r, with m = site_mean(p).
double site_second_moment(const SiteParams& p, double m);

/// log ∫₀^∞ exp(l·x - r·x²/2) dx.
double site_log_partition(const SiteParams& p);

namespace detail {
// Exposed for branch-consistency tests: direct formula and the
// continued-fraction tail evaluation used when l/sqrt(2r) < -4.
double site_mean_direct(double l, double r);
double site_mean_cf(double l, double r);
// Tail of the Laplace continued fraction: u + 1/(sqrt(pi) erfcx(-u)) for u = -s < 0.
double mean_cf_tail(double s);
}  // namespace detail

}  // namespace nnbm
