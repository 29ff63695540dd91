#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "nnbm/model.hpp"
#include "nnbm/rng.hpp"

namespace nnbm {

struct SamplerConfig {
  int burn_in = 2000;  // sweeps discarded
  int thin = 5;        // sweeps between recorded samples
  int n_samples = 1;
  std::uint64_t seed = 0;

  void check() const {
    if (burn_in < 0) throw DomainError("SamplerConfig: burn_in must be >= 0");
    if (thin < 1) throw DomainError("SamplerConfig: thin must be >= 1");
    if (n_samples < 1) throw DomainError("SamplerConfig: n_samples must be >= 1");
  }
};

struct OracleConfig {
  int points_per_dim = 96;
  double tail_mass_cut = 1e-12;  // neglected single-site tail mass bound
  int mc_samples = 100000;
  std::uint64_t mc_seed = 0;

  void check() const {
    if (points_per_dim < 16) throw DomainError("OracleConfig: points_per_dim must be >= 16");
    if (!(tail_mass_cut > 0.0 && tail_mass_cut <= 1e-10))
      throw DomainError("OracleConfig: tail_mass_cut must be in (0, 1e-10]");
  }
};

/// Exact draw from the density ∝ exp(a·x - w_ii·x²/2) on [0, ∞): a
/// zero-truncated Gaussian with location a/w_ii and scale 1/sqrt(w_ii).
/// Plain Gaussian rejection when the location is nonnegative, one-sided
/// exponential-proposal rejection otherwise.
double sample_truncated_site(double a, double w_ii, Rng& rng);

/// Sequential-sweep Gibbs chain; records every thin-th sweep after burn_in.
Dataset gibbs_sample(const NnbmModel& model, const SamplerConfig& cfg);

/// Ground-truth moments. `second` is the full symmetric matrix of <x_i x_j>.
struct ExactMoments {
  Eigen::VectorXd mean1;
  Eigen::MatrixXd second;
  double log_partition = 0.0;
};

/// Tensor-product composite Gauss-Legendre quadrature, n <= 3 only.
/// Refines by doubling points_per_dim until every moment moves < 1e-9.
ExactMoments quadrature_moments(const NnbmModel& model, const OracleConfig& cfg);

/// Gibbs-based moment estimates with batch-means standard errors.
struct McMoments {
  Eigen::VectorXd mean1;
  Eigen::VectorXd se_mean1;
  Eigen::MatrixXd second;
  Eigen::MatrixXd se_second;
};

McMoments mc_moments(const NnbmModel& model, const SamplerConfig& cfg);

}  // namespace nnbm
