#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nnbm/errors.hpp"

namespace nnbm {

/// Undirected graph over vertices 0..n-1 with a duplicate-free edge list and
/// per-vertex adjacency. Vertex and edge indices are 0-based internally; file
/// formats use 1-based ids.
class Topology {
 public:
  Topology() = default;
  Topology(int n, std::vector<std::pair<int, int>> edges);

  int n() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  /// Adjacency of vertex i as (neighbor, edge index) pairs.
  const std::vector<std::pair<int, int>>& neighbors(int i) const { return adj_[i]; }

  bool operator==(const Topology& other) const {
    return n_ == other.n_ && edges_ == other.edges_;
  }

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
};

/// Quadratic-energy model over nonnegative variables:
/// E(x) = -Σ b_i x_i + ½ Σ w_ii x_i² + Σ_(i,j)∈E w_ij x_i x_j.
struct NnbmModel {
  Topology topology;
  Eigen::VectorXd b;
  Eigen::VectorXd w_diag;
  Eigen::VectorXd w_edge;  // aligned with topology.edges()

  int n() const { return topology.n(); }
};

/// Where a dataset came from; serialized verbatim into the sidecar.
struct Provenance {
  std::string source;  // "gibbs" or a file path
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thin = 1;
  std::string rng_algorithm;
};

struct Dataset {
  Eigen::MatrixXd samples;  // N x n, entries >= 0
  Provenance provenance;

  int size() const { return static_cast<int>(samples.rows()); }
  int width() const { return static_cast<int>(samples.cols()); }
};

/// First and second sample moments of a dataset over a given topology.
struct MomentStats {
  Eigen::VectorXd mean1;       // <x_i>
  Eigen::VectorXd mean2_diag;  // <x_i²>
  Eigen::VectorXd mean2_edge;  // <x_i x_j> per topology edge
};

struct Finding {
  enum class Severity { Hard, Advisory };
  Severity severity;
  std::string message;
};

double energy(const NnbmModel& model, const Eigen::VectorXd& x);

/// Hard failures for w_ii <= 0 or malformed structure; advisory warning when
/// the coupling matrix is neither entrywise nonnegative nor positive
/// semidefinite (the two sufficient co-positivity conditions checked here).
std::vector<Finding> validate(const NnbmModel& model);

bool has_hard_failure(const std::vector<Finding>& findings);

/// rows x cols grid with open boundaries, b_i ~ U[b_low, b_high) from the
/// seeded generator, constant w_ii and w_ij.
NnbmModel build_square_grid(int rows, int cols, double b_low, double b_high,
                            double w_diag, double w_edge, std::uint64_t seed);

/// Complete-graph cooperative model: b_i = beta,
/// w_ij = beta(δ_ij + 1/n - (eps/n) cos(2π |i-j| / n)).
/// With circular_distance, |i-j| is replaced by min(|i-j|, n-|i-j|).
NnbmModel build_orientation_tuning(int n, double beta, double eps,
                                   bool circular_distance = false);

MomentStats sample_moments(const Dataset& d, const Topology& t);

}  // namespace nnbm
