#include "nnbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nnbm/rng.hpp"

namespace nnbm {

Topology::Topology(int n, std::vector<std::pair<int, int>> edges)
    : n_(n), edges_(std::move(edges)) {
  if (n_ < 1) throw DomainError("Topology: vertex count must be >= 1");
  std::set<std::pair<int, int>> seen;
  adj_.assign(n_, {});
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    auto& [i, j] = edges_[e];
    if (i < 0 || i >= n_ || j < 0 || j >= n_)
      throw DomainError("Topology: edge endpoint out of range");
    if (i == j) throw DomainError("Topology: self-loop not allowed");
    if (i > j) std::swap(i, j);
    if (!seen.insert({i, j}).second) throw DomainError("Topology: duplicate edge");
    adj_[i].push_back({j, e});
    adj_[j].push_back({i, e});
  }
}

double energy(const NnbmModel& model, const Eigen::VectorXd& x) {
  const int n = model.n();
  if (x.size() != n) throw DomainError("energy: configuration length mismatch");
  if ((x.array() < 0.0).any()) throw DomainError("energy: negative entry");
  double e = -model.b.dot(x) + 0.5 * model.w_diag.dot(x.cwiseProduct(x));
  const auto& edges = model.topology.edges();
  for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
    e += model.w_edge[k] * x[edges[k].first] * x[edges[k].second];
  }
  return e;
}

std::vector<Finding> validate(const NnbmModel& model) {
  std::vector<Finding> out;
  const int n = model.n();
  if (model.b.size() != n || model.w_diag.size() != n ||
      model.w_edge.size() != model.topology.edge_count()) {
    out.push_back({Finding::Severity::Hard, "parameter vector lengths do not match topology"});
    return out;
  }
  for (int i = 0; i < n; ++i) {
    if (!(model.w_diag[i] > 0.0)) {
      out.push_back({Finding::Severity::Hard,
                     "w_diag[" + std::to_string(i + 1) + "] must be > 0"});
    }
    if (!std::isfinite(model.b[i]) || !std::isfinite(model.w_diag[i])) {
      out.push_back({Finding::Severity::Hard,
                     "non-finite parameter at vertex " + std::to_string(i + 1)});
    }
  }
  for (int k = 0; k < model.topology.edge_count(); ++k) {
    if (!std::isfinite(model.w_edge[k])) {
      out.push_back({Finding::Severity::Hard, "non-finite edge coupling"});
    }
  }
  if (has_hard_failure(out)) return out;

  // Co-positivity: only the two sufficient conditions are tested. Entrywise
  // nonnegativity first (cheap), then PSD with a small eigenvalue floor.
  const bool entrywise_nonneg = (model.w_edge.array() >= 0.0).all();
  if (!entrywise_nonneg) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) w(i, i) = model.w_diag[i];
    const auto& edges = model.topology.edges();
    for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
      w(edges[k].first, edges[k].second) = model.w_edge[k];
      w(edges[k].second, edges[k].first) = model.w_edge[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      out.push_back({Finding::Severity::Advisory,
                     "coupling matrix is neither entrywise nonnegative nor PSD; "
                     "co-positivity not established"});
    }
  }
  return out;
}

bool has_hard_failure(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) {
    return f.severity == Finding::Severity::Hard;
  });
}

NnbmModel build_square_grid(int rows, int cols, double b_low, double b_high,
                            double w_diag, double w_edge, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw DomainError("build_square_grid: rows, cols must be >= 1");
  if (b_low > b_high) throw DomainError("build_square_grid: b_low > b_high");
  const int n = rows * cols;
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) edges.push_back({v, v + 1});
      if (r + 1 < rows) edges.push_back({v, v + cols});
    }
  }
  NnbmModel model;
  model.topology = Topology(n, std::move(edges));
  model.b.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) model.b[i] = rng.uniform(b_low, b_high);
  model.w_diag = Eigen::VectorXd::Constant(n, w_diag);
  model.w_edge = Eigen::VectorXd::Constant(model.topology.edge_count(), w_edge);
  return model;
}

NnbmModel build_orientation_tuning(int n, double beta, double eps, bool circular_distance) {
  if (n < 2) throw DomainError("build_orientation_tuning: n must be >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  NnbmModel model;
  model.topology = Topology(n, std::move(edges));
  model.b = Eigen::VectorXd::Constant(n, beta);
  const double w_ii = beta * (1.0 + 1.0 / n - eps / n);  // cos(0) = 1
  if (!(w_ii > 0.0)) throw DomainError("build_orientation_tuning: resulting w_ii <= 0");
  model.w_diag = Eigen::VectorXd::Constant(n, w_ii);
  model.w_edge.resize(model.topology.edge_count());
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double dist = j - i;
      if (circular_distance) dist = std::min(dist, static_cast<double>(n) - dist);
      model.w_edge[k++] =
          beta * (1.0 / n - eps / n * std::cos(2.0 * M_PI * dist / n));
    }
  }
  return model;
}

MomentStats sample_moments(const Dataset& d, const Topology& t) {
  if (d.width() != t.n()) throw DomainError("sample_moments: dataset width mismatch");
  if (d.size() < 1) throw DomainError("sample_moments: empty dataset");
  MomentStats s;
  s.mean1 = d.samples.colwise().mean();
  s.mean2_diag = d.samples.array().square().matrix().colwise().mean();
  s.mean2_edge.resize(t.edge_count());
  const auto& edges = t.edges();
  for (int k = 0; k < t.edge_count(); ++k) {
    s.mean2_edge[k] =
        d.samples.col(edges[k].first).cwiseProduct(d.samples.col(edges[k].second)).mean();
  }
  return s;
}

}  // namespace nnbm
