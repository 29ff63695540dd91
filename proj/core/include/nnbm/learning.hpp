#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nnbm/model.hpp"
#include "nnbm/response.hpp"
#include "nnbm/sampling.hpp"
#include "nnbm/tap.hpp"

namespace nnbm {

enum class Method { Naive, Tap, Susp, Isusp };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct LearnInit {
  double b0 = 0.0;
  double w_diag0 = 1.0;
  double w_edge0 = 0.0;
};

struct LearnConfig {
  Method method = Method::Tap;
  double step_size = 0.02;
  int max_epochs = 2000;
  double grad_tol = 1e-4;  // sup-norm stopping threshold
  double w_diag_floor = 0.05;
  LearnInit init;
  SolverConfig solver;

  void check() const {
    if (!(step_size > 0.0)) throw DomainError("LearnConfig: step_size must be > 0");
    if (max_epochs < 1) throw DomainError("LearnConfig: max_epochs must be >= 1");
    if (!(grad_tol > 0.0)) throw DomainError("LearnConfig: grad_tol must be > 0");
    if (!(w_diag_floor > 0.0)) throw DomainError("LearnConfig: w_diag_floor must be > 0");
    solver.check();
  }
};

struct Gradients {
  Eigen::VectorXd b;
  Eigen::VectorXd w_diag;
  Eigen::VectorXd w_edge;

  double sup_norm() const {
    double g = std::max(b.cwiseAbs().maxCoeff(), w_diag.cwiseAbs().maxCoeff());
    if (w_edge.size() > 0) g = std::max(g, w_edge.cwiseAbs().maxCoeff());
    return g;
  }
};

/// Log-likelihood ascent directions:
///   grad_b_i      = <x_i>_D - m_i
///   grad_w_diag_i = v_i - <x_i²>_D
///   grad_w_edge   = (cov_ij + m_i m_j) - <x_i x_j>_D
/// With cov == nullptr (methods without a response pass) the cross moment is
/// approximated by m_i m_j alone; callers must surface that substitution.
Gradients gradients(const MomentStats& stats, const Topology& topo,
                    const Eigen::VectorXd& m, const Eigen::VectorXd& v,
                    const Eigen::MatrixXd* cov);

struct EpochRecord {
  double grad_norm = 0.0;
  double approx_ll = 0.0;
};

struct LearnResult {
  NnbmModel model;
  std::vector<EpochRecord> trace;
  int epochs = 0;
  bool converged = false;
  // true when w_edge gradients used the m_i m_j substitute (naive/tap methods)
  bool cross_moment_substituted = false;
};

/// Plain gradient ascent on the approximate log-likelihood, one inference
/// subproblem per epoch, warm-started from the previous epoch's state.
LearnResult learn(const Dataset& data, const Topology& topo, const LearnConfig& cfg);

struct MaeReport {
  double e_b = 0.0;
  double e_w = 0.0;
};

/// Mean absolute parameter errors; e_w averages diagonal and edge terms
/// together over n + |E|.
MaeReport mae(const NnbmModel& true_model, const NnbmModel& learned);

struct ExperimentSpec {
  std::string experiment;  // "square-grid" or "orientation-tuning"
  int rows = 6, cols = 6;
  int n = 36;
  double b_low = -0.4, b_high = 0.4;
  double grid_w_diag = 1.0, grid_w_edge = 0.8;
  double beta = 10.0, eps = 2.0;
  bool circular_distance = false;
  int N = 10000;
  int trials = 10;
  std::vector<Method> methods;
  std::uint64_t root_seed = 1;
  LearnConfig learner;
  int sampler_burn_in = 2000;
  int sampler_thin = 5;
  int jobs = 1;
};

struct TrialOutcome {
  int trial = 0;
  Method method = Method::Tap;
  MaeReport errors;
  double runtime_s = 0.0;
  int epochs = 0;
};

struct MethodSummary {
  MaeReport mean;
  MaeReport se;
};

struct TrialReport {
  ExperimentSpec spec;
  std::vector<TrialOutcome> outcomes;
  std::map<Method, MethodSummary> summary;
};

/// Per trial: build the generative model, Gibbs-sample N points, learn with
/// every requested method on the same dataset, score MAEs. Trials may run
/// concurrently (spec.jobs); per-trial seeds come from derive_seed(root, trial).
TrialReport run_experiment(const ExperimentSpec& spec);

/// Generative model of trial `trial` under this spec.
NnbmModel experiment_model(const ExperimentSpec& spec, int trial);

/// <prefix>.tsv (table-shaped means), <prefix>_trials.tsv (per-trial rows),
/// <prefix>.json (full config + summary sidecar).
void write_trial_report(const TrialReport& report, const std::string& prefix);

}  // namespace nnbm
