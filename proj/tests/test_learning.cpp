#include "nnbm/learning.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/oracles.hpp"

using namespace nnbm;
namespace oracle = nnbm::testing;

namespace {

NnbmModel golden_pair() {
  NnbmModel m;
  m.topology = Topology(2, {{0, 1}});
  m.b = Eigen::Vector2d(0.5, 0.5);
  m.w_diag = Eigen::Vector2d(1.0, 1.0);
  m.w_edge = Eigen::VectorXd::Constant(1, 0.3);
  return m;
}

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tol = 1e-12;
  return cfg;
}

MomentStats stats_from_state(const NnbmModel& model, const MomentState& s,
                             const Eigen::MatrixXd& cov) {
  MomentStats st;
  st.mean1 = s.m;
  st.mean2_diag = s.v;
  st.mean2_edge.resize(model.topology.edge_count());
  const auto& edges = model.topology.edges();
  for (int e = 0; e < model.topology.edge_count(); ++e) {
    const auto& [i, j] = edges[e];
    st.mean2_edge[e] = cov(i, j) + s.m[i] * s.m[j];
  }
  return st;
}

}  // namespace

TEST(Gradients, VanishAtSelfConsistentStats) {
  const auto model = golden_pair();
  const auto s = tap_solve(model, LambdaField::zeros(2), tight());
  const auto resp = susp_solve(model, s, LambdaField::zeros(2), tight());
  const auto cov = covariance_matrix(s, resp);
  const auto stats = stats_from_state(model, s, cov);
  const auto g = gradients(stats, model.topology, s.m, s.v, &cov);
  EXPECT_LE(g.sup_norm(), 1e-11);
}

TEST(Gradients, SingleSiteBiasShift) {
  NnbmModel m;
  m.topology = Topology(1, {});
  m.b = Eigen::VectorXd::Constant(1, 0.5);
  m.w_diag = Eigen::VectorXd::Ones(1);
  m.w_edge.resize(0);
  const auto s = tap_solve(m, LambdaField::zeros(1), tight());
  MomentStats st;
  st.mean1 = Eigen::VectorXd::Constant(1, s.m[0] + 0.1);
  st.mean2_diag = s.v;
  st.mean2_edge.resize(0);
  const auto g = gradients(st, m.topology, s.m, s.v, nullptr);
  EXPECT_NEAR(g.b[0], 0.1, 1e-12);
  EXPECT_NEAR(g.w_diag[0], 0.0, 1e-12);
}

TEST(Gradients, SignsMatchLikelihoodSlopeOnGoldenPair) {
  const auto model = golden_pair();
  const auto exact = quadrature_moments(model, OracleConfig{});
  MomentStats stats;
  stats.mean1 = exact.mean1;
  stats.mean2_diag = exact.second.diagonal();
  stats.mean2_edge = Eigen::VectorXd::Constant(1, exact.second(0, 1));

  const auto s = tap_solve(model, LambdaField::zeros(2), tight());
  const auto resp = susp_solve(model, s, LambdaField::zeros(2), tight());
  const auto cov = covariance_matrix(s, resp);
  const auto g = gradients(stats, model.topology, s.m, s.v, &cov);

  // Finite-difference slope of the approximate log-likelihood, re-solving the
  // inference problem at each probe.
  const double h = 1e-5;
  auto ll_at = [&](auto mutate) {
    NnbmModel m2 = model;
    mutate(m2);
    const auto s2 = tap_solve(m2, LambdaField::zeros(2), tight());
    return approx_log_likelihood(m2, stats, s2);
  };
  {
    const double up = ll_at([&](NnbmModel& m2) { m2.b[0] += h; });
    const double dn = ll_at([&](NnbmModel& m2) { m2.b[0] -= h; });
    const double slope = (up - dn) / (2 * h);
    EXPECT_GT(slope * g.b[0], 0.0);
    EXPECT_NEAR(slope, g.b[0], 1e-5);
  }
  {
    const double up = ll_at([&](NnbmModel& m2) { m2.w_diag[0] += h; });
    const double dn = ll_at([&](NnbmModel& m2) { m2.w_diag[0] -= h; });
    const double slope = (up - dn) / (2 * h);
    // d/dw_ii of the likelihood carries the paper's proportionality factor 1/2.
    EXPECT_GT(slope * g.w_diag[0], 0.0);
    EXPECT_NEAR(2.0 * slope, g.w_diag[0], 1e-5);
  }
}

TEST(Gradients, DimensionMismatchRejected) {
  MomentStats st;
  st.mean1 = Eigen::VectorXd::Zero(2);
  st.mean2_diag = Eigen::VectorXd::Zero(2);
  st.mean2_edge = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(gradients(st, Topology(3, {}), Eigen::VectorXd::Zero(3),
                         Eigen::VectorXd::Zero(3), nullptr),
               DomainError);
}

TEST(Learn, RecoversEdgelessModelFromItsOwnSamples) {
  NnbmModel truth;
  truth.topology = Topology(2, {});
  truth.b = Eigen::Vector2d(0.8, -0.4);
  truth.w_diag = Eigen::Vector2d(1.0, 1.5);
  truth.w_edge.resize(0);
  SamplerConfig sc;
  sc.n_samples = 60000;
  sc.seed = 123;
  const auto data = gibbs_sample(truth, sc);

  LearnConfig cfg;
  cfg.method = Method::Tap;
  cfg.step_size = 0.2;
  cfg.max_epochs = 20000;
  cfg.grad_tol = 1e-6;
  const auto lr = learn(data, truth.topology, cfg);
  EXPECT_TRUE(lr.converged);
  // Sampling error at N = 60000 bounds the recovery error.
  const auto e = mae(truth, lr.model);
  EXPECT_LT(e.e_b, 0.05);
  EXPECT_LT(e.e_w, 0.05);
}

TEST(Learn, RejectsDegenerateData) {
  Dataset d;
  d.samples = Eigen::MatrixXd::Constant(50, 2, 1.0);  // zero variance
  LearnConfig cfg;
  EXPECT_THROW(learn(d, Topology(2, {{0, 1}}), cfg), DomainError);
}

TEST(Learn, TraceIsMonotoneAtSmallStep) {
  const auto truth = golden_pair();
  SamplerConfig sc;
  sc.n_samples = 5000;
  sc.seed = 7;
  const auto data = gibbs_sample(truth, sc);
  LearnConfig cfg;
  cfg.method = Method::Susp;
  cfg.step_size = 0.02;
  cfg.max_epochs = 400;
  const auto lr = learn(data, truth.topology, cfg);
  for (size_t k = 1; k < lr.trace.size(); ++k)
    EXPECT_GE(lr.trace[k].approx_ll, lr.trace[k - 1].approx_ll - 1e-6) << "epoch " << k;
}

TEST(Learn, CrossMomentSubstitutionIsFlagged) {
  const auto truth = golden_pair();
  SamplerConfig sc;
  sc.n_samples = 2000;
  sc.seed = 9;
  const auto data = gibbs_sample(truth, sc);
  LearnConfig cfg;
  cfg.max_epochs = 5;
  cfg.method = Method::Tap;
  EXPECT_TRUE(learn(data, truth.topology, cfg).cross_moment_substituted);
  cfg.method = Method::Susp;
  EXPECT_FALSE(learn(data, truth.topology, cfg).cross_moment_substituted);
}

TEST(Mae, IdenticalModelsGiveZero) {
  const auto m = golden_pair();
  const auto r = mae(m, m);
  EXPECT_EQ(r.e_b, 0.0);
  EXPECT_EQ(r.e_w, 0.0);
}

TEST(Mae, UniformBiasShift) {
  const auto a = golden_pair();
  auto b = a;
  b.b.array() += 0.2;
  const auto r = mae(a, b);
  EXPECT_NEAR(r.e_b, 0.2, 1e-15);
  EXPECT_EQ(r.e_w, 0.0);
}

TEST(Mae, MixedWeightError) {
  const auto a = golden_pair();
  auto b = a;
  b.w_diag[0] += 0.3;
  b.w_edge[0] -= 0.3;
  // (0.3 + 0.3) / (n + |E|) = 0.6 / 3
  EXPECT_NEAR(mae(a, b).e_w, 0.2, 1e-15);
}

TEST(Mae, InvariantUnderSimultaneousRelabeling) {
  NnbmModel a;
  a.topology = Topology(3, {{0, 1}, {1, 2}});
  a.b = Eigen::Vector3d(0.1, 0.2, 0.3);
  a.w_diag = Eigen::Vector3d(1.0, 1.1, 1.2);
  a.w_edge.resize(2);
  a.w_edge << 0.4, 0.5;
  auto a2 = a;
  a2.b.array() += 0.05;
  a2.w_edge.array() += 0.1;

  // Relabel 0->1, 1->2, 2->0 in both models.
  auto relabel = [](const NnbmModel& m) {
    NnbmModel p;
    p.topology = Topology(3, {{1, 2}, {2, 0}});
    p.b = Eigen::Vector3d(m.b[2], m.b[0], m.b[1]);
    p.w_diag = Eigen::Vector3d(m.w_diag[2], m.w_diag[0], m.w_diag[1]);
    p.w_edge = m.w_edge;
    return p;
  };
  const auto r1 = mae(a, a2);
  const auto r2 = mae(relabel(a), relabel(a2));
  EXPECT_NEAR(r1.e_b, r2.e_b, 1e-15);
  EXPECT_NEAR(r1.e_w, r2.e_w, 1e-15);
}

TEST(Mae, TopologyMismatchRejected) {
  NnbmModel b;
  b.topology = Topology(2, {});
  b.b = Eigen::Vector2d(0, 0);
  b.w_diag = Eigen::Vector2d(1, 1);
  b.w_edge.resize(0);
  EXPECT_THROW(mae(golden_pair(), b), DomainError);
}

TEST(Experiment, DeterministicTrialReport) {
  ExperimentSpec spec;
  spec.experiment = "square-grid";
  spec.rows = spec.cols = 3;
  spec.N = 400;
  spec.trials = 1;
  spec.methods = {Method::Susp};
  spec.root_seed = 5;
  spec.learner.max_epochs = 50;
  const auto a = run_experiment(spec);
  const auto b = run_experiment(spec);
  ASSERT_EQ(a.outcomes.size(), 1u);
  EXPECT_EQ(a.outcomes[0].errors.e_b, b.outcomes[0].errors.e_b);
  EXPECT_EQ(a.outcomes[0].errors.e_w, b.outcomes[0].errors.e_w);
}

TEST(Experiment, ParallelTrialsMatchSerial) {
  ExperimentSpec spec;
  spec.experiment = "square-grid";
  spec.rows = spec.cols = 3;
  spec.N = 300;
  spec.trials = 4;
  spec.methods = {Method::Tap, Method::Susp};
  spec.root_seed = 6;
  spec.learner.max_epochs = 40;
  auto serial = spec;
  serial.jobs = 1;
  auto parallel = spec;
  parallel.jobs = 4;
  const auto a = run_experiment(serial);
  const auto b = run_experiment(parallel);
  ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
  for (size_t k = 0; k < a.outcomes.size(); ++k) {
    EXPECT_EQ(a.outcomes[k].errors.e_b, b.outcomes[k].errors.e_b);
    EXPECT_EQ(a.outcomes[k].errors.e_w, b.outcomes[k].errors.e_w);
  }
}

TEST(Experiment, GridModelPerTrialRedrawsBiases) {
  ExperimentSpec spec;
  spec.experiment = "square-grid";
  spec.rows = spec.cols = 3;
  const auto m0 = experiment_model(spec, 0);
  const auto m1 = experiment_model(spec, 1);
  EXPECT_FALSE(m0.b == m1.b);
  EXPECT_TRUE(m0.w_edge == m1.w_edge);
}

TEST(Experiment, OrientationModelIsDeterministicAcrossTrials) {
  ExperimentSpec spec;
  spec.experiment = "orientation-tuning";
  spec.n = 8;
  const auto m0 = experiment_model(spec, 0);
  const auto m1 = experiment_model(spec, 1);
  EXPECT_TRUE(m0.b == m1.b);
  EXPECT_TRUE(m0.w_edge == m1.w_edge);
}

TEST(Experiment, ReportFilesAreWritten) {
  ExperimentSpec spec;
  spec.experiment = "square-grid";
  spec.rows = spec.cols = 3;
  spec.N = 300;
  spec.trials = 2;
  spec.methods = {Method::Susp, Method::Isusp};
  spec.root_seed = 8;
  spec.learner.max_epochs = 30;
  const auto rep = run_experiment(spec);
  const auto prefix =
      (std::filesystem::temp_directory_path() / "nnbm_test_report").string();
  write_trial_report(rep, prefix);
  EXPECT_TRUE(std::filesystem::exists(prefix + ".tsv"));
  EXPECT_TRUE(std::filesystem::exists(prefix + "_trials.tsv"));
  EXPECT_TRUE(std::filesystem::exists(prefix + ".json"));
  for (const auto& suffix : {".tsv", "_trials.tsv", ".json"})
    std::filesystem::remove(prefix + suffix);
}

TEST(Experiment, UnknownExperimentRejected) {
  ExperimentSpec spec;
  spec.experiment = "mystery";
  spec.methods = {Method::Tap};
  EXPECT_THROW(run_experiment(spec), DomainError);
}
