#include "nnbm/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "nnbm/scalar_kernels.hpp"
#include "support/oracles.hpp"

using namespace nnbm;
namespace oracle = nnbm::testing;

namespace {

NnbmModel single_site(double b, double w) {
  NnbmModel m;
  m.topology = Topology(1, {});
  m.b = Eigen::VectorXd::Constant(1, b);
  m.w_diag = Eigen::VectorXd::Constant(1, w);
  m.w_edge.resize(0);
  return m;
}

NnbmModel coupled_pair(double b1, double b2, double w12) {
  NnbmModel m;
  m.topology = Topology(2, {{0, 1}});
  m.b = Eigen::Vector2d(b1, b2);
  m.w_diag = Eigen::Vector2d(1.0, 1.0);
  m.w_edge = Eigen::VectorXd::Constant(1, w12);
  return m;
}

struct SampleStats {
  double mean, second, se_mean, se_second;
};

SampleStats site_sample_stats(double a, double w, int draws, std::uint64_t seed) {
  Rng rng(seed);
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < draws; ++i) {
    const double x = sample_truncated_site(a, w, rng);
    s1 += x;
    const double xx = x * x;
    s2 += xx;
    s3 += xx * x;
    s4 += xx * xx;
  }
  SampleStats st;
  st.mean = s1 / draws;
  st.second = s2 / draws;
  st.se_mean = std::sqrt((st.second - st.mean * st.mean) / draws);
  st.se_second = std::sqrt((s4 / draws - st.second * st.second) / draws);
  return st;
}

}  // namespace

TEST(TruncatedSite, HalfNormalMoments) {
  const auto st = site_sample_stats(0.0, 1.0, 1000000, 21);
  EXPECT_NEAR(st.mean, std::sqrt(2.0 / M_PI), 3.0 * st.se_mean);
  EXPECT_NEAR(st.second, 1.0, 3.0 * st.se_second);
}

TEST(TruncatedSite, ExponentialProposalRegime) {
  const auto st = site_sample_stats(-5.0, 1.0, 1000000, 22);
  EXPECT_NEAR(st.mean, site_mean({-5.0, 1.0}), 3.0 * st.se_mean);
}

TEST(TruncatedSite, AnalyticsAcrossParameterGrid) {
  for (double b : {-3.0, 0.0, 2.0}) {
    for (double w : {0.5, 1.0, 4.0}) {
      const auto st = site_sample_stats(b, w, 1000000, 100 + static_cast<int>(10 * b + w));
      const double m = site_mean({b, w});
      const double v = site_second_moment({b, w}, m);
      EXPECT_NEAR(st.mean, m, 4.0 * st.se_mean) << "b=" << b << " w=" << w;
      EXPECT_NEAR(st.second, v, 4.0 * st.se_second) << "b=" << b << " w=" << w;
    }
  }
}

TEST(TruncatedSite, RejectsNonPositiveCurvature) {
  Rng rng(1);
  EXPECT_THROW(sample_truncated_site(0.0, 0.0, rng), DomainError);
  EXPECT_THROW(sample_truncated_site(0.0, -1.0, rng), DomainError);
}

TEST(Quadrature, HalfNormalAnalytics) {
  OracleConfig cfg;
  const auto mom = quadrature_moments(single_site(0.0, 1.0), cfg);
  EXPECT_NEAR(mom.mean1[0], std::sqrt(2.0 / M_PI), 1e-10);
  EXPECT_NEAR(mom.second(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(mom.log_partition, 0.5 * std::log(M_PI / 2.0), 1e-10);
}

TEST(Quadrature, SingleSiteClosedFormCrossCheck) {
  OracleConfig cfg;
  const auto mom = quadrature_moments(single_site(1.0, 1.0), cfg);
  const double m = site_mean({1.0, 1.0});
  EXPECT_NEAR(mom.mean1[0], m, 1e-10);
  EXPECT_NEAR(mom.second(0, 0), site_second_moment({1.0, 1.0}, m), 1e-10);
  EXPECT_NEAR(mom.log_partition, site_log_partition({1.0, 1.0}), 1e-10);
}

TEST(Quadrature, RefinementIsCertified) {
  // Doubling the base resolution must not move any reported moment by 1e-9.
  const auto model = coupled_pair(0.5, 0.5, 0.3);
  OracleConfig coarse;
  coarse.points_per_dim = 48;
  OracleConfig fine;
  fine.points_per_dim = 96;
  const auto a = quadrature_moments(model, coarse);
  const auto b = quadrature_moments(model, fine);
  EXPECT_LE((a.mean1 - b.mean1).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((a.second - b.second).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(std::fabs(a.log_partition - b.log_partition), 1e-9);
}

TEST(Quadrature, FactorizesOnEdgelessPair) {
  NnbmModel m;
  m.topology = Topology(2, {});
  m.b = Eigen::Vector2d(0.7, -1.2);
  m.w_diag = Eigen::Vector2d(1.0, 2.5);
  m.w_edge.resize(0);
  const auto mom = quadrature_moments(m, OracleConfig{});
  const double m0 = site_mean({0.7, 1.0});
  const double m1 = site_mean({-1.2, 2.5});
  EXPECT_NEAR(mom.mean1[0], m0, 1e-10);
  EXPECT_NEAR(mom.mean1[1], m1, 1e-10);
  EXPECT_NEAR(mom.second(0, 1), m0 * m1, 1e-9);
  EXPECT_NEAR(mom.log_partition,
              site_log_partition({0.7, 1.0}) + site_log_partition({-1.2, 2.5}), 1e-9);
}

TEST(Quadrature, RejectsLargeProblems) {
  NnbmModel m;
  m.topology = Topology(4, {});
  m.b = Eigen::VectorXd::Zero(4);
  m.w_diag = Eigen::VectorXd::Ones(4);
  m.w_edge.resize(0);
  EXPECT_THROW(quadrature_moments(m, OracleConfig{}), UnsupportedSizeError);
}

TEST(Gibbs, SingleSiteHalfNormal) {
  SamplerConfig cfg;
  cfg.n_samples = 200000;
  cfg.seed = 5;
  const auto mc = mc_moments(single_site(0.0, 1.0), cfg);
  EXPECT_NEAR(mc.mean1[0], std::sqrt(2.0 / M_PI), 3.0 * mc.se_mean1[0]);
  EXPECT_NEAR(mc.second(0, 0), 1.0, 3.0 * mc.se_second(0, 0));
}

TEST(Gibbs, EdgelessPairIsIndependent) {
  NnbmModel m;
  m.topology = Topology(2, {});
  m.b = Eigen::Vector2d(0.0, 0.5);
  m.w_diag = Eigen::Vector2d(1.0, 1.0);
  m.w_edge.resize(0);
  SamplerConfig cfg;
  cfg.n_samples = 100000;
  cfg.seed = 6;
  const auto mc = mc_moments(m, cfg);
  const double prod = mc.mean1[0] * mc.mean1[1];
  // SE of the product via first-order propagation.
  const double se = std::sqrt(std::pow(mc.mean1[1] * mc.se_mean1[0], 2) +
                              std::pow(mc.mean1[0] * mc.se_mean1[1], 2)) +
                    mc.se_second(0, 1);
  EXPECT_NEAR(mc.second(0, 1), prod, 3.0 * se);
}

TEST(Gibbs, CoupledPairMatchesQuadrature) {
  const auto model = coupled_pair(0.5, 0.5, 0.3);
  const auto exact = quadrature_moments(model, OracleConfig{});
  SamplerConfig cfg;
  cfg.n_samples = 100000;
  cfg.seed = 7;
  const auto mc = mc_moments(model, cfg);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(mc.mean1[i], exact.mean1[i], 3.0 * mc.se_mean1[i]);
    EXPECT_NEAR(mc.second(i, i), exact.second(i, i), 3.0 * mc.se_second(i, i));
  }
  EXPECT_NEAR(mc.second(0, 1), exact.second(0, 1), 3.0 * mc.se_second(0, 1));
}

TEST(Gibbs, DeterministicGivenSeed) {
  SamplerConfig cfg;
  cfg.n_samples = 500;
  cfg.burn_in = 50;
  cfg.seed = 123;
  const auto model = coupled_pair(0.5, 0.5, 0.3);
  const auto a = gibbs_sample(model, cfg);
  const auto b = gibbs_sample(model, cfg);
  EXPECT_TRUE(a.samples == b.samples);
  cfg.seed = 124;
  const auto c = gibbs_sample(model, cfg);
  EXPECT_FALSE(a.samples == c.samples);
}

TEST(Gibbs, ProvenanceRecorded) {
  SamplerConfig cfg;
  cfg.n_samples = 10;
  cfg.seed = 9;
  const auto d = gibbs_sample(single_site(0.0, 1.0), cfg);
  EXPECT_EQ(d.provenance.source, "gibbs");
  EXPECT_EQ(d.provenance.seed, 9u);
  EXPECT_EQ(d.provenance.rng_algorithm, kRngAlgorithm);
}

// Chains started from very different states must agree once burned in.
TEST(Gibbs, DetailedBalanceSmokeTest) {
  // Distant initializations are emulated with different seeds and a long
  // burn-in; the strongly coupled pair mixes fast.
  const auto model = coupled_pair(1.5, -0.5, 0.6);
  SamplerConfig a;
  a.n_samples = 50000;
  a.seed = 1001;
  SamplerConfig b = a;
  b.seed = 2002;
  const auto ma = mc_moments(model, a);
  const auto mb = mc_moments(model, b);
  for (int i = 0; i < 2; ++i) {
    const double se = std::hypot(ma.se_mean1[i], mb.se_mean1[i]);
    EXPECT_NEAR(ma.mean1[i], mb.mean1[i], 3.5 * se);
  }
}

TEST(McMoments, AgreesWithQuadratureOnTriple) {
  NnbmModel m;
  m.topology = Topology(3, {{0, 1}, {1, 2}});
  m.b = Eigen::Vector3d(0.2, -0.3, 0.5);
  m.w_diag = Eigen::Vector3d(1.0, 1.5, 0.8);
  m.w_edge.resize(2);
  m.w_edge << 0.4, -0.2;
  const auto exact = quadrature_moments(m, OracleConfig{});
  SamplerConfig cfg;
  cfg.n_samples = 80000;
  cfg.seed = 31;
  const auto mc = mc_moments(m, cfg);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(mc.mean1[i], exact.mean1[i], 3.0 * mc.se_mean1[i]) << "i=" << i;
    for (int j = i; j < 3; ++j)
      EXPECT_NEAR(mc.second(i, j), exact.second(i, j), 3.0 * mc.se_second(i, j))
          << i << "," << j;
  }
}
