#include "nnbm/learning.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <thread>

#include "nnbm/io.hpp"

namespace nnbm {

using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::Naive: return "naive";
    case Method::Tap: return "tap";
    case Method::Susp: return "susp";
    case Method::Isusp: return "isusp";
  }
  throw DomainError("unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "naive") return Method::Naive;
  if (name == "tap") return Method::Tap;
  if (name == "susp") return Method::Susp;
  if (name == "isusp") return Method::Isusp;
  throw DomainError("unknown method '" + name + "'");
}

Gradients gradients(const MomentStats& stats, const Topology& topo,
                    const Eigen::VectorXd& m, const Eigen::VectorXd& v,
                    const Eigen::MatrixXd* cov) {
  const int n = topo.n();
  if (stats.mean1.size() != n || m.size() != n || v.size() != n ||
      stats.mean2_edge.size() != topo.edge_count())
    throw DomainError("gradients: dimension mismatch");
  if (cov && (cov->rows() != n || cov->cols() != n))
    throw DomainError("gradients: covariance dimension mismatch");
  Gradients g;
  g.b = stats.mean1 - m;
  g.w_diag = v - stats.mean2_diag;
  g.w_edge.resize(topo.edge_count());
  const auto& edges = topo.edges();
  for (int e = 0; e < topo.edge_count(); ++e) {
    const auto& [i, j] = edges[e];
    const double cross = m[i] * m[j] + (cov ? (*cov)(i, j) : 0.0);
    g.w_edge[e] = cross - stats.mean2_edge[e];
  }
  return g;
}

namespace {

// One inference pass; returns moments and, for response methods, a covariance.
struct InferenceScratch {
  std::optional<MomentState> state;
  std::optional<LambdaField> lambda;
  std::optional<ResponseState> response;
};

struct InferenceOut {
  MomentState state;
  std::optional<Eigen::MatrixXd> cov;
};

InferenceOut run_inference(const NnbmModel& model, const LearnConfig& cfg,
                           InferenceScratch& scratch) {
  InferenceOut out;
  switch (cfg.method) {
    case Method::Naive:
      out.state = naive_mf_solve(model, cfg.solver, scratch.state);
      break;
    case Method::Tap:
      out.state = tap_solve(model, LambdaField::zeros(model.n()), cfg.solver, scratch.state);
      break;
    case Method::Susp: {
      out.state = tap_solve(model, LambdaField::zeros(model.n()), cfg.solver, scratch.state);
      ResponseState resp = susp_solve(model, out.state, LambdaField::zeros(model.n()),
                                      cfg.solver, scratch.response);
      out.cov = covariance_matrix(out.state, resp);
      scratch.response = std::move(resp);
      break;
    }
    case Method::Isusp: {
      IsuspResult r =
          isusp_solve(model, cfg.solver, scratch.state, scratch.lambda, scratch.response);
      out.state = r.state;
      out.cov = covariance_matrix(r.state, r.response);
      scratch.lambda = std::move(r.lambda);
      scratch.response = std::move(r.response);
      break;
    }
  }
  scratch.state = out.state;
  return out;
}

}  // namespace

LearnResult learn(const Dataset& data, const Topology& topo, const LearnConfig& cfg) {
  cfg.check();
  if (data.width() != topo.n()) throw DomainError("learn: dataset width mismatch");
  const int n = topo.n();

  MomentStats stats = sample_moments(data, topo);
  const double scale = std::max(1.0, stats.mean2_diag.maxCoeff());
  for (int i = 0; i < n; ++i) {
    if (stats.mean2_diag[i] - stats.mean1[i] * stats.mean1[i] < 1e-12 * scale)
      throw DomainError("learn: degenerate data (zero variance at column " +
                        std::to_string(i + 1) + ")");
  }

  LearnResult res;
  res.cross_moment_substituted =
      (cfg.method == Method::Naive || cfg.method == Method::Tap);
  res.model.topology = topo;
  res.model.b = Eigen::VectorXd::Constant(n, cfg.init.b0);
  res.model.w_diag = Eigen::VectorXd::Constant(n, cfg.init.w_diag0);
  res.model.w_edge = Eigen::VectorXd::Constant(topo.edge_count(), cfg.init.w_edge0);

  InferenceScratch scratch;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    InferenceOut inf;
    try {
      inf = run_inference(res.model, cfg, scratch);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("learn: inference failed at epoch " + std::to_string(epoch) +
                                 ": " + e.what(),
                             e.last_residual());
    } catch (const StabilityError& e) {
      throw StabilityError("learn: inference failed at epoch " + std::to_string(epoch) +
                           ": " + e.what());
    }

    const Gradients g = gradients(stats, topo, inf.state.m, inf.state.v,
                                  inf.cov ? &*inf.cov : nullptr);

    res.trace.push_back(
        {g.sup_norm(), approx_log_likelihood(res.model, stats, inf.state)});
    res.epochs = epoch + 1;
    if (g.sup_norm() <= cfg.grad_tol) {
      res.converged = true;
      return res;
    }

    res.model.b += cfg.step_size * g.b;
    res.model.w_diag += cfg.step_size * g.w_diag;
    res.model.w_edge += cfg.step_size * g.w_edge;
    res.model.w_diag = res.model.w_diag.cwiseMax(cfg.w_diag_floor);

    if (!res.model.b.allFinite() || !res.model.w_diag.allFinite() ||
        !res.model.w_edge.allFinite())
      throw ConvergenceError("learn: parameters diverged (non-finite) at epoch " +
                                 std::to_string(epoch),
                             std::numeric_limits<double>::infinity());
  }
  return res;
}

MaeReport mae(const NnbmModel& true_model, const NnbmModel& learned) {
  if (!(true_model.topology == learned.topology))
    throw DomainError("mae: topology mismatch");
  const int n = true_model.n();
  const int ne = true_model.topology.edge_count();
  MaeReport r;
  r.e_b = (true_model.b - learned.b).cwiseAbs().sum() / n;
  r.e_w = ((true_model.w_diag - learned.w_diag).cwiseAbs().sum() +
           (true_model.w_edge - learned.w_edge).cwiseAbs().sum()) /
          (n + ne);
  return r;
}

NnbmModel experiment_model(const ExperimentSpec& spec, int trial) {
  const std::uint64_t trial_seed = derive_seed(spec.root_seed, trial);
  if (spec.experiment == "square-grid") {
    return build_square_grid(spec.rows, spec.cols, spec.b_low, spec.b_high,
                             spec.grid_w_diag, spec.grid_w_edge,
                             derive_seed(trial_seed, 0));
  }
  if (spec.experiment == "orientation-tuning") {
    return build_orientation_tuning(spec.n, spec.beta, spec.eps, spec.circular_distance);
  }
  throw DomainError("experiment_model: unknown experiment '" + spec.experiment + "'");
}

TrialReport run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw DomainError("run_experiment: trials must be >= 1");
  if (spec.methods.empty()) throw DomainError("run_experiment: no methods requested");
  spec.learner.check();

  TrialReport report;
  report.spec = spec;
  report.outcomes.resize(spec.trials * spec.methods.size());

  auto run_trial = [&](int trial) {
    const std::uint64_t trial_seed = derive_seed(spec.root_seed, trial);
    const NnbmModel truth = experiment_model(spec, trial);
    SamplerConfig sampler;
    sampler.burn_in = spec.sampler_burn_in;
    sampler.thin = spec.sampler_thin;
    sampler.n_samples = spec.N;
    sampler.seed = derive_seed(trial_seed, 1);
    const Dataset data = gibbs_sample(truth, sampler);

    for (size_t mi = 0; mi < spec.methods.size(); ++mi) {
      LearnConfig cfg = spec.learner;
      cfg.method = spec.methods[mi];
      const auto t0 = std::chrono::steady_clock::now();
      LearnResult lr = learn(data, truth.topology, cfg);
      const auto t1 = std::chrono::steady_clock::now();
      TrialOutcome& out = report.outcomes[trial * spec.methods.size() + mi];
      out.trial = trial;
      out.method = spec.methods[mi];
      out.errors = mae(truth, lr.model);
      out.runtime_s = std::chrono::duration<double>(t1 - t0).count();
      out.epochs = lr.epochs;
    }
  };

  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    for (int t = 0; t < spec.trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int t = next.fetch_add(1); t < spec.trials; t = next.fetch_add(1))
            run_trial(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (Method m : spec.methods) {
    std::vector<double> ebs, ews;
    for (const auto& o : report.outcomes) {
      if (o.method == m) {
        ebs.push_back(o.errors.e_b);
        ews.push_back(o.errors.e_w);
      }
    }
    auto mean_se = [](const std::vector<double>& xs) {
      const double mu =
          std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mu) * (x - mu);
      const double se =
          xs.size() > 1 ? std::sqrt(var / (xs.size() - 1) / xs.size()) : 0.0;
      return std::pair<double, double>{mu, se};
    };
    const auto [eb_mu, eb_se] = mean_se(ebs);
    const auto [ew_mu, ew_se] = mean_se(ews);
    report.summary[m] = {{eb_mu, ew_mu}, {eb_se, ew_se}};
  }
  return report;
}

void write_trial_report(const TrialReport& report, const std::string& prefix) {
  // Table-shaped summary: one row per metric, one column per method.
  {
    std::string path = prefix + ".tsv";
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path);
    out << "metric";
    for (Method m : report.spec.methods) out << '\t' << method_name(m);
    out << '\n';
    out << "e_b";
    for (Method m : report.spec.methods)
      out << '\t' << io::format_table(report.summary.at(m).mean.e_b);
    out << '\n';
    out << "e_w";
    for (Method m : report.spec.methods)
      out << '\t' << io::format_table(report.summary.at(m).mean.e_w);
    out << '\n';
  }
  {
    // Wall times stay out of this file (they go to the run manifest), so a
    // repeated run is byte-identical.
    std::string path = prefix + "_trials.tsv";
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path);
    out << "trial\tmethod\te_b\te_w\tepochs\n";
    for (const auto& o : report.outcomes) {
      out << o.trial << '\t' << method_name(o.method) << '\t'
          << io::format_table(o.errors.e_b) << '\t' << io::format_table(o.errors.e_w)
          << '\t' << o.epochs << '\n';
    }
  }
  json side;
  side["experiment"] = report.spec.experiment;
  side["N"] = report.spec.N;
  side["trials"] = report.spec.trials;
  side["root_seed"] = report.spec.root_seed;
  side["sampler"] = {{"burn_in", report.spec.sampler_burn_in},
                     {"thin", report.spec.sampler_thin}};
  side["learner"] = {{"step_size", report.spec.learner.step_size},
                     {"max_epochs", report.spec.learner.max_epochs},
                     {"grad_tol", report.spec.learner.grad_tol},
                     {"w_diag_floor", report.spec.learner.w_diag_floor},
                     {"solver_tol", report.spec.learner.solver.tol},
                     {"solver_damping", report.spec.learner.solver.damping}};
  if (report.spec.experiment == "square-grid") {
    side["grid"] = {{"rows", report.spec.rows},
                    {"cols", report.spec.cols},
                    {"b_low", report.spec.b_low},
                    {"b_high", report.spec.b_high},
                    {"w_diag", report.spec.grid_w_diag},
                    {"w_edge", report.spec.grid_w_edge}};
  } else {
    side["orientation"] = {{"n", report.spec.n},
                           {"beta", report.spec.beta},
                           {"eps", report.spec.eps},
                           {"circular_distance", report.spec.circular_distance}};
  }
  json methods = json::object();
  for (Method m : report.spec.methods) {
    const auto& s = report.summary.at(m);
    methods[method_name(m)] = {{"e_b_mean", s.mean.e_b},
                               {"e_b_se", s.se.e_b},
                               {"e_w_mean", s.mean.e_w},
                               {"e_w_se", s.se.e_w}};
  }
  side["summary"] = std::move(methods);
  io::save_json(side, prefix + ".json");
}

}  // namespace nnbm
