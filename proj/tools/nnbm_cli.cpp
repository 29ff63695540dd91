#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "nnbm/io.hpp"
#include "nnbm/learning.hpp"
#include "nnbm/response.hpp"
#include "nnbm/sampling.hpp"
#include "nnbm/tap.hpp"
#include "nnbm/version.hpp"

using nlohmann::json;
using namespace nnbm;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Every command records what it ran, with what configuration, and which files
// it produced. Output files reference the manifest through their sidecars or
// through the manifest's own outputs list.
struct ManifestWriter {
  json config = json::object();
  json seeds = json::object();
  json wall_times = json::object();  // measurements, never part of the config hash
  std::vector<std::string> outputs;
  std::vector<std::string> command_line;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string path(const std::string& stem) const { return stem + ".manifest.json"; }

  void write(const std::string& stem) {
    json j;
    j["command_line"] = command_line;
    j["version"] = kVersion;
    j["rng_algorithm"] = kRngAlgorithm;
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a(config.dump()));
    j["seeds"] = seeds;
    j["outputs"] = outputs;
    wall_times["total_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["wall_times"] = wall_times;
    io::save_json(j, path(stem));
  }
};

std::optional<std::uint64_t> env_seed_override() {
  if (const char* s = std::getenv("NNBM_SEED")) return std::strtoull(s, nullptr, 10);
  return std::nullopt;
}

void add_solver_flags(CLI::App* cmd, SolverConfig& cfg) {
  cmd->add_option("--tol", cfg.tol, "fixed-point residual threshold");
  cmd->add_option("--max-iter", cfg.max_iter, "iteration cap");
  cmd->add_option("--damping", cfg.damping, "fraction of new iterate mixed in");
  cmd->add_option("--r-floor", cfg.r_floor, "positivity guard on conjugate r");
  cmd->add_flag("--paper-literal-eq16-17", cfg.paper_literal_eq16_17,
                "use the literally printed modified update equations");
}

json solver_to_json(const SolverConfig& cfg) {
  return {{"tol", cfg.tol},
          {"max_iter", cfg.max_iter},
          {"damping", cfg.damping},
          {"r_floor", cfg.r_floor},
          {"paper_literal_eq16_17", cfg.paper_literal_eq16_17}};
}

void save_moments_tsv(const std::string& path, const MomentState& s) {
  const int n = static_cast<int>(s.m.size());
  Eigen::VectorXd idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i + 1;
  io::save_columns_tsv(path, {"i", "m", "v", "l", "r"}, {idx, s.m, s.v, s.l, s.r});
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec spec;
  spec.experiment = j.at("experiment").get<std::string>();
  spec.rows = j.value("rows", spec.rows);
  spec.cols = j.value("cols", spec.cols);
  spec.n = j.value("n", spec.n);
  spec.N = j.value("N", spec.N);
  spec.trials = j.value("trials", spec.trials);
  spec.root_seed = j.value("root_seed", spec.root_seed);
  spec.jobs = j.value("jobs", spec.jobs);
  if (j.contains("methods"))
    for (const auto& m : j["methods"]) spec.methods.push_back(method_from_name(m));
  if (spec.methods.empty()) spec.methods = {Method::Susp, Method::Isusp};
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    spec.b_low = g.value("b_low", spec.b_low);
    spec.b_high = g.value("b_high", spec.b_high);
    spec.grid_w_diag = g.value("w_diag", spec.grid_w_diag);
    spec.grid_w_edge = g.value("w_edge", spec.grid_w_edge);
  }
  if (j.contains("orientation")) {
    const auto& o = j["orientation"];
    spec.beta = o.value("beta", spec.beta);
    spec.eps = o.value("eps", spec.eps);
    spec.circular_distance = o.value("circular_distance", spec.circular_distance);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    spec.sampler_burn_in = s.value("burn_in", spec.sampler_burn_in);
    spec.sampler_thin = s.value("thin", spec.sampler_thin);
  }
  if (j.contains("learner")) {
    const auto& l = j["learner"];
    spec.learner.step_size = l.value("step_size", spec.learner.step_size);
    spec.learner.max_epochs = l.value("max_epochs", spec.learner.max_epochs);
    spec.learner.grad_tol = l.value("grad_tol", spec.learner.grad_tol);
    spec.learner.w_diag_floor = l.value("w_diag_floor", spec.learner.w_diag_floor);
    if (l.contains("init")) {
      const auto& i = l["init"];
      spec.learner.init.b0 = i.value("b0", spec.learner.init.b0);
      spec.learner.init.w_diag0 = i.value("w_diag0", spec.learner.init.w_diag0);
      spec.learner.init.w_edge0 = i.value("w_edge0", spec.learner.init.w_edge0);
    }
    if (l.contains("solver")) {
      const auto& s = l["solver"];
      spec.learner.solver.tol = s.value("tol", spec.learner.solver.tol);
      spec.learner.solver.max_iter = s.value("max_iter", spec.learner.solver.max_iter);
      spec.learner.solver.damping = s.value("damping", spec.learner.solver.damping);
      spec.learner.solver.r_floor = s.value("r_floor", spec.learner.solver.r_floor);
      spec.learner.solver.paper_literal_eq16_17 =
          s.value("paper_literal_eq16_17", spec.learner.solver.paper_literal_eq16_17);
    }
  }
  return spec;
}

json spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["experiment"] = spec.experiment;
  j["N"] = spec.N;
  j["trials"] = spec.trials;
  j["root_seed"] = spec.root_seed;
  j["jobs"] = spec.jobs;
  json methods = json::array();
  for (Method m : spec.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  if (spec.experiment == "square-grid") {
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["grid"] = {{"b_low", spec.b_low},
                 {"b_high", spec.b_high},
                 {"w_diag", spec.grid_w_diag},
                 {"w_edge", spec.grid_w_edge}};
  } else {
    j["n"] = spec.n;
    j["orientation"] = {{"beta", spec.beta},
                        {"eps", spec.eps},
                        {"circular_distance", spec.circular_distance}};
  }
  j["sampler"] = {{"burn_in", spec.sampler_burn_in}, {"thin", spec.sampler_thin}};
  j["learner"] = {{"step_size", spec.learner.step_size},
                  {"max_epochs", spec.learner.max_epochs},
                  {"grad_tol", spec.learner.grad_tol},
                  {"w_diag_floor", spec.learner.w_diag_floor},
                  {"init",
                   {{"b0", spec.learner.init.b0},
                    {"w_diag0", spec.learner.init.w_diag0},
                    {"w_edge0", spec.learner.init.w_edge0}}},
                  {"solver", solver_to_json(spec.learner.solver)}};
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"Mean-field inference and maximum-likelihood learning for "
               "nonnegative Boltzmann machines"};
  app.require_subcommand(1);
  ManifestWriter manifest;
  for (int i = 0; i < argc; ++i) manifest.command_line.push_back(argv[i]);

  // ---- generate ----------------------------------------------------------
  auto* generate = app.add_subcommand("generate", "write a model file");
  generate->require_subcommand(1);

  struct {
    int rows = 6, cols = 6;
    double b_low = -0.4, b_high = 0.4, w_diag = 1.0, w_edge = 0.8;
    std::uint64_t seed = 1;
    std::string out = "model.json";
  } grid_args;
  auto* gen_grid = generate->add_subcommand("grid", "square grid with random biases");
  gen_grid->add_option("--rows", grid_args.rows)->required();
  gen_grid->add_option("--cols", grid_args.cols)->required();
  gen_grid->add_option("--b-low", grid_args.b_low);
  gen_grid->add_option("--b-high", grid_args.b_high);
  gen_grid->add_option("--w-diag", grid_args.w_diag);
  gen_grid->add_option("--w-edge", grid_args.w_edge);
  gen_grid->add_option("--seed", grid_args.seed);
  gen_grid->add_option("--out", grid_args.out);

  struct {
    int n = 36;
    double beta = 10.0, eps = 2.0;
    bool circular = false;
    std::string out = "model.json";
  } orient_args;
  auto* gen_orient =
      generate->add_subcommand("orientation", "orientation-tuning network");
  gen_orient->add_option("--n", orient_args.n)->required();
  gen_orient->add_option("--beta", orient_args.beta);
  gen_orient->add_option("--eps", orient_args.eps);
  gen_orient->add_flag("--circular-distance", orient_args.circular);
  gen_orient->add_option("--out", orient_args.out);

  // ---- sample -------------------------------------------------------------
  struct {
    std::string model, out = "data.tsv";
    int N = 1000;
    SamplerConfig cfg;
  } sample_args;
  auto* sample = app.add_subcommand("sample", "Gibbs-sample a dataset");
  sample->add_option("--model", sample_args.model)->required();
  sample->add_option("--N", sample_args.N)->required();
  sample->add_option("--seed", sample_args.cfg.seed);
  sample->add_option("--burn-in", sample_args.cfg.burn_in);
  sample->add_option("--thin", sample_args.cfg.thin);
  sample->add_option("--out", sample_args.out);

  // ---- infer ---------------------------------------------------------------
  struct {
    std::string method = "tap", model, out_prefix = "infer";
    SolverConfig solver;
  } infer_args;
  auto* infer = app.add_subcommand("infer", "solve for moments and covariances");
  infer->add_option("--method", infer_args.method)
      ->check(CLI::IsMember({"naive", "tap", "susp", "isusp"}))
      ->required();
  infer->add_option("--model", infer_args.model)->required();
  infer->add_option("--out-prefix", infer_args.out_prefix);
  add_solver_flags(infer, infer_args.solver);

  // ---- oracle ---------------------------------------------------------------
  struct {
    std::string model, out = "oracle.json";
    OracleConfig cfg;
  } oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact moments by quadrature (n <= 3)");
  oracle_cmd->add_option("--model", oracle_args.model)->required();
  oracle_cmd->add_option("--points-per-dim", oracle_args.cfg.points_per_dim);
  oracle_cmd->add_option("--tail-mass-cut", oracle_args.cfg.tail_mass_cut);
  oracle_cmd->add_option("--out", oracle_args.out);

  // ---- learn ----------------------------------------------------------------
  struct {
    std::string data, topo, method = "tap", out = "learned.json", trace;
    LearnConfig cfg;
  } learn_args;
  auto* learn_cmd = app.add_subcommand("learn", "maximum-likelihood parameter fit");
  learn_cmd->add_option("--data", learn_args.data)->required();
  learn_cmd->add_option("--topo", learn_args.topo, "model file supplying the topology")
      ->required();
  learn_cmd->add_option("--method", learn_args.method)
      ->check(CLI::IsMember({"naive", "tap", "susp", "isusp"}))
      ->required();
  learn_cmd->add_option("--step-size", learn_args.cfg.step_size);
  learn_cmd->add_option("--max-epochs", learn_args.cfg.max_epochs);
  learn_cmd->add_option("--grad-tol", learn_args.cfg.grad_tol);
  learn_cmd->add_option("--w-diag-floor", learn_args.cfg.w_diag_floor);
  learn_cmd->add_option("--init-b0", learn_args.cfg.init.b0);
  learn_cmd->add_option("--init-w-diag0", learn_args.cfg.init.w_diag0);
  learn_cmd->add_option("--init-w-edge0", learn_args.cfg.init.w_edge0);
  learn_cmd->add_option("--out", learn_args.out);
  learn_cmd->add_option("--trace", learn_args.trace, "per-epoch trace TSV");
  add_solver_flags(learn_cmd, learn_args.cfg.solver);

  // ---- experiment -------------------------------------------------------------
  struct {
    std::string spec, out_prefix = "experiment";
    int jobs = 0;  // 0: take from spec file
    bool paper_literal = false;
  } exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "run a benchmark experiment");
  exp_cmd->add_option("--spec", exp_args.spec)->required();
  exp_cmd->add_option("--out-prefix", exp_args.out_prefix);
  exp_cmd->add_option("--jobs", exp_args.jobs, "parallel trials");
  exp_cmd->add_flag("--paper-literal-eq16-17", exp_args.paper_literal,
                    "use the literally printed modified update equations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  // ---- dispatch ----------------------------------------------------------------
  if (gen_grid->parsed()) {
    if (auto s = env_seed_override()) grid_args.seed = *s;
    const auto model =
        build_square_grid(grid_args.rows, grid_args.cols, grid_args.b_low,
                          grid_args.b_high, grid_args.w_diag, grid_args.w_edge,
                          grid_args.seed);
    manifest.config = {{"kind", "grid"},          {"rows", grid_args.rows},
                       {"cols", grid_args.cols},  {"b_low", grid_args.b_low},
                       {"b_high", grid_args.b_high}, {"w_diag", grid_args.w_diag},
                       {"w_edge", grid_args.w_edge}};
    manifest.seeds["model"] = grid_args.seed;
    manifest.outputs = {grid_args.out};
    io::save_model(model, grid_args.out,
                   json{{"generator", "grid"},
                        {"seed", grid_args.seed},
                        {"manifest", manifest.path(grid_args.out)}});
    manifest.write(grid_args.out);
    std::cout << "wrote " << grid_args.out << " (n=" << model.n()
              << ", edges=" << model.topology.edge_count() << ")\n";
    return 0;
  }
  if (gen_orient->parsed()) {
    const auto model = build_orientation_tuning(orient_args.n, orient_args.beta,
                                                orient_args.eps, orient_args.circular);
    manifest.config = {{"kind", "orientation"},
                       {"n", orient_args.n},
                       {"beta", orient_args.beta},
                       {"eps", orient_args.eps},
                       {"circular_distance", orient_args.circular}};
    manifest.outputs = {orient_args.out};
    io::save_model(model, orient_args.out,
                   json{{"generator", "orientation"},
                        {"manifest", manifest.path(orient_args.out)}});
    manifest.write(orient_args.out);
    std::cout << "wrote " << orient_args.out << " (n=" << model.n()
              << ", edges=" << model.topology.edge_count() << ")\n";
    return 0;
  }
  if (sample->parsed()) {
    if (auto s = env_seed_override()) sample_args.cfg.seed = *s;
    const auto model = io::load_model(sample_args.model);
    sample_args.cfg.n_samples = sample_args.N;
    const auto data = gibbs_sample(model, sample_args.cfg);
    manifest.config = {{"model", sample_args.model},
                       {"N", sample_args.N},
                       {"burn_in", sample_args.cfg.burn_in},
                       {"thin", sample_args.cfg.thin}};
    manifest.seeds["chain"] = sample_args.cfg.seed;
    manifest.outputs = {sample_args.out, sample_args.out + ".meta.json"};
    io::save_dataset(data, sample_args.out,
                     json{{"manifest", manifest.path(sample_args.out)}});
    manifest.write(sample_args.out);
    std::cout << "wrote " << sample_args.out << " (" << data.size() << " x "
              << data.width() << ")\n";
    return 0;
  }
  if (infer->parsed()) {
    const auto model = io::load_model(infer_args.model);
    const int n = model.n();
    manifest.config = {{"model", infer_args.model},
                       {"method", infer_args.method},
                       {"solver", solver_to_json(infer_args.solver)}};
    const std::string prefix = infer_args.out_prefix;

    MomentState state;
    std::optional<ResponseState> response;
    std::optional<LambdaField> lambda;
    std::vector<double> trace;
    if (infer_args.method == "naive") {
      state = naive_mf_solve(model, infer_args.solver);
    } else if (infer_args.method == "tap") {
      state = tap_solve(model, LambdaField::zeros(n), infer_args.solver);
    } else if (infer_args.method == "susp") {
      state = tap_solve(model, LambdaField::zeros(n), infer_args.solver);
      response = susp_solve(model, state, LambdaField::zeros(n), infer_args.solver);
    } else {
      const auto r = isusp_solve(model, infer_args.solver);
      state = r.state;
      response = r.response;
      lambda = r.lambda;
      trace = r.residual_trace;
    }

    manifest.outputs = {prefix + ".moments.tsv"};
    save_moments_tsv(prefix + ".moments.tsv", state);
    if (response) {
      const auto cov = covariance_matrix(state, *response);
      io::save_matrix_tsv(prefix + ".covariance.tsv", cov);
      manifest.outputs.push_back(prefix + ".covariance.tsv");

      Eigen::VectorXd idx(n), mii(n), var(n), gap(n);
      for (int i = 0; i < n; ++i) {
        idx[i] = i + 1;
        mii[i] = response->M(i, i);
        var[i] = state.v[i] - state.m[i] * state.m[i];
        gap[i] = mii[i] - var[i];
      }
      io::save_columns_tsv(prefix + ".gap.tsv", {"i", "m_ii", "variance", "gap"},
                           {idx, mii, var, gap});
      manifest.outputs.push_back(prefix + ".gap.tsv");
      std::cout << "max |M_ii - (v_i - m_i^2)| = "
                << io::format_table(gap.cwiseAbs().maxCoeff())
                << "\nmax |M_ij - M_ji| = "
                << io::format_table(max_asymmetry(*response)) << "\n";
    }
    if (lambda) {
      Eigen::VectorXd idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i + 1;
      io::save_columns_tsv(prefix + ".lambda.tsv", {"i", "lambda"},
                           {idx, lambda->lam});
      manifest.outputs.push_back(prefix + ".lambda.tsv");
    }
    if (!trace.empty()) {
      Eigen::VectorXd it(trace.size()), res(trace.size());
      for (size_t k = 0; k < trace.size(); ++k) {
        it[k] = static_cast<double>(k + 1);
        res[k] = trace[k];
      }
      io::save_columns_tsv(prefix + ".residuals.tsv", {"iteration", "residual"},
                           {it, res});
      manifest.outputs.push_back(prefix + ".residuals.tsv");
    }
    manifest.write(prefix);
    std::cout << "wrote " << prefix << ".moments.tsv\n";
    return 0;
  }
  if (oracle_cmd->parsed()) {
    const auto model = io::load_model(oracle_args.model);
    const auto mom = quadrature_moments(model, oracle_args.cfg);
    // Error estimate: change under one more doubling of the base resolution.
    OracleConfig finer = oracle_args.cfg;
    finer.points_per_dim *= 2;
    const auto mom2 = quadrature_moments(model, finer);
    const double err = std::max(
        {(mom.mean1 - mom2.mean1).cwiseAbs().maxCoeff(),
         (mom.second - mom2.second).cwiseAbs().maxCoeff(),
         std::fabs(mom.log_partition - mom2.log_partition)});

    json rep;
    rep["n"] = model.n();
    rep["mean"] = std::vector<double>(mom2.mean1.begin(), mom2.mean1.end());
    json second = json::array();
    for (int i = 0; i < model.n(); ++i) {
      json row = json::array();
      for (int j = 0; j < model.n(); ++j) row.push_back(mom2.second(i, j));
      second.push_back(std::move(row));
    }
    rep["second_moment"] = std::move(second);
    rep["log_partition"] = mom2.log_partition;
    rep["refinement_delta"] = err;
    rep["points_per_dim"] = finer.points_per_dim;
    rep["manifest"] = manifest.path(oracle_args.out);
    manifest.config = {{"model", oracle_args.model},
                       {"points_per_dim", oracle_args.cfg.points_per_dim},
                       {"tail_mass_cut", oracle_args.cfg.tail_mass_cut}};
    manifest.outputs = {oracle_args.out};
    io::save_json(rep, oracle_args.out);
    manifest.write(oracle_args.out);
    std::cout << "wrote " << oracle_args.out << " (refinement delta "
              << io::format_table(err) << ")\n";
    return 0;
  }
  if (learn_cmd->parsed()) {
    const auto data = io::load_dataset(learn_args.data);
    const auto topo_model = io::load_model(learn_args.topo);
    learn_args.cfg.method = method_from_name(learn_args.method);
    const auto result = learn(data, topo_model.topology, learn_args.cfg);

    manifest.config = {{"data", learn_args.data},
                       {"topo", learn_args.topo},
                       {"method", learn_args.method},
                       {"step_size", learn_args.cfg.step_size},
                       {"max_epochs", learn_args.cfg.max_epochs},
                       {"grad_tol", learn_args.cfg.grad_tol},
                       {"w_diag_floor", learn_args.cfg.w_diag_floor},
                       {"solver", solver_to_json(learn_args.cfg.solver)}};
    manifest.outputs = {learn_args.out};
    io::save_model(result.model, learn_args.out,
                   json{{"learned_by", learn_args.method},
                        {"epochs", result.epochs},
                        {"converged", result.converged},
                        {"cross_moment_substituted", result.cross_moment_substituted},
                        {"manifest", manifest.path(learn_args.out)}});
    if (!learn_args.trace.empty()) {
      Eigen::VectorXd ep(result.trace.size()), gn(result.trace.size()),
          ll(result.trace.size());
      for (size_t k = 0; k < result.trace.size(); ++k) {
        ep[k] = static_cast<double>(k);
        gn[k] = result.trace[k].grad_norm;
        ll[k] = result.trace[k].approx_ll;
      }
      io::save_columns_tsv(learn_args.trace, {"epoch", "grad_norm", "approx_ll"},
                           {ep, gn, ll});
      manifest.outputs.push_back(learn_args.trace);
    }
    manifest.write(learn_args.out);
    std::cout << "wrote " << learn_args.out << " (epochs " << result.epochs
              << ", converged " << result.converged << ")";
    if (result.cross_moment_substituted)
      std::cout << " [cross moments approximated by m_i m_j: no response pass]";
    std::cout << "\n";
    return 0;
  }
  if (exp_cmd->parsed()) {
    ExperimentSpec spec = spec_from_json(io::load_json(exp_args.spec));
    if (exp_args.jobs > 0) spec.jobs = exp_args.jobs;
    if (exp_args.paper_literal) spec.learner.solver.paper_literal_eq16_17 = true;
    if (auto s = env_seed_override()) spec.root_seed = *s;
    const auto report = run_experiment(spec);
    write_trial_report(report, exp_args.out_prefix);
    manifest.config = spec_to_json(spec);
    manifest.seeds["root"] = spec.root_seed;
    json runtimes = json::array();
    for (const auto& o : report.outcomes)
      runtimes.push_back({{"trial", o.trial},
                          {"method", method_name(o.method)},
                          {"runtime_s", o.runtime_s}});
    manifest.wall_times["trials"] = std::move(runtimes);
    manifest.outputs = {exp_args.out_prefix + ".tsv",
                        exp_args.out_prefix + "_trials.tsv",
                        exp_args.out_prefix + ".json"};
    manifest.write(exp_args.out_prefix);
    for (Method m : spec.methods) {
      const auto& s = report.summary.at(m);
      std::cout << method_name(m) << ": e_b " << io::format_table(s.mean.e_b) << " +- "
                << io::format_table(s.se.e_b) << ", e_w "
                << io::format_table(s.mean.e_w) << " +- "
                << io::format_table(s.se.e_w) << "\n";
    }
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
