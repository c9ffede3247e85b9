#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gclm/baselines.hpp"
#include "gclm/simeval.hpp"

namespace {

using namespace gclm;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

std::string matrix_csv(const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

double parse_kappa(const std::string& text) {
  std::string t = text;
  for (auto& ch : t)
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (t == "inf" || t == "infinity" || t == "+inf")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    if (v < 0.0) throw ValidationError("--kappa must be nonnegative");
    return v;
  } catch (const std::invalid_argument&) {
    throw ValidationError("--kappa expects a number or 'inf', got " + text);
  } catch (const std::out_of_range&) {
    throw ValidationError("--kappa out of range: " + text);
  }
}

std::vector<int> parse_keep_list(const std::string& text) {
  std::vector<int> keep;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      keep.push_back(v - 1);
    } catch (const std::exception&) {
      throw ValidationError("--keep-list expects comma-separated integers");
    }
  }
  if (keep.empty()) throw ValidationError("--keep-list is empty");
  return keep;
}

int default_jobs() {
  const char* env = std::getenv("GCLM_JOBS");
  if (!env) return 1;
  int v = std::atoi(env);
  return v >= 1 ? v : 1;
}

// Flags shared by the estimator subcommands.
struct FitOptions {
  std::string preset = "mloglik-inf";
  std::string loss;   // mloglik | frob; empty keeps the preset's loss
  std::string kappa;  // number or "inf"; empty keeps the preset's value
  double tol = 1e-4;
  std::string tol_mode = "abs";
  int max_iter = 100;
  double alpha = 0.5;
  double stab_margin = 1e-8;
};

void add_fit_options(CLI::App* cmd, FitOptions& opt) {
  cmd->add_option("--preset", opt.preset,
                  "Configuration preset: mloglik-inf, mloglik-0.01, frob-inf")
      ->capture_default_str();
  cmd->add_option("--loss", opt.loss, "Loss override: mloglik or frob");
  cmd->add_option("--kappa", opt.kappa,
                  "Noise-anchor weight override (number or 'inf')");
  cmd->add_option("--tol", opt.tol, "Objective-decrease stopping threshold")
      ->capture_default_str();
  cmd->add_option("--tol-mode", opt.tol_mode,
                  "Stopping test scaling: abs or rel")
      ->check(CLI::IsMember({"abs", "rel"}))
      ->capture_default_str();
  cmd->add_option("--max-iter", opt.max_iter, "Maximum accepted iterations")
      ->capture_default_str();
  cmd->add_option("--alpha", opt.alpha, "Line-search shrink factor")
      ->capture_default_str();
  cmd->add_option("--stab-margin", opt.stab_margin,
                  "Required stability margin of iterates")
      ->capture_default_str();
}

FitConfig make_fit_config(const FitOptions& opt) {
  FitConfig cfg;
  apply_preset(opt.preset, cfg);
  if (!opt.loss.empty()) {
    if (opt.loss == "mloglik")
      cfg.loss = LossFamily::gaussian_nll;
    else if (opt.loss == "frob")
      cfg.loss = LossFamily::frobenius;
    else
      throw ValidationError("--loss expects mloglik or frob, got " + opt.loss);
  }
  if (!opt.kappa.empty()) cfg.reg_kappa = parse_kappa(opt.kappa);
  cfg.epsilon = opt.tol;
  cfg.tol_relative = opt.tol_mode == "rel";
  cfg.max_iter = opt.max_iter;
  cfg.alpha = opt.alpha;
  cfg.stab_margin = opt.stab_margin;
  return cfg;
}

struct TargetOptions {
  std::string data;
  std::string cov;
};

void add_target_options(CLI::App* cmd, TargetOptions& opt) {
  auto* data = cmd->add_option(
      "--data", opt.data, "Sample CSV (N x p); fits its correlation matrix");
  auto* cov = cmd->add_option("--cov", opt.cov,
                              "Covariance/correlation CSV used as-is");
  data->excludes(cov);
}

Matrix load_target(const TargetOptions& opt) {
  if (opt.data.empty() == opt.cov.empty())
    throw ValidationError("give exactly one of --data or --cov");
  if (!opt.data.empty()) return standardize(read_matrix_csv(opt.data));
  Matrix s = read_matrix_csv(opt.cov);
  if (s.rows() != s.cols())
    throw DimensionMismatch("--cov matrix must be square");
  return 0.5 * (s + s.transpose());
}

struct GridOptions {
  double lambda_max = 6.0;
  int n_lambda = 100;
  double min_ratio = 1e-4;
};

void add_grid_options(CLI::App* cmd, GridOptions& opt) {
  cmd->add_option("--lambda-max", opt.lambda_max, "Largest penalty value")
      ->capture_default_str();
  cmd->add_option("--n-lambda", opt.n_lambda, "Number of penalty values")
      ->capture_default_str();
  cmd->add_option("--lambda-min-ratio", opt.min_ratio,
                  "Smallest penalty as a fraction of the largest")
      ->capture_default_str();
}

Matrix default_b0(const Matrix& target) {
  Matrix eye = Matrix::Identity(target.rows(), target.cols());
  return -0.5 * cholesky_solve(cholesky(target), eye);
}

EdgeSet directed_support(const MixedGraph& g) {
  EdgeSet support;
  for (const auto& [from, to] : g.directed)
    if (from != to) support.emplace(from, to);
  return support;
}

struct SolveOptions {
  std::string b, c, out;
  bool transpose = false;
};

void setup_solve(CLI::App& app) {
  auto opt = std::make_shared<SolveOptions>();
  auto* cmd = app.add_subcommand(
      "solve", "Solve B*Sigma + Sigma*B^T + C = 0 for Sigma");
  cmd->add_option("--b", opt->b, "Drift matrix CSV")->required();
  cmd->add_option("--c", opt->c, "Noise matrix CSV")->required();
  cmd->add_flag("--transpose", opt->transpose,
                "Solve B^T*Sigma + Sigma*B + C = 0 instead");
  cmd->add_option("--out", opt->out, "Output CSV (default stdout)");
  cmd->callback([opt]() {
    Matrix b = read_matrix_csv(opt->b);
    Matrix c = read_matrix_csv(opt->c);
    Matrix sigma = opt->transpose ? solve_lyapunov(schur_decompose(b), c, true)
                                  : solve_lyapunov(b, c);
    write_output(opt->out, matrix_csv(sigma));
  });
}

struct ProjectOptions {
  std::string graph, b, c, out, out_prefix, keep_list;
  int keep = 0;
  double zero_tol = 0.0;
};

void setup_project(CLI::App& app) {
  auto opt = std::make_shared<ProjectOptions>();
  auto* cmd = app.add_subcommand(
      "project",
      "Marginalize a model or graph onto a kept subset of vertices");
  auto* graph = cmd->add_option("--graph", opt->graph, "Mixed graph JSON");
  auto* b = cmd->add_option("--b", opt->b, "Drift matrix CSV");
  cmd->add_option("--c", opt->c, "Noise matrix CSV")->needs(b);
  graph->excludes(b);
  cmd->add_option("--keep", opt->keep, "Keep the first K vertices");
  cmd->add_option("--keep-list", opt->keep_list,
                  "Comma-separated 1-based vertices to keep, in order");
  cmd->add_option("--zero-tol", opt->zero_tol,
                  "Magnitude treated as a structural zero")
      ->capture_default_str();
  cmd->add_option("--out", opt->out, "Graph JSON output (default stdout)");
  cmd->add_option("--out-prefix", opt->out_prefix,
                  "Prefix for Btilde/Ctilde/Sigmatilde CSV outputs");
  cmd->callback([opt]() {
    std::vector<int> order;
    int keep = opt->keep;
    if (!opt->keep_list.empty()) {
      order = parse_keep_list(opt->keep_list);
      keep = static_cast<int>(order.size());
    }
    if (!opt->graph.empty()) {
      MixedGraph g = mixed_graph_from_json(read_file(opt->graph));
      if (!order.empty()) g = permute_graph(g, order);
      if (keep < 1 || keep > g.p) throw ValidationError("--keep outside 1..p");
      write_output(opt->out, mixed_graph_to_json(project_graph(g, keep)));
      return;
    }
    if (opt->b.empty() || opt->c.empty())
      throw ValidationError("project needs --graph or both --b and --c");
    Matrix bm = read_matrix_csv(opt->b);
    Matrix cm = read_matrix_csv(opt->c);
    if (!order.empty()) {
      bm = permute_matrix(bm, order);
      cm = permute_matrix(cm, order);
    }
    if (keep < 1 || keep > bm.rows())
      throw ValidationError("--keep outside 1..p");
    MarginalModel mm = marginalize(bm, cm, keep);
    MixedGraph g = compatibility_graph(bm, cm, opt->zero_tol);
    write_output(opt->out_prefix + "Btilde.csv", matrix_csv(mm.b));
    write_output(opt->out_prefix + "Ctilde.csv", matrix_csv(mm.c));
    write_output(opt->out_prefix + "Sigmatilde.csv", matrix_csv(mm.sigma));
    std::string gjson = mixed_graph_to_json(project_graph(g, keep));
    if (!opt->out.empty())
      write_output(opt->out, gjson);
    else
      write_output(opt->out_prefix + "graph.json", gjson);
  });
}

struct FitCmdOptions {
  TargetOptions target;
  FitOptions fit;
  double lambda = 0.0;
  std::string b0, out;
};

void setup_fit(CLI::App& app) {
  auto opt = std::make_shared<FitCmdOptions>();
  auto* cmd = app.add_subcommand(
      "fit", "Penalized fit of (B, C) at a single penalty value");
  add_target_options(cmd, opt->target);
  add_fit_options(cmd, opt->fit);
  cmd->add_option("--lambda", opt->lambda, "Off-diagonal l1 penalty")
      ->capture_default_str();
  cmd->add_option("--b0", opt->b0, "Starting drift matrix CSV");
  cmd->add_option("--out", opt->out, "Fit JSON output (default stdout)");
  cmd->callback([opt]() {
    Matrix target = load_target(opt->target);
    FitConfig cfg = make_fit_config(opt->fit);
    cfg.lambda = opt->lambda;
    Matrix b0 =
        opt->b0.empty() ? default_b0(target) : read_matrix_csv(opt->b0);
    FitResult fit = prox_grad_fit(target, cfg, b0);
    write_output(opt->out, fit_result_to_json(fit, cfg.lambda));
  });
}

struct PathCmdOptions {
  TargetOptions target;
  FitOptions fit;
  GridOptions grid;
  std::string out;
};

void setup_path(CLI::App& app) {
  auto opt = std::make_shared<PathCmdOptions>();
  auto* cmd =
      app.add_subcommand("path", "Penalized fits along the whole penalty grid");
  add_target_options(cmd, opt->target);
  add_fit_options(cmd, opt->fit);
  add_grid_options(cmd, opt->grid);
  cmd->add_option("--out", opt->out, "Path JSON output (default stdout)");
  cmd->callback([opt]() {
    Matrix target = load_target(opt->target);
    FitConfig cfg = make_fit_config(opt->fit);
    auto lambdas = lambda_grid(opt->grid.lambda_max, opt->grid.n_lambda,
                               opt->grid.min_ratio);
    FitPath path = fit_path(target, lambdas, cfg);
    write_output(opt->out, fit_path_to_json(path));
  });
}

struct LassoCmdOptions {
  TargetOptions target;
  GridOptions grid;
  std::string c, out;
  double tol = 1e-8;
  int max_sweeps = 10000;
  bool penalize_diagonal = false;
};

void setup_lasso_path(CLI::App& app) {
  auto opt = std::make_shared<LassoCmdOptions>();
  opt->grid.lambda_max = 0.0;  // 0 means: compute from the data
  auto* cmd = app.add_subcommand(
      "lasso-path", "Direct residual-lasso fits along a penalty grid");
  add_target_options(cmd, opt->target);
  add_grid_options(cmd, opt->grid);
  cmd->add_option("--c", opt->c, "Noise matrix CSV (default identity)");
  cmd->add_option("--tol", opt->tol, "Coordinate-change tolerance")
      ->capture_default_str();
  cmd->add_option("--max-sweeps", opt->max_sweeps, "Sweep limit per fit")
      ->capture_default_str();
  cmd->add_flag("--penalize-diagonal", opt->penalize_diagonal,
                "Penalize diagonal entries too");
  cmd->add_option("--out", opt->out, "Path JSON output (default stdout)");
  cmd->callback([opt]() {
    Matrix target = load_target(opt->target);
    Matrix c = opt->c.empty()
                   ? Matrix(Matrix::Identity(target.rows(), target.cols()))
                   : read_matrix_csv(opt->c);
    LassoConfig cfg{opt->tol, opt->max_sweeps, opt->penalize_diagonal};
    double lmax = opt->grid.lambda_max > 0.0 ? opt->grid.lambda_max
                                             : lasso_lambda_max(target, c, cfg);
    auto lambdas = lambda_grid(lmax, opt->grid.n_lambda, opt->grid.min_ratio);
    FitPath path = direct_lasso_path(target, lambdas, c, cfg);
    write_output(opt->out, fit_path_to_json(path));
  });
}

struct CovthrOptions {
  TargetOptions target;
  std::string out;
};

void setup_covthr(CLI::App& app) {
  auto opt = std::make_shared<CovthrOptions>();
  auto* cmd = app.add_subcommand(
      "covthr", "Support path from thresholded covariance magnitudes");
  add_target_options(cmd, opt->target);
  cmd->add_option("--out", opt->out, "Path JSON output (default stdout)");
  cmd->callback([opt]() {
    Matrix target = load_target(opt->target);
    write_output(opt->out, support_path_to_json(cov_threshold_path(target)));
  });
}

struct SimulateOptions {
  int p = 10;
  double k = 2.0;
  int n = 1000;
  std::uint64_t seed = 0;
  int keep = 0;
  std::string prefix;
  std::string b, c;
};

void setup_simulate(CLI::App& app) {
  auto opt = std::make_shared<SimulateOptions>();
  auto* cmd = app.add_subcommand(
      "simulate", "Draw a random stable model and sample data from it");
  cmd->add_option("--p", opt->p, "Number of nodes")->capture_default_str();
  cmd->add_option("--k", opt->k, "Expected edges per node")
      ->capture_default_str();
  cmd->add_option("--n", opt->n, "Sample size")->capture_default_str();
  cmd->add_option("--seed", opt->seed, "Generator seed")->capture_default_str();
  cmd->add_option("--keep", opt->keep,
                  "Observe only the first K coordinates (0 keeps all)");
  cmd->add_option("--out-prefix", opt->prefix, "Prefix for output files");
  auto* fixed_b =
      cmd->add_option("--b", opt->b, "Sample from this drift matrix CSV");
  cmd->add_option("--c", opt->c, "Noise matrix CSV for --b")->needs(fixed_b);
  cmd->callback([opt]() {
    if (!opt->b.empty()) {
      Matrix b = read_matrix_csv(opt->b);
      Matrix c = opt->c.empty()
                     ? Matrix(Matrix::Identity(b.rows(), b.cols()))
                     : read_matrix_csv(opt->c);
      Matrix sigma = solve_lyapunov(b, c);
      std::mt19937_64 rng(opt->seed);
      Matrix data = sample_gaussian(sigma, opt->n, rng);
      int keep = opt->keep > 0 ? opt->keep : static_cast<int>(b.rows());
      if (keep > b.rows()) throw ValidationError("--keep outside 1..p");
      const std::string& prefix = opt->prefix;
      write_output(prefix + "Sigma.csv", matrix_csv(sigma));
      write_output(prefix + "data.csv", matrix_csv(data.leftCols(keep)));
      write_output(prefix + "graph.json",
                   mixed_graph_to_json(compatibility_graph(b, c)));
      return;
    }
    if (opt->p < 1) throw ValidationError("--p must be positive");
    if (opt->k < 0.0) throw ValidationError("--k must be nonnegative");
    GenConfig gen{opt->p, std::min(1.0, opt->k / opt->p)};
    const std::string& prefix = opt->prefix;
    if (opt->keep > 0) {
      MarginalScenario sc = marginal_scenario(gen, opt->keep, opt->n, opt->seed);
      write_output(prefix + "B.csv", matrix_csv(sc.model.B));
      write_output(prefix + "C.csv", matrix_csv(sc.model.C));
      write_output(prefix + "Sigma.csv", matrix_csv(sc.sigma));
      write_output(prefix + "data.csv", matrix_csv(sc.data));
      write_output(prefix + "graph.json", mixed_graph_to_json(sc.graph));
      write_output(prefix + "graph_kept.json",
                   mixed_graph_to_json(sc.graph_kept));
      return;
    }
    std::mt19937_64 rng(opt->seed);
    DriftPair model = generate_model(gen, rng);
    Matrix sigma = solve_lyapunov(model.B, model.C);
    Matrix data = sample_gaussian(sigma, opt->n, rng);
    write_output(prefix + "B.csv", matrix_csv(model.B));
    write_output(prefix + "C.csv", matrix_csv(model.C));
    write_output(prefix + "Sigma.csv", matrix_csv(sigma));
    write_output(prefix + "data.csv", matrix_csv(data));
    write_output(prefix + "graph.json",
                 mixed_graph_to_json(compatibility_graph(model.B, model.C)));
  });
}

struct EvaluateOptions {
  std::string path, truth, out;
};

void setup_evaluate(CLI::App& app) {
  auto opt = std::make_shared<EvaluateOptions>();
  auto* cmd =
      app.add_subcommand("evaluate", "Score a support path against a true graph");
  cmd->add_option("--path", opt->path, "Path JSON with per-record supports")
      ->required();
  cmd->add_option("--truth", opt->truth, "True mixed graph JSON")->required();
  cmd->add_option("--out", opt->out, "Report JSON output (default stdout)");
  cmd->callback([opt]() {
    int p = 0;
    auto supports = supports_from_path_json(read_file(opt->path), &p);
    MixedGraph g = mixed_graph_from_json(read_file(opt->truth));
    if (g.p != p)
      throw DimensionMismatch("path and truth disagree on the node count");
    EvalReport report = evaluate_path(supports, directed_support(g), p);
    write_output(opt->out, eval_report_to_json(report));
  });
}

struct StabselOptions {
  std::string data, out;
  std::string fit_on = "train";
  FitOptions fit;
  GridOptions grid;
  int splits = 200;
  double retain = 0.85;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void setup_stabsel(CLI::App& app) {
  auto opt = std::make_shared<StabselOptions>();
  opt->jobs = default_jobs();
  auto* cmd = app.add_subcommand(
      "stabsel", "Stability selection over random data splits");
  cmd->add_option("--data", opt->data, "Sample CSV (N x p)")->required();
  add_fit_options(cmd, opt->fit);
  add_grid_options(cmd, opt->grid);
  cmd->add_option("--splits", opt->splits, "Number of random splits")
      ->capture_default_str();
  cmd->add_option("--retain", opt->retain,
                  "Selection-frequency threshold for retained edges")
      ->capture_default_str();
  cmd->add_option("--seed", opt->seed, "Split-generator seed")
      ->capture_default_str();
  cmd->add_option("--jobs", opt->jobs, "Worker threads (default from GCLM_JOBS)")
      ->capture_default_str();
  cmd->add_option("--fit-on", opt->fit_on,
                  "Half used for the penalty path: train or test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  cmd->add_option("--out", opt->out, "Report JSON output (default stdout)");
  cmd->callback([opt]() {
    if (opt->jobs < 1) throw ValidationError("--jobs must be positive");
    Matrix data = read_matrix_csv(opt->data);
    StabSelConfig cfg;
    cfg.n_splits = opt->splits;
    cfg.retain = opt->retain;
    cfg.fit_on_test = opt->fit_on == "test";
    cfg.jobs = opt->jobs;
    cfg.fit = make_fit_config(opt->fit);
    cfg.lambdas = lambda_grid(opt->grid.lambda_max, opt->grid.n_lambda,
                              opt->grid.min_ratio);
    StabSelResult result = stability_select(data, cfg, opt->seed);
    write_output(opt->out, stab_sel_to_json(result));
  });
}

struct MleOptions {
  TargetOptions target;
  FitOptions fit;
  std::string graph, b0, out;
};

void setup_mle(CLI::App& app) {
  auto opt = std::make_shared<MleOptions>();
  auto* cmd = app.add_subcommand(
      "mle", "Unpenalized refit restricted to a given edge support");
  add_target_options(cmd, opt->target);
  add_fit_options(cmd, opt->fit);
  cmd->add_option("--graph", opt->graph,
                  "Graph JSON whose directed edges form the support")
      ->required();
  cmd->add_option("--b0", opt->b0, "Starting drift matrix CSV");
  cmd->add_option("--out", opt->out, "Fit JSON output (default stdout)");
  cmd->callback([opt]() {
    Matrix target = load_target(opt->target);
    MixedGraph g = mixed_graph_from_json(read_file(opt->graph));
    if (g.p != target.rows())
      throw DimensionMismatch("graph and target disagree on the node count");
    FitConfig cfg = make_fit_config(opt->fit);
    Matrix b0;
    const Matrix* b0_ptr = nullptr;
    if (!opt->b0.empty()) {
      b0 = read_matrix_csv(opt->b0);
      b0_ptr = &b0;
    }
    FitResult fit = mle_refit(target, directed_support(g), cfg, b0_ptr);
    write_output(opt->out, fit_result_to_json(fit, 0.0));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Graphical continuous Lyapunov models: solving, marginalization, and "
      "sparse drift estimation"};
  app.require_subcommand(1);
  setup_solve(app);
  setup_project(app);
  setup_fit(app);
  setup_path(app);
  setup_lasso_path(app);
  setup_covthr(app);
  setup_simulate(app);
  setup_evaluate(app);
  setup_stabsel(app);
  setup_mle(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
