#pragma once

#include <cstdint>
#include <random>

#include "gclm/baselines.hpp"

namespace gclm {

// Random-model generator: off-diagonal drift entries are standard normal
// draws kept with probability edge_prob, each diagonal entry is pushed below
// the negative absolute row sum (diagonal dominance, hence stability), and
// the noise matrix is diagonal with Uniform[0,1) entries.
struct GenConfig {
  int p = 10;
  double edge_prob = 0.2;  // k / p for expected degree k
};

struct DriftPair {
  Matrix B;
  Matrix C;
};

DriftPair generate_model(const GenConfig& config, std::mt19937_64& rng);

// N x p sample from N(0, sigma) through the lower Cholesky factor; row by
// row, each row drawing its p standard normals in column order.
Matrix sample_gaussian(const Matrix& sigma, int n, std::mt19937_64& rng);

// Sample covariance with the N-1 denominator.
Matrix sample_covariance(const Matrix& data);

// Correlation matrix of the columns with an exact unit diagonal. Throws
// DegenerateColumn for a zero-variance column.
Matrix standardize(const Matrix& data);

struct ConfusionPoint {
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
  double maxacc = 0.0;
  double maxf1 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  int maxacc_index = 0;  // ties resolved toward the sparser support
  int maxf1_index = 0;
  std::vector<ConfusionPoint> points;
};

// Compares a support path against the true directed edges over the p(p-1)
// ordered off-diagonal positions. ROC is closed at (0,0) and (1,1) and the
// precision-recall curve at (0,1); both integrate by trapezoid over the
// path-induced points.
EvalReport evaluate_path(const std::vector<EdgeSet>& supports,
                         const EdgeSet& truth, int p);

std::string eval_report_to_json(const EvalReport& report);

// Supports extracted from a path JSON document (any records carrying a
// "support" field).
std::vector<EdgeSet> supports_from_path_json(const std::string& text, int* p_out = nullptr);

// Draws a larger model, samples it, and keeps only the leading columns of
// the data; the kept-margin graph comes from projecting the full graph.
struct MarginalScenario {
  DriftPair model;       // full generating model
  Matrix sigma;          // its stationary covariance
  Matrix data;           // N x keep observed margin
  MixedGraph graph;      // full compatibility graph
  MixedGraph graph_kept; // projection onto the kept margin
};

MarginalScenario marginal_scenario(const GenConfig& config, int keep, int n,
                                   std::uint64_t seed);

struct StabSelConfig {
  int n_splits = 200;
  double retain = 0.85;
  bool fit_on_test = false;  // fit the path on the train half by default
  int jobs = 1;
  FitConfig fit;
  std::vector<double> lambdas;  // defaults to lambda_grid()
};

struct StabSelResult {
  Matrix freq;          // freq(i, j) = selection frequency of edge i -> j
  MixedGraph retained;  // edges at or above the retain threshold
  int n_splits = 0;
  int n_failed = 0;
};

// Stability selection over random equal-size splits: fit a penalty path on
// the correlation matrix of one half, refit every distinct support without
// penalty, keep the support maximizing Gaussian likelihood against the other
// half's covariance, and count how often each edge survives. Per-split seeds
// derive from the master seed up front, so results do not depend on jobs.
StabSelResult stability_select(const Matrix& data, const StabSelConfig& config,
                               std::uint64_t seed);

std::string stab_sel_to_json(const StabSelResult& result);

}  // namespace gclm
