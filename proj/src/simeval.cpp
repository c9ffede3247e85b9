#include "gclm/simeval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "gclm/errors.hpp"
#include "gclm/lyapunov.hpp"
#include <json.hpp>

namespace gclm {

namespace {

using nlohmann::json;

struct Draw {
  std::mt19937_64& rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};
  std::normal_distribution<double> gauss{0.0, 1.0};

  double uniform() { return unit(rng); }
  double normal() { return gauss(rng); }
};

}  // namespace

DriftPair generate_model(const GenConfig& config, std::mt19937_64& rng) {
  if (config.p < 1) throw ValidationError("generate_model: p must be positive");
  if (config.edge_prob < 0.0 || config.edge_prob > 1.0)
    throw ValidationError("generate_model: edge probability outside [0, 1]");
  int p = config.p;
  Draw draw{rng};
  Matrix b = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      double keep = draw.uniform();
      double weight = draw.normal();
      if (keep < config.edge_prob) b(i, j) = weight;
    }
  }
  for (int i = 0; i < p; ++i) {
    double slack = draw.normal();
    double row = 0.0;
    for (int j = 0; j < p; ++j)
      if (j != i) row += std::abs(b(i, j));
    b(i, i) = -row - std::abs(slack);
  }
  Matrix c = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) c(i, i) = draw.uniform();
  return {b, c};
}

Matrix sample_gaussian(const Matrix& sigma, int n, std::mt19937_64& rng) {
  if (n < 1) throw ValidationError("sample_gaussian: n must be positive");
  if (sigma.rows() != sigma.cols())
    throw DimensionMismatch("sample_gaussian: covariance must be square");
  int p = static_cast<int>(sigma.rows());
  Matrix l = cholesky(sigma);
  Draw draw{rng};
  Matrix data(n, p);
  Vector z(p);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < p; ++j) z(j) = draw.normal();
    data.row(r) = (l * z).transpose();
  }
  return data;
}

Matrix sample_covariance(const Matrix& data) {
  if (data.rows() < 2)
    throw ValidationError("sample_covariance: need at least two rows");
  int n = static_cast<int>(data.rows());
  Eigen::RowVectorXd mean = data.colwise().mean();
  Matrix centered = data.rowwise() - mean;
  Matrix cov = (centered.transpose() * centered) / double(n - 1);
  return 0.5 * (cov + cov.transpose());
}

Matrix standardize(const Matrix& data) {
  Matrix cov = sample_covariance(data);
  int p = static_cast<int>(cov.rows());
  Vector scale(p);
  for (int j = 0; j < p; ++j) {
    double v = cov(j, j);
    if (!std::isfinite(v) || v <= 0.0)
      throw DegenerateColumn(j, "standardize: column " + std::to_string(j + 1) +
                                    " has no variance");
    scale(j) = 1.0 / std::sqrt(v);
  }
  Matrix corr = scale.asDiagonal() * cov * scale.asDiagonal();
  corr = 0.5 * (corr + corr.transpose());
  for (int j = 0; j < p; ++j) corr(j, j) = 1.0;
  return corr;
}

namespace {

ConfusionPoint confusion(const EdgeSet& support, const EdgeSet& truth, int p) {
  ConfusionPoint pt;
  for (const auto& e : support) {
    if (truth.count(e))
      ++pt.tp;
    else
      ++pt.fp;
  }
  pt.fn = static_cast<int>(truth.size()) - pt.tp;
  int total = p * (p - 1);
  pt.tn = total - pt.tp - pt.fp - pt.fn;
  return pt;
}

double accuracy_of(const ConfusionPoint& pt) {
  int total = pt.tp + pt.fp + pt.tn + pt.fn;
  return total > 0 ? double(pt.tp + pt.tn) / double(total) : 1.0;
}

double f1_of(const ConfusionPoint& pt) {
  int denom = 2 * pt.tp + pt.fp + pt.fn;
  return denom > 0 ? 2.0 * pt.tp / double(denom) : 1.0;
}

double trapezoid(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    double dx = pts[k].first - pts[k - 1].first;
    area += dx * 0.5 * (pts[k].second + pts[k - 1].second);
  }
  return area;
}

}  // namespace

EvalReport evaluate_path(const std::vector<EdgeSet>& supports,
                         const EdgeSet& truth, int p) {
  if (p < 2) throw ValidationError("evaluate_path: need at least two nodes");
  if (supports.empty())
    throw ValidationError("evaluate_path: empty support path");
  auto check = [p](const EdgeSet& edges) {
    for (const auto& [from, to] : edges) {
      if (from < 0 || from >= p || to < 0 || to >= p || from == to)
        throw ValidationError("evaluate_path: edge outside the node range");
    }
  };
  check(truth);

  EvalReport report;
  report.points.reserve(supports.size());
  int pos = static_cast<int>(truth.size());
  int neg = p * (p - 1) - pos;
  std::vector<std::pair<double, double>> roc, pr;
  roc.reserve(supports.size() + 2);
  for (std::size_t k = 0; k < supports.size(); ++k) {
    check(supports[k]);
    ConfusionPoint pt = confusion(supports[k], truth, p);
    report.points.push_back(pt);

    double acc = accuracy_of(pt);
    double f1 = f1_of(pt);
    int size = pt.tp + pt.fp;
    auto better = [&](double best, int best_k, double value) {
      if (value > best) return true;
      if (value < best) return false;
      const ConfusionPoint& prev = report.points[best_k];
      return size < prev.tp + prev.fp;
    };
    if (k == 0 || better(report.maxacc, report.maxacc_index, acc)) {
      report.maxacc = acc;
      report.maxacc_index = static_cast<int>(k);
    }
    if (k == 0 || better(report.maxf1, report.maxf1_index, f1)) {
      report.maxf1 = f1;
      report.maxf1_index = static_cast<int>(k);
    }

    double tpr = pos > 0 ? double(pt.tp) / pos : 1.0;
    double fpr = neg > 0 ? double(pt.fp) / neg : 0.0;
    roc.emplace_back(fpr, tpr);
    double recall = pos > 0 ? double(pt.tp) / pos : 1.0;
    double precision = size > 0 ? double(pt.tp) / size : 1.0;
    pr.emplace_back(recall, precision);
  }
  roc.emplace_back(0.0, 0.0);
  roc.emplace_back(1.0, 1.0);
  pr.emplace_back(0.0, 1.0);  // the empty-support end of the curve
  report.auroc = trapezoid(std::move(roc));
  report.aupr = trapezoid(std::move(pr));
  return report;
}

std::string eval_report_to_json(const EvalReport& report) {
  json points = json::array();
  for (const auto& pt : report.points) {
    points.push_back(
        {{"tp", pt.tp}, {"fp", pt.fp}, {"tn", pt.tn}, {"fn", pt.fn}});
  }
  json doc{{"maxacc", report.maxacc},
           {"maxf1", report.maxf1},
           {"auroc", report.auroc},
           {"aupr", report.aupr},
           {"maxacc_index", report.maxacc_index},
           {"maxf1_index", report.maxf1_index},
           {"points", std::move(points)}};
  return doc.dump(2) + "\n";
}

std::vector<EdgeSet> supports_from_path_json(const std::string& text,
                                             int* p_out) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("path json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("records") ||
      !doc["records"].is_array())
    throw ValidationError("path json: missing records array");
  if (p_out) {
    if (!doc.contains("p") || !doc["p"].is_number_integer())
      throw ValidationError("path json: missing node count");
    *p_out = doc["p"].get<int>();
  }
  std::vector<EdgeSet> supports;
  for (const auto& rec : doc["records"]) {
    if (!rec.is_object() || !rec.contains("support") ||
        !rec["support"].is_array())
      throw ValidationError("path json: record without support");
    EdgeSet edges;
    for (const auto& pair : rec["support"]) {
      if (!pair.is_array() || pair.size() != 2 ||
          !pair[0].is_number_integer() || !pair[1].is_number_integer())
        throw ValidationError("path json: malformed edge");
      edges.emplace(pair[0].get<int>() - 1, pair[1].get<int>() - 1);
    }
    supports.push_back(std::move(edges));
  }
  if (supports.empty()) throw ValidationError("path json: no records");
  return supports;
}

MarginalScenario marginal_scenario(const GenConfig& config, int keep, int n,
                                   std::uint64_t seed) {
  if (keep < 1 || keep > config.p)
    throw ValidationError("marginal_scenario: keep outside 1..p");
  std::mt19937_64 rng(seed);
  MarginalScenario sc;
  sc.model = generate_model(config, rng);
  sc.sigma = solve_lyapunov(sc.model.B, sc.model.C);
  Matrix full = sample_gaussian(sc.sigma, n, rng);
  sc.data = full.leftCols(keep);
  sc.graph = compatibility_graph(sc.model.B, sc.model.C);
  sc.graph_kept = project_graph(sc.graph, keep);
  return sc;
}

namespace {

struct SplitOutcome {
  EdgeSet support;
  bool ok = false;
};

SplitOutcome run_split(const Matrix& data, const StabSelConfig& config,
                       const std::vector<double>& lambdas,
                       std::uint64_t seed) {
  int n = static_cast<int>(data.rows());
  int half = n / 2;
  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  int p = static_cast<int>(data.cols());
  Matrix train(half, p), test(half, p);
  for (int r = 0; r < half; ++r) {
    train.row(r) = data.row(perm[r]);
    test.row(r) = data.row(perm[half + r]);
  }
  const Matrix& fit_rows = config.fit_on_test ? test : train;
  Matrix corr = standardize(fit_rows);
  Matrix test_cov = sample_covariance(test);

  FitPath path = fit_path(corr, lambdas, config.fit);

  LossKind score_loss{LossFamily::gaussian_nll, test_cov};
  // Refit to convergence: the test-likelihood gaps between candidate
  // supports are O(1/n), so a loose stop would add noise of the same order
  // and scramble the argmax.
  FitConfig refit_cfg = config.fit;
  refit_cfg.epsilon = std::min(config.fit.epsilon, 1e-9);
  refit_cfg.max_iter = std::max(config.fit.max_iter, 2000);
  std::map<EdgeSet, int> seen;
  for (std::size_t k = 0; k < path.fits.size(); ++k) {
    seen.emplace(support_of(path.fits[k].B), int(k));
  }
  std::vector<const std::pair<const EdgeSet, int>*> candidates;
  candidates.reserve(seen.size());
  for (const auto& entry : seen) candidates.push_back(&entry);
  std::sort(candidates.begin(), candidates.end(),
            [](const auto* a, const auto* b) {
              if (a->first.size() != b->first.size()) {
                return a->first.size() < b->first.size();
              }
              return a->first < b->first;
            });
  double best_score = 0.0;
  const EdgeSet* best = nullptr;
  for (const auto* cand : candidates) {
    try {
      FitResult refit =
          mle_refit(corr, cand->first, refit_cfg, &path.fits[cand->second].B);
      double score = loss_value(score_loss, refit.sigma);
      if (!std::isfinite(score)) continue;
      if (!best || score < best_score) {
        best_score = score;
        best = &cand->first;
      }
    } catch (const NumericalError&) {
      continue;
    }
  }
  SplitOutcome out;
  if (best) {
    out.support = *best;
    out.ok = true;
  }
  return out;
}

}  // namespace

StabSelResult stability_select(const Matrix& data, const StabSelConfig& config,
                               std::uint64_t seed) {
  if (data.rows() < 4)
    throw ValidationError("stability_select: need at least four rows");
  if (data.cols() < 2)
    throw ValidationError("stability_select: need at least two columns");
  if (config.n_splits < 1)
    throw ValidationError("stability_select: n_splits must be positive");
  if (config.retain < 0.0 || config.retain > 1.0)
    throw ValidationError("stability_select: retain outside [0, 1]");

  std::vector<double> lambdas =
      config.lambdas.empty() ? lambda_grid() : config.lambdas;

  std::mt19937_64 seeder(seed);
  std::vector<std::uint64_t> seeds(config.n_splits);
  for (auto& s : seeds) s = seeder();

  std::vector<SplitOutcome> outcomes(config.n_splits);
  int jobs = std::clamp(config.jobs, 1, config.n_splits);
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int r = next.fetch_add(1);
      if (r >= config.n_splits) return;
      try {
        outcomes[r] = run_split(data, config, lambdas, seeds[r]);
      } catch (const Error&) {
        outcomes[r].ok = false;
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  int p = static_cast<int>(data.cols());
  StabSelResult result;
  result.freq = Matrix::Zero(p, p);
  result.n_splits = config.n_splits;
  int ok = 0;
  for (const auto& out : outcomes) {
    if (!out.ok) continue;
    ++ok;
    for (const auto& [from, to] : out.support) result.freq(from, to) += 1.0;
  }
  result.n_failed = config.n_splits - ok;
  if (ok > 0) result.freq /= double(ok);
  result.retained = MixedGraph{p};
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      // an edge never selected is never retained, even at retain = 0
      if (i != j && result.freq(i, j) > 0.0 &&
          result.freq(i, j) >= config.retain)
        result.retained.add_directed(i, j);
    }
  }
  return result;
}

std::string stab_sel_to_json(const StabSelResult& result) {
  int p = static_cast<int>(result.freq.rows());
  json freq = json::array();
  for (int i = 0; i < p; ++i) {
    json row = json::array();
    for (int j = 0; j < p; ++j) row.push_back(result.freq(i, j));
    freq.push_back(std::move(row));
  }
  json retained = json::array();
  for (const auto& [from, to] : result.retained.directed)
    retained.push_back({from + 1, to + 1});
  json doc{{"p", p},
           {"n_splits", result.n_splits},
           {"n_failed", result.n_failed},
           {"freq", std::move(freq)},
           {"retained", std::move(retained)}};
  return doc.dump(2) + "\n";
}

}  // namespace gclm
