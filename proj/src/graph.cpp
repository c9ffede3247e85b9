#include "gclm/graph.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>

namespace gclm {

namespace {

void check_vertex(int v, int p, const char* what) {
  if (v < 0 || v >= p) {
    throw ValidationError(std::string(what) + " vertex " + std::to_string(v) +
                          " out of range for p = " + std::to_string(p));
  }
}

std::vector<std::vector<int>> predecessor_lists(const MixedGraph& g) {
  std::vector<std::vector<int>> pred(static_cast<size_t>(g.p));
  for (const auto& [from, to] : g.directed)
    pred[static_cast<size_t>(to)].push_back(from);
  return pred;
}

std::vector<std::vector<int>> successor_lists(const MixedGraph& g) {
  std::vector<std::vector<int>> succ(static_cast<size_t>(g.p));
  for (const auto& [from, to] : g.directed)
    succ[static_cast<size_t>(from)].push_back(to);
  return succ;
}

// reach[v] = vertices reachable from v along directed edges (v included).
std::vector<std::vector<char>> reachability(const MixedGraph& g) {
  const auto succ = successor_lists(g);
  std::vector<std::vector<char>> reach(
      static_cast<size_t>(g.p), std::vector<char>(static_cast<size_t>(g.p), 0));
  for (int v = 0; v < g.p; ++v) {
    auto& row = reach[static_cast<size_t>(v)];
    std::deque<int> queue{v};
    row[static_cast<size_t>(v)] = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int w : succ[static_cast<size_t>(u)]) {
        if (!row[static_cast<size_t>(w)]) {
          row[static_cast<size_t>(w)] = 1;
          queue.push_back(w);
        }
      }
    }
  }
  return reach;
}

}  // namespace

void MixedGraph::add_directed(int from, int to) {
  check_vertex(from, p, "directed");
  check_vertex(to, p, "directed");
  directed.emplace(from, to);
}

void MixedGraph::add_bidirected(int a, int b) {
  check_vertex(a, p, "bidirected");
  check_vertex(b, p, "bidirected");
  bidirected.emplace(std::min(a, b), std::max(a, b));
}

bool MixedGraph::has_directed(int from, int to) const {
  return directed.count({from, to}) > 0;
}

bool MixedGraph::has_bidirected(int a, int b) const {
  return bidirected.count({std::min(a, b), std::max(a, b)}) > 0;
}

void MixedGraph::validate() const {
  if (p <= 0) throw ValidationError("graph must have p >= 1 vertices");
  for (const auto& [from, to] : directed) {
    check_vertex(from, p, "directed");
    check_vertex(to, p, "directed");
  }
  for (const auto& [a, b] : bidirected) {
    check_vertex(a, p, "bidirected");
    check_vertex(b, p, "bidirected");
    if (a > b) throw ValidationError("bidirected edges must be stored canonically");
  }
}

MixedGraph compatibility_graph(const Matrix& b, const Matrix& c,
                               double zero_tol) {
  if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows()) {
    throw DimensionMismatch("B and C must be square with matching shapes");
  }
  MixedGraph g;
  g.p = static_cast<int>(b.rows());
  for (int i = 0; i < g.p; ++i) {
    for (int j = 0; j < g.p; ++j) {
      if (std::abs(b(j, i)) > zero_tol) g.add_directed(i, j);
    }
    for (int j = i; j < g.p; ++j) {
      if (std::abs(c(i, j)) > zero_tol) g.add_bidirected(i, j);
    }
  }
  return g;
}

bool is_valid_trek(const MixedGraph& g, const Trek& trek) {
  if (trek.left.empty() || trek.right.empty()) return false;
  for (int v : trek.left)
    if (v < 0 || v >= g.p) return false;
  for (int v : trek.right)
    if (v < 0 || v >= g.p) return false;
  if (!g.has_bidirected(trek.left.front(), trek.right.front())) return false;
  for (size_t k = 0; k + 1 < trek.left.size(); ++k)
    if (!g.has_directed(trek.left[k], trek.left[k + 1])) return false;
  for (size_t k = 0; k + 1 < trek.right.size(); ++k)
    if (!g.has_directed(trek.right[k], trek.right[k + 1])) return false;
  return true;
}

std::vector<Trek> enumerate_treks(const MixedGraph& g, int i, int j,
                                  int max_len) {
  g.validate();
  check_vertex(i, g.p, "trek source");
  check_vertex(j, g.p, "trek target");
  if (max_len < 0) throw ValidationError("max_len must be >= 0");
  const auto pred = predecessor_lists(g);

  // walks_to[n] = all directed walks with n edges ending at the target vertex,
  // each stored from its start vertex to the target.
  auto walks_to = [&](int target) {
    std::vector<std::vector<std::vector<int>>> walks(
        static_cast<size_t>(max_len) + 1);
    walks[0].push_back({target});
    for (int n = 1; n <= max_len; ++n) {
      for (const auto& w : walks[static_cast<size_t>(n) - 1]) {
        for (int u : pred[static_cast<size_t>(w.front())]) {
          std::vector<int> ext;
          ext.reserve(w.size() + 1);
          ext.push_back(u);
          ext.insert(ext.end(), w.begin(), w.end());
          walks[static_cast<size_t>(n)].push_back(std::move(ext));
        }
      }
    }
    return walks;
  };

  const auto left_walks = walks_to(i);
  const auto right_walks = walks_to(j);
  std::vector<Trek> treks;
  for (int n = 0; n <= max_len; ++n) {
    for (int m = 0; n + m <= max_len; ++m) {
      for (const auto& lw : left_walks[static_cast<size_t>(n)]) {
        for (const auto& rw : right_walks[static_cast<size_t>(m)]) {
          if (g.has_bidirected(lw.front(), rw.front())) {
            treks.push_back(Trek{lw, rw});
          }
        }
      }
    }
  }
  return treks;
}

bool has_trek(const MixedGraph& g, int i, int j) {
  check_vertex(i, g.p, "trek source");
  check_vertex(j, g.p, "trek target");
  const auto reach = reachability(g);
  for (const auto& [a, b] : g.bidirected) {
    const auto& ra = reach[static_cast<size_t>(a)];
    const auto& rb = reach[static_cast<size_t>(b)];
    if ((ra[static_cast<size_t>(i)] && rb[static_cast<size_t>(j)]) ||
        (rb[static_cast<size_t>(i)] && ra[static_cast<size_t>(j)])) {
      return true;
    }
  }
  return false;
}

double trek_kappa(int n, int m, double s) {
  if (n < 0 || m < 0) throw ValidationError("trek sides must have length >= 0");
  if (s < 0.0) throw ValidationError("time horizon s must be >= 0");
  if (s == 0.0) return 0.0;
  const int q = n + m;
  double coef = std::pow(s, q + 1) / (q + 1);
  if (std::isfinite(coef) && q <= 150) {
    double nf = 1.0, mf = 1.0;
    for (int k = 2; k <= n; ++k) nf *= k;
    for (int k = 2; k <= m; ++k) mf *= k;
    return coef / (nf * mf);
  }
  return std::exp((q + 1) * std::log(s) - std::log(static_cast<double>(q + 1)) -
                  std::lgamma(n + 1.0) - std::lgamma(m + 1.0));
}

double trek_kappa(const Trek& trek, double s) {
  return trek_kappa(trek.n(), trek.m(), s);
}

double trek_weight(const Matrix& b, const Matrix& c, const Trek& trek) {
  if (trek.left.empty() || trek.right.empty()) {
    throw ValidationError("trek walks must contain at least their endpoint");
  }
  double w = c(trek.left.front(), trek.right.front());
  for (size_t k = 0; k + 1 < trek.left.size(); ++k)
    w *= b(trek.left[k + 1], trek.left[k]);
  for (size_t k = 0; k + 1 < trek.right.size(); ++k)
    w *= b(trek.right[k + 1], trek.right[k]);
  return w;
}

Matrix sigma_partial_series(const Matrix& b, const Matrix& c, double s,
                            int max_len) {
  if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows()) {
    throw DimensionMismatch("B and C must be square with matching shapes");
  }
  if (max_len < 0) throw ValidationError("max_len must be >= 0");
  if (s < 0.0) throw ValidationError("time horizon s must be >= 0");
  const int p = static_cast<int>(b.rows());
  Matrix acc = Matrix::Zero(p, p);
  if (s == 0.0) return acc;
  // sum over n + m <= max_len of kappa(n, m, s) * B^n C (B^T)^m
  Matrix bn_c = c;  // B^n C
  for (int n = 0; n <= max_len; ++n) {
    Matrix term = bn_c;  // B^n C (B^T)^m
    for (int m = 0; n + m <= max_len; ++m) {
      acc += trek_kappa(n, m, s) * term;
      if (n + m < max_len) term = (term * b.transpose()).eval();
    }
    if (n < max_len) bn_c = (b * bn_c).eval();
  }
  return acc;
}

MarginalModel marginalize(const Matrix& b, const Matrix& c, int keep) {
  if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows()) {
    throw DimensionMismatch("B and C must be square with matching shapes");
  }
  const int p_full = static_cast<int>(b.rows());
  if (keep < 1 || keep > p_full) {
    throw ValidationError("keep must satisfy 1 <= keep <= " +
                          std::to_string(p_full));
  }
  const Matrix sigma = solve_lyapunov(b, c);
  MarginalModel out;
  out.b = b.topLeftCorner(keep, keep);
  out.sigma = sigma.topLeftCorner(keep, keep);
  const int rest = p_full - keep;
  if (rest == 0) {
    out.c = c;
  } else {
    const Matrix b12 = b.topRightCorner(keep, rest);
    const Matrix s21 = sigma.bottomLeftCorner(rest, keep);
    Matrix ct = b12 * s21 + s21.transpose() * b12.transpose() +
                c.topLeftCorner(keep, keep);
    out.c = 0.5 * (ct + ct.transpose());
  }
  const SchurForm sf = schur_decompose(out.b);
  if (detail::min_pair_sum(sf) < detail::singularity_threshold(sf)) {
    throw MarginalNotUnique(
        "the kept drift block has an eigenvalue pair summing to zero; the "
        "marginal model is not uniquely defined");
  }
  return out;
}

MixedGraph project_graph(const MixedGraph& g, int keep) {
  g.validate();
  if (keep < 1 || keep > g.p) {
    throw ValidationError("keep must satisfy 1 <= keep <= " + std::to_string(g.p));
  }
  MixedGraph out;
  out.p = keep;
  for (const auto& [from, to] : g.directed)
    if (from < keep && to < keep) out.add_directed(from, to);
  for (const auto& [a, b] : g.bidirected)
    if (a < keep && b < keep) out.add_bidirected(a, b);
  if (keep == g.p) return out;

  const auto reach = reachability(g);
  auto trek_between = [&](int u, int v) {
    for (const auto& [a, b] : g.bidirected) {
      const auto& ra = reach[static_cast<size_t>(a)];
      const auto& rb = reach[static_cast<size_t>(b)];
      if ((ra[static_cast<size_t>(u)] && rb[static_cast<size_t>(v)]) ||
          (rb[static_cast<size_t>(u)] && ra[static_cast<size_t>(v)])) {
        return true;
      }
    }
    return false;
  };
  for (int i = 0; i < keep; ++i) {
    for (int j = i; j < keep; ++j) {
      if (out.has_bidirected(i, j)) continue;
      bool add = false;
      for (int k = keep; k < g.p && !add; ++k) {
        // i <- k ~> j or i ~> k -> j through a removed vertex k
        if (g.has_directed(k, i) && trek_between(k, j)) add = true;
        if (g.has_directed(k, j) && trek_between(i, k)) add = true;
      }
      if (add) out.add_bidirected(i, j);
    }
  }
  return out;
}

std::vector<int> complete_order(int p, const std::vector<int>& keep_list) {
  std::vector<char> seen(static_cast<size_t>(p), 0);
  std::vector<int> order;
  order.reserve(static_cast<size_t>(p));
  for (int v : keep_list) {
    if (v < 0 || v >= p) {
      throw ValidationError("keep list vertex " + std::to_string(v) +
                            " out of range for p = " + std::to_string(p));
    }
    if (seen[static_cast<size_t>(v)]) {
      throw ValidationError("keep list repeats vertex " + std::to_string(v));
    }
    seen[static_cast<size_t>(v)] = 1;
    order.push_back(v);
  }
  for (int v = 0; v < p; ++v)
    if (!seen[static_cast<size_t>(v)]) order.push_back(v);
  return order;
}

MixedGraph permute_graph(const MixedGraph& g, const std::vector<int>& order) {
  const auto full = order.size() == static_cast<size_t>(g.p)
                        ? order
                        : complete_order(g.p, order);
  if (full.size() != static_cast<size_t>(g.p)) {
    throw ValidationError("vertex order must cover the graph");
  }
  std::vector<int> inv(static_cast<size_t>(g.p), -1);
  for (int v = 0; v < g.p; ++v) inv[static_cast<size_t>(full[static_cast<size_t>(v)])] = v;
  MixedGraph out;
  out.p = g.p;
  for (const auto& [from, to] : g.directed)
    out.add_directed(inv[static_cast<size_t>(from)], inv[static_cast<size_t>(to)]);
  for (const auto& [a, b] : g.bidirected)
    out.add_bidirected(inv[static_cast<size_t>(a)], inv[static_cast<size_t>(b)]);
  return out;
}

Matrix permute_matrix(const Matrix& m, const std::vector<int>& order) {
  if (m.rows() != m.cols()) throw DimensionMismatch("matrix must be square");
  const int p = static_cast<int>(m.rows());
  const auto full =
      order.size() == static_cast<size_t>(p) ? order : complete_order(p, order);
  Matrix out(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      out(i, j) = m(full[static_cast<size_t>(i)], full[static_cast<size_t>(j)]);
  return out;
}

std::string mixed_graph_to_json(const MixedGraph& g) {
  nlohmann::json j;
  j["p"] = g.p;
  j["directed"] = nlohmann::json::array();
  for (const auto& [from, to] : g.directed)
    j["directed"].push_back({from + 1, to + 1});
  j["bidirected"] = nlohmann::json::array();
  for (const auto& [a, b] : g.bidirected)
    j["bidirected"].push_back({a + 1, b + 1});
  return j.dump(2);
}

MixedGraph mixed_graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid graph JSON: ") + e.what());
  }
  MixedGraph g;
  try {
    g.p = j.at("p").get<int>();
    if (g.p <= 0) throw ValidationError("graph JSON requires p >= 1");
    for (const auto& e : j.value("directed", nlohmann::json::array())) {
      if (!e.is_array() || e.size() != 2) {
        throw ValidationError("directed edges must be [from, to] pairs");
      }
      g.add_directed(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
    for (const auto& e : j.value("bidirected", nlohmann::json::array())) {
      if (!e.is_array() || e.size() != 2) {
        throw ValidationError("bidirected edges must be [a, b] pairs");
      }
      g.add_bidirected(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid graph JSON: ") + e.what());
  }
  return g;
}

}  // namespace gclm
