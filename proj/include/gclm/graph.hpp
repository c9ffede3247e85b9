#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gclm/lyapunov.hpp"

namespace gclm {

using Edge = std::pair<int, int>;
using EdgeSet = std::set<Edge>;

// Mixed graph on vertices 0..p-1 with directed edges (from, to) and
// bidirected edges stored as canonical pairs (min, max). Self-loops are
// allowed for both kinds.
struct MixedGraph {
  int p = 0;
  EdgeSet directed;
  EdgeSet bidirected;

  void add_directed(int from, int to);
  void add_bidirected(int a, int b);
  bool has_directed(int from, int to) const;
  bool has_bidirected(int a, int b) const;
  void validate() const;

  bool operator==(const MixedGraph&) const = default;
};

// Smallest mixed graph compatible with (B, C): an edge i -> j whenever
// |B(j, i)| > zero_tol and i <-> j whenever |C(i, j)| > zero_tol.
MixedGraph compatibility_graph(const Matrix& b, const Matrix& c,
                               double zero_tol = 0.0);

// A trek from left.back() to right.back(): a directed walk left[0] -> ... ->
// left.back(), a bridging bidirected edge {left[0], right[0]}, and a directed
// walk right[0] -> ... -> right.back(). Walks may repeat vertices; either side
// may have length zero.
struct Trek {
  std::vector<int> left;
  std::vector<int> right;

  int n() const { return static_cast<int>(left.size()) - 1; }
  int m() const { return static_cast<int>(right.size()) - 1; }
  Edge bridge() const { return {left.front(), right.front()}; }
  Trek reversed() const { return Trek{right, left}; }

  bool operator==(const Trek&) const = default;
};

bool is_valid_trek(const MixedGraph& g, const Trek& trek);

// All treks from i to j whose two walks total at most max_len edges, in a
// deterministic order. Walk counts grow exponentially with max_len; intended
// for small graphs and verification work.
std::vector<Trek> enumerate_treks(const MixedGraph& g, int i, int j,
                                  int max_len);

// True when at least one trek (of any length) joins i and j: some bidirected
// edge {a, b} has i reachable from a and j reachable from b (or vice versa).
bool has_trek(const MixedGraph& g, int i, int j);

// Time-scaling coefficient s^(n+m+1) / ((n+m+1) n! m!) of a trek.
double trek_kappa(const Trek& trek, double s);
double trek_kappa(int n, int m, double s);

// Product of C at the bridge and the drift entries along both walks.
double trek_weight(const Matrix& b, const Matrix& c, const Trek& trek);

// Truncated trek expansion of the finite-horizon covariance: the sum of
// kappa * weight over all treks with n + m <= max_len, accumulated through
// matrix powers so long horizons stay tractable.
Matrix sigma_partial_series(const Matrix& b, const Matrix& c, double s,
                            int max_len);

struct MarginalModel {
  Matrix b;       // leading keep x keep drift block
  Matrix c;       // adjusted noise matrix of the kept margin
  Matrix sigma;   // leading block of the full solution
};

// Marginalizes the model over the trailing coordinates: the kept block
// satisfies b * sigma + sigma * b^T + c = 0 exactly. Throws MarginalNotUnique
// when the kept drift block has an eigenvalue pair summing to zero.
MarginalModel marginalize(const Matrix& b, const Matrix& c, int keep);

// Graph marginalization onto the first keep vertices: keeps induced directed
// and bidirected edges and adds i <-> j whenever a trek between them passes
// through a removed vertex as i <- k ~> j or i ~> k -> j.
MixedGraph project_graph(const MixedGraph& g, int keep);

// Relabels vertices so that order[v] becomes vertex v of the result; order
// must list distinct vertices of g and may be a subpermutation prefix
// extended internally with the remaining vertices.
MixedGraph permute_graph(const MixedGraph& g, const std::vector<int>& order);
Matrix permute_matrix(const Matrix& m, const std::vector<int>& order);
std::vector<int> complete_order(int p, const std::vector<int>& keep_list);

// JSON round-trip with 1-based vertex labels:
// {"p": n, "directed": [[from, to], ...], "bidirected": [[a, b], ...]}.
std::string mixed_graph_to_json(const MixedGraph& g);
MixedGraph mixed_graph_from_json(const std::string& text);

}  // namespace gclm
