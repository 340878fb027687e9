#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dot/matrix.hpp"

namespace dot {

// Symmetric 0/1 adjacency over n nodes, zero diagonal. Stored as an
// unordered edge list with i < j.
struct AdjacencyGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  Matrix dense() const {
    Matrix w(n, n);
    for (auto [i, j] : edges) {
      w(i, j) = 1.0;
      w(j, i) = 1.0;
    }
    return w;
  }

  // degree - adjacency
  Matrix laplacian() const {
    Matrix l(n, n);
    for (auto [i, j] : edges) {
      l(i, j) -= 1.0;
      l(j, i) -= 1.0;
      l(i, i) += 1.0;
      l(j, j) += 1.0;
    }
    return l;
  }
};

// k-nearest-neighbour graph under Euclidean distance, OR-symmetrized: an
// edge exists once either endpoint ranks the other among its k nearest.
// Distance ties break toward the smaller index so graphs are reproducible.
inline AdjacencyGraph knn_graph(const FeatureMatrix& f, int k) {
  const int n = f.rows();
  if (k < 1 || k > n - 1)
    throw ParamError("knn_graph: k=" + std::to_string(k) +
                     " outside [1," + std::to_string(n - 1) + "]");
  const Matrix d = pairwise_sq_dist(f, f);
  std::vector<std::vector<bool>> picked(n, std::vector<bool>(n, false));
  std::vector<std::pair<double, int>> order(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) order[m++] = {d(i, j), j};
    std::sort(order.begin(), order.end());
    for (int r = 0; r < k; ++r) picked[i][order[r].second] = true;
  }
  AdjacencyGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (picked[i][j] || picked[j][i]) g.edges.emplace_back(i, j);
  return g;
}

// Edge iff equal labels.
inline AdjacencyGraph supervised_graph(const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  if (n == 0) throw ParamError("supervised_graph: empty label vector");
  AdjacencyGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (labels[i] == labels[j]) g.edges.emplace_back(i, j);
  return g;
}

// sum over ordered pairs (i,j) of w_ij ||f_i - f_j||^2; each undirected edge
// contributes twice, matching the double sum of the objective.
inline double lpp_loss(const FeatureMatrix& f, const AdjacencyGraph& w) {
  if (f.rows() != w.n)
    throw ShapeError("lpp_loss: " + std::to_string(f.rows()) + " rows vs graph on " +
                     std::to_string(w.n) + " nodes");
  double s = 0.0;
  for (auto [i, j] : w.edges) {
    double d = 0.0;
    for (int c = 0; c < f.cols(); ++c) {
      const double diff = f(i, c) - f(j, c);
      d += diff * diff;
    }
    s += 2.0 * d;
  }
  return s;
}

// mean row entropy of a probability matrix, 0*log0 := 0 via clamped log
inline double entropy_loss(const Matrix& p) {
  for (int i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < p.cols(); ++j) {
      if (p(i, j) < 0.0)
        throw InputError("entropy_loss: negative entry at row " + std::to_string(i));
      sum += p(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError("entropy_loss: row " + std::to_string(i) + " sums to " +
                       std::to_string(sum));
  }
  double h = 0.0;
  for (double v : p.data()) h -= v * std::log(std::max(v, 1e-12));
  return h / p.rows();
}

}  // namespace dot
