#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dot/attention.hpp"
#include "dot/matrix.hpp"

namespace dot {

// Nonnegative coupling with prescribed marginals. mu/nu are kept with the
// matrix so feasibility can be rechecked after the fact.
struct TransportPlan {
  Matrix matrix;
  std::vector<double> mu, nu;

  // l1 violation of both marginal constraints
  double marginal_violation() const {
    std::vector<double> r = row_sums(matrix), c = col_sums(matrix);
    double v = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) v += std::abs(r[i] - mu[i]);
    for (size_t j = 0; j < nu.size(); ++j) v += std::abs(c[j] - nu[j]);
    return v;
  }
};

inline std::vector<double> uniform_marginal(int n) {
  return std::vector<double>(n, 1.0 / n);
}

inline void check_cost_matrix(const Matrix& m) {
  for (double v : m.data())
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InputError("cost matrix entries must be finite and >= 0");
}

inline void check_marginals(const std::vector<double>& mu,
                            const std::vector<double>& nu, const Matrix& m) {
  if (static_cast<int>(mu.size()) != m.rows() ||
      static_cast<int>(nu.size()) != m.cols())
    throw ShapeError("marginals sized " + std::to_string(mu.size()) + "/" +
                     std::to_string(nu.size()) + " vs cost " + m.shape_str());
  double su = 0.0, sv = 0.0;
  for (double v : mu) {
    if (v <= 0.0) throw ParamError("source marginal entries must be > 0");
    su += v;
  }
  for (double v : nu) {
    if (v <= 0.0) throw ParamError("target marginal entries must be > 0");
    sv += v;
  }
  if (std::abs(su - 1.0) > 1e-9 || std::abs(sv - 1.0) > 1e-9)
    throw ParamError("marginals must sum to 1 (got " + std::to_string(su) +
                     ", " + std::to_string(sv) + ")");
}

// ---------------------------------------------------------------------------
// entropy-regularized OT, log-domain Sinkhorn

struct SinkhornResult {
  TransportPlan plan;
  int iterations = 0;
  bool converged = false;
  double marginal_violation = 0.0;
};

namespace detail {
// log sum_j exp(x_j) with running max
inline double log_sum_exp(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}
}  // namespace detail

// Solves min <gamma, M> + lambda * sum gamma log gamma over the transport
// polytope by alternating dual updates in the log domain. Returns the last
// iterate flagged non-converged when max_iter runs out.
inline SinkhornResult sinkhorn(const Matrix& cost, const std::vector<double>& mu,
                               const std::vector<double>& nu, double lambda,
                               double tol = 1e-7, int max_iter = 10000) {
  check_cost_matrix(cost);
  check_marginals(mu, nu, cost);
  if (lambda <= 0.0 || !std::isfinite(lambda))
    throw ParamError("sinkhorn: lambda must be > 0, got " + std::to_string(lambda));
  if (tol <= 0.0) throw ParamError("sinkhorn: tol must be > 0");

  const int ns = cost.rows(), nt = cost.cols();
  std::vector<double> f(ns, 0.0), g(nt, 0.0);
  std::vector<double> log_mu(ns), log_nu(nt);
  for (int i = 0; i < ns; ++i) log_mu[i] = std::log(mu[i]);
  for (int j = 0; j < nt; ++j) log_nu[j] = std::log(nu[j]);

  std::vector<double> buf(std::max(ns, nt));
  auto sweep = [&](double lam) {
    for (int i = 0; i < ns; ++i) {
      buf.resize(nt);
      for (int j = 0; j < nt; ++j) buf[j] = (g[j] - cost(i, j)) / lam;
      f[i] = lam * (log_mu[i] - detail::log_sum_exp(buf));
    }
    for (int j = 0; j < nt; ++j) {
      buf.resize(ns);
      for (int i = 0; i < ns; ++i) buf[i] = (f[i] - cost(i, j)) / lam;
      g[j] = lam * (log_nu[j] - detail::log_sum_exp(buf));
    }
    for (double v : f)
      if (!std::isfinite(v))
        throw NumericError("sinkhorn: potentials left the representable range; "
                           "increase lambda");
    for (double v : g)
      if (!std::isfinite(v))
        throw NumericError("sinkhorn: potentials left the representable range; "
                           "increase lambda");
  };

  // columns are exact right after a g update; only rows can drift
  auto row_violation = [&](double lam) {
    double v = 0.0;
    for (int i = 0; i < ns; ++i) {
      double r = 0.0;
      for (int j = 0; j < nt; ++j)
        r += std::exp((f[i] + g[j] - cost(i, j)) / lam);
      v += std::abs(r - mu[i]);
    }
    return v;
  };

  // epsilon scaling: warm-start the potentials from a blurrier problem, which
  // removes the small-lambda stall of plain alternation
  double cost_max = 0.0;
  for (double v : cost.data()) cost_max = std::max(cost_max, v);
  for (double lam = cost_max / 4.0; lam > 1.5 * lambda; lam /= 1.5) {
    for (int warm = 0; warm < 60; ++warm) {
      sweep(lam);
      if (row_violation(lam) <= std::max(tol, 1e-4)) break;
    }
  }

  double violation = 0.0;
  int it = 0;
  bool converged = false;
  for (it = 1; it <= max_iter; ++it) {
    sweep(lambda);
    violation = row_violation(lambda);
    if (violation <= tol) {
      converged = true;
      break;
    }
  }

  Matrix plan(ns, nt);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j)
      plan(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / lambda);
  SinkhornResult res;
  res.plan = TransportPlan{std::move(plan), mu, nu};
  res.iterations = std::min(it, max_iter);
  res.converged = converged;
  res.marginal_violation = res.plan.marginal_violation();
  return res;
}

// ---------------------------------------------------------------------------
// exact solver on the transportation polytope (oracle for Sinkhorn)

struct ExactPlanResult {
  TransportPlan plan;
  // dual certificate: u_i + v_j <= M_ij everywhere, equality on the support
  std::vector<double> row_duals, col_duals;
  double cost = 0.0;
  int pivots = 0;
};

// Primal network simplex on the bipartite transportation graph. Northwest
// corner start, Bland's rule (first negative reduced cost, lexicographic
// leaving arc), which cannot cycle, so termination is guaranteed. Intended
// for oracle-size instances only.
inline ExactPlanResult exact_ot_small(const Matrix& cost,
                                      const std::vector<double>& mu,
                                      const std::vector<double>& nu) {
  check_cost_matrix(cost);
  check_marginals(mu, nu, cost);
  const int ns = cost.rows(), nt = cost.cols();
  if (ns * nt > 400)
    throw CapacityError("exact_ot_small: " + std::to_string(ns) + "x" +
                        std::to_string(nt) + " exceeds the 400-cell bound");

  struct Cell {
    int i, j;
    double flow;
  };
  std::vector<Cell> basis;
  basis.reserve(ns + nt - 1);
  std::vector<std::vector<int>> basic_at(ns * nt);  // cell -> index in basis, -1
  std::vector<int> basic_idx(static_cast<size_t>(ns) * nt, -1);

  // northwest corner start: exactly ns + nt - 1 basic cells, some possibly 0
  {
    std::vector<double> a = mu, b = nu;
    int i = 0, j = 0;
    while (i < ns && j < nt) {
      const double fl = std::min(a[i], b[j]);
      basic_idx[static_cast<size_t>(i) * nt + j] = static_cast<int>(basis.size());
      basis.push_back({i, j, fl});
      a[i] -= fl;
      b[j] -= fl;
      if (i == ns - 1 && j == nt - 1) break;
      if (j == nt - 1) {
        ++i;
      } else if (i == ns - 1) {
        ++j;
      } else if (a[i] <= b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<double> u(ns), v(nt);
  std::vector<std::vector<int>> row_cells(ns), col_cells(nt);
  // nodes: rows 0..ns-1, cols ns..ns+nt-1
  std::vector<int> parent_node(ns + nt), parent_cell(ns + nt);
  std::vector<char> seen(ns + nt);

  auto rebuild_adjacency = [&] {
    for (auto& r : row_cells) r.clear();
    for (auto& c : col_cells) c.clear();
    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
      row_cells[basis[b].i].push_back(b);
      col_cells[basis[b].j].push_back(b);
    }
  };

  auto compute_duals = [&] {
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < ns) {
        for (int b : row_cells[node]) {
          const int cn = ns + basis[b].j;
          if (!seen[cn]) {
            seen[cn] = 1;
            v[basis[b].j] = cost(node, basis[b].j) - u[node];
            stack.push_back(cn);
          }
        }
      } else {
        const int j = node - ns;
        for (int b : col_cells[j]) {
          const int rn = basis[b].i;
          if (!seen[rn]) {
            seen[rn] = 1;
            u[rn] = cost(rn, j) - v[j];
            stack.push_back(rn);
          }
        }
      }
    }
  };

  const double kRcTol = 1e-11;
  const int kPivotCap = 200000;
  int pivots = 0;
  for (;; ++pivots) {
    if (pivots > kPivotCap)
      throw NumericError("exact_ot_small: pivot cap reached");
    rebuild_adjacency();
    compute_duals();

    int ei = -1, ej = -1;
    for (int i = 0; i < ns && ei < 0; ++i)
      for (int j = 0; j < nt; ++j) {
        if (basic_idx[static_cast<size_t>(i) * nt + j] >= 0) continue;
        if (cost(i, j) - u[i] - v[j] < -kRcTol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;  // dual feasible: optimal

    // unique tree path from column node ej back to row node ei
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<int> stack{ns + ej};
    seen[ns + ej] = 1;
    parent_node[ns + ej] = -1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node == ei) break;
      const auto& inc = node < ns ? row_cells[node] : col_cells[node - ns];
      for (int b : inc) {
        const int other = node < ns ? ns + basis[b].j : basis[b].i;
        if (!seen[other]) {
          seen[other] = 1;
          parent_node[other] = node;
          parent_cell[other] = b;
          stack.push_back(other);
        }
      }
    }

    // cells along the path alternate -theta, +theta, ... starting at ei
    std::vector<int> minus_cells, plus_cells;
    {
      int node = ei;
      bool minus = true;
      while (node != ns + ej) {
        const int b = parent_cell[node];
        (minus ? minus_cells : plus_cells).push_back(b);
        minus = !minus;
        node = parent_node[node];
      }
    }

    // theta = smallest flow on a minus arc; ties leave by lexicographic (i, j)
    double theta = basis[minus_cells[0]].flow;
    for (int b : minus_cells) theta = std::min(theta, basis[b].flow);
    int leave = -1;
    for (int b : minus_cells) {
      if (basis[b].flow != theta) continue;
      if (leave < 0 || basis[b].i < basis[leave].i ||
          (basis[b].i == basis[leave].i && basis[b].j < basis[leave].j))
        leave = b;
    }

    for (int b : minus_cells) basis[b].flow -= theta;
    for (int b : plus_cells) basis[b].flow += theta;

    // swap the entering cell into the leaving slot
    basic_idx[static_cast<size_t>(basis[leave].i) * nt + basis[leave].j] = -1;
    basis[leave] = {ei, ej, theta};
    basic_idx[static_cast<size_t>(ei) * nt + ej] = leave;
  }

  Matrix plan(ns, nt);
  for (const auto& c : basis)
    if (c.flow > 0.0) plan(c.i, c.j) = c.flow;
  ExactPlanResult res;
  res.cost = frobenius_dot(plan, cost);
  res.plan = TransportPlan{std::move(plan), mu, nu};
  res.row_duals = u;
  res.col_duals = v;
  res.pivots = pivots;
  return res;
}

// ---------------------------------------------------------------------------

// diag(gamma 1)^{-1} gamma Ft: each source point maps to the weighted mean
// of its matched target points.
inline FeatureMatrix barycentric_map(const TransportPlan& gamma,
                                     const FeatureMatrix& ft) {
  if (gamma.matrix.cols() != ft.rows())
    throw ShapeError("barycentric_map: plan has " +
                     std::to_string(gamma.matrix.cols()) + " columns vs " +
                     std::to_string(ft.rows()) + " target rows");
  const std::vector<double> mass = row_sums(gamma.matrix);
  for (size_t i = 0; i < mass.size(); ++i)
    if (mass[i] <= 0.0)
      throw InputError("barycentric_map: plan row " + std::to_string(i) +
                       " carries no mass");
  Matrix out = matmul(gamma.matrix, ft);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) /= mass[i];
  return out;
}

// Entropic estimate of the 2-Wasserstein distance between two point clouds
// under uniform (or given) empirical marginals.
inline double w2_distance(const FeatureMatrix& xs, const FeatureMatrix& xt,
                          double lambda, double tol = 1e-7,
                          std::optional<std::vector<double>> mu = std::nullopt,
                          std::optional<std::vector<double>> nu = std::nullopt,
                          int max_iter = 10000) {
  const Matrix m = pairwise_sq_dist(xs, xt);
  const std::vector<double> mm = mu ? *mu : uniform_marginal(xs.rows());
  const std::vector<double> nn = nu ? *nu : uniform_marginal(xt.rows());
  const SinkhornResult r = sinkhorn(m, mm, nn, lambda, tol, max_iter);
  const double c = frobenius_dot(r.plan.matrix, m);
  return std::sqrt(std::max(0.0, c));
}

// ---------------------------------------------------------------------------
// attention vs OT diagnostic

struct ConsistencyReport {
  double lambda = 0.0;
  // (a) A against the naive row-normalization of exp(Fs Ft^T / sqrt(d2))
  double rownorm_max_discrepancy = 0.0;
  // (b) A against the row-normalized Sinkhorn plan at this lambda
  double plan_max_diff = 0.0;
  double mean_row_cosine = 0.0;
  double min_row_cosine = 0.0;
  // (c) fraction of entries below 1e-6
  double sparsity_plan = 0.0;
  double sparsity_attention = 0.0;
  bool sinkhorn_converged = false;
  int sinkhorn_iterations = 0;
};

inline double sparsity_fraction(const Matrix& m, double eps = 1e-6) {
  size_t k = 0;
  for (double v : m.data())
    if (v < eps) ++k;
  return m.size() ? static_cast<double>(k) / static_cast<double>(m.size()) : 0.0;
}

// Measures how close the attention map is to the matrix-scaling object it
// shares with entropic OT. lambda defaults to 2*sqrt(d2), the value at which
// the two kernels coincide up to marginal scalings.
inline ConsistencyReport attention_ot_consistency(
    const AttentionMap& a, const FeatureMatrix& fs, const FeatureMatrix& ft,
    std::optional<double> lambda_opt = std::nullopt, double tol = 1e-7,
    int max_iter = 10000) {
  const double d2 = static_cast<double>(fs.cols());
  ConsistencyReport rep;
  rep.lambda = lambda_opt ? *lambda_opt : 2.0 * std::sqrt(d2);

  // (a) naive exponential path, no max-subtraction
  {
    Matrix k = matmul_nt(fs, ft);
    const double s = std::sqrt(d2);
    for (double& v : k.data()) v = std::exp(v / s);
    for (int i = 0; i < k.rows(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < k.cols(); ++j) sum += k(i, j);
      for (int j = 0; j < k.cols(); ++j) k(i, j) /= sum;
    }
    rep.rownorm_max_discrepancy = max_abs_diff(k, a.matrix);
  }

  // (b), (c)
  const Matrix m = pairwise_sq_dist(fs, ft);
  const SinkhornResult sr =
      sinkhorn(m, uniform_marginal(fs.rows()), uniform_marginal(ft.rows()),
               rep.lambda, tol, max_iter);
  rep.sinkhorn_converged = sr.converged;
  rep.sinkhorn_iterations = sr.iterations;

  Matrix rn = sr.plan.matrix;
  const std::vector<double> mass = row_sums(rn);
  for (int i = 0; i < rn.rows(); ++i)
    for (int j = 0; j < rn.cols(); ++j)
      rn(i, j) = mass[i] > 0.0 ? rn(i, j) / mass[i] : 0.0;

  rep.plan_max_diff = max_abs_diff(rn, a.matrix);
  double mean_cos = 0.0, min_cos = 2.0;
  for (int i = 0; i < rn.rows(); ++i) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int j = 0; j < rn.cols(); ++j) {
      ab += rn(i, j) * a.matrix(i, j);
      aa += rn(i, j) * rn(i, j);
      bb += a.matrix(i, j) * a.matrix(i, j);
    }
    const double c = ab / std::max(1e-300, std::sqrt(aa * bb));
    mean_cos += c;
    min_cos = std::min(min_cos, c);
  }
  rep.mean_row_cosine = rn.rows() ? mean_cos / rn.rows() : 0.0;
  rep.min_row_cosine = rn.rows() ? min_cos : 0.0;
  rep.sparsity_plan = sparsity_fraction(sr.plan.matrix);
  rep.sparsity_attention = sparsity_fraction(a.matrix);
  return rep;
}

}  // namespace dot
