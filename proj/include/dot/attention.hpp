#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dot/matrix.hpp"
#include "dot/tape.hpp"

namespace dot {

// Row-stochastic map from source samples (queries, rows) to target samples
// (keys, columns). scale records the sqrt(d2) divisor used to build it.
struct AttentionMap {
  Matrix matrix;
  double scale = 1.0;

  int source_count() const { return matrix.rows(); }
  int target_count() const { return matrix.cols(); }
};

// A = row-softmax(Fs Ft^T / sqrt(d2)). Row i holds the similarities of
// query i to every key.
inline AttentionMap attention_map(const FeatureMatrix& fs, const FeatureMatrix& ft) {
  if (fs.cols() != ft.cols())
    throw ShapeError("attention_map: projected dims differ, " + fs.shape_str() +
                     " vs " + ft.shape_str());
  if (fs.cols() < 1) throw ShapeError("attention_map: empty feature dimension");
  const double scale = std::sqrt(static_cast<double>(fs.cols()));
  return AttentionMap{softmax_rows(matmul_nt(fs, ft), scale), scale};
}

// Tape variant used inside the training objective.
inline int attention_map_op(Tape& tape, int fs, int ft) {
  const int d2 = tape.value(fs).cols();
  if (d2 != tape.value(ft).cols())
    throw ShapeError("attention_map: projected dims differ, " +
                     tape.value(fs).shape_str() + " vs " +
                     tape.value(ft).shape_str());
  return tape.row_softmax(tape.matmul_nt(fs, ft), std::sqrt(static_cast<double>(d2)));
}

// F_hat^s = A Ft: each output row is a convex combination of target rows.
inline FeatureMatrix transport_features(const AttentionMap& a, const FeatureMatrix& ft) {
  if (a.matrix.cols() != ft.rows())
    throw ShapeError("transport_features: " + std::to_string(a.matrix.cols()) +
                     " attention columns vs " + std::to_string(ft.rows()) +
                     " target rows");
  return matmul(a.matrix, ft);
}

// Ground-truth attention built from labels: mass spread uniformly over the
// target samples of the matching class. Rows are corrected to sum to 1
// exactly.
inline AttentionMap oracle_attention(const std::vector<int>& src_labels,
                                     const std::vector<int>& tgt_labels) {
  const int ns = static_cast<int>(src_labels.size());
  const int nt = static_cast<int>(tgt_labels.size());
  Matrix a(ns, nt);
  for (int i = 0; i < ns; ++i) {
    int count = 0;
    for (int j = 0; j < nt; ++j)
      if (tgt_labels[j] == src_labels[i]) ++count;
    if (count == 0)
      throw CoverageError("oracle_attention: source class " +
                          std::to_string(src_labels[i]) +
                          " has no target samples");
    const double w = 1.0 / count;
    int last = -1;
    double sum = 0.0;
    for (int j = 0; j < nt; ++j) {
      if (tgt_labels[j] == src_labels[i]) {
        a(i, j) = w;
        sum += w;
        last = j;
      }
    }
    a(i, last) += 1.0 - sum;
  }
  return AttentionMap{std::move(a), 1.0};
}

// CSV layout shared by attention maps and transport plans so the two render
// as side-by-side heat-maps: header j0..j{n_t-1}, one row per source sample.
inline void write_heatmap_csv(const Matrix& m, FILE* f) {
  for (int j = 0; j < m.cols(); ++j)
    std::fprintf(f, "%sj%d", j ? "," : "", j);
  std::fprintf(f, "\n");
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j)
      std::fprintf(f, "%s%.17g", j ? "," : "", m(i, j));
    std::fprintf(f, "\n");
  }
}

}  // namespace dot
