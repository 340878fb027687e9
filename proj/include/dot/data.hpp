#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dot/config.hpp"
#include "dot/matrix.hpp"
#include "dot/rng.hpp"

namespace dot {

enum class DomainTag { Source, Target };

// Feature rows with optional integer labels; labels.empty() means unlabeled.
struct DomainDataset {
  FeatureMatrix features;
  std::vector<int> labels;
  DomainTag tag = DomainTag::Source;
  int num_classes = 0;

  int size() const { return features.rows(); }
  bool labeled() const { return !labels.empty(); }
};

// ---------------------------------------------------------------------------
// CSV schema: header f0..f{d-1}[,label]; label -1 marks an unlabeled file.

inline void save_features_csv(const DomainDataset& ds, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ParseError("cannot open for writing: " + path);
  const int d = ds.features.cols();
  for (int j = 0; j < d; ++j) std::fprintf(f, "%sf%d", j ? "," : "", j);
  std::fprintf(f, ",label\n");
  for (int i = 0; i < ds.features.rows(); ++i) {
    for (int j = 0; j < d; ++j)
      std::fprintf(f, "%s%.17g", j ? "," : "", ds.features(i, j));
    std::fprintf(f, ",%d\n", ds.labeled() ? ds.labels[i] : -1);
  }
  std::fclose(f);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// expected_classes > 0 additionally validates labels against a declared K.
inline DomainDataset load_features_csv(const std::string& path,
                                       int expected_classes = -1) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const auto header = split_csv_line(line);
  int d = 0;
  bool has_label_col = false;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "f" + std::to_string(c)) {
      ++d;
    } else if (c == header.size() - 1 && header[c] == "label") {
      has_label_col = true;
    } else {
      throw ParseError(path + ": line 1: unexpected header column '" +
                       header[c] + "'");
    }
  }
  if (d == 0) throw ParseError(path + ": line 1: no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  bool any_labeled = false, any_unlabeled = false;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const size_t want = static_cast<size_t>(d) + (has_label_col ? 1 : 0);
    if (cells.size() != want)
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(want) + " cells, got " +
                       std::to_string(cells.size()));
    for (int j = 0; j < d; ++j) {
      size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[j], &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != cells[j].size() || cells[j].empty())
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": non-numeric cell '" + cells[j] + "'");
      if (!std::isfinite(v))
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": non-finite value");
      values.push_back(v);
    }
    if (has_label_col) {
      const std::string& cell = cells[d];
      size_t pos = 0;
      long lv = 0;
      try {
        lv = std::stol(cell, &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != cell.size() || cell.empty())
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": non-integer label '" + cell + "'");
      if (lv == -1) {
        any_unlabeled = true;
      } else if (lv >= 0) {
        any_labeled = true;
        if (expected_classes > 0 && lv >= expected_classes)
          throw ParseError(path + ": line " + std::to_string(lineno) +
                           ": label " + std::to_string(lv) + " >= declared " +
                           std::to_string(expected_classes) + " classes");
      } else {
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": label must be >= 0 or the -1 sentinel");
      }
      if (any_labeled && any_unlabeled)
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": mixed labeled and -1 rows");
      labels.push_back(static_cast<int>(lv));
    }
  }

  const int n = static_cast<int>(values.size()) / d;
  DomainDataset ds;
  ds.features = Matrix(n, d, std::move(values));
  if (has_label_col && any_labeled) {
    ds.labels = std::move(labels);
    int mx = -1;
    for (int l : ds.labels) mx = std::max(mx, l);
    ds.num_classes = expected_classes > 0 ? expected_classes : mx + 1;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// synthetic shifted-Gaussian domains

namespace detail {
inline std::vector<std::vector<double>> class_means(const SyntheticSpec& spec) {
  std::vector<std::vector<double>> means(spec.classes,
                                         std::vector<double>(spec.dim, 0.0));
  Rng dir_rng = rng_stream(spec.seed, 7);
  for (int c = 0; c < spec.classes; ++c) {
    if (c < spec.dim) {
      means[c][c] = spec.separation;
    } else {
      double norm = 0.0;
      for (int k = 0; k < spec.dim; ++k) {
        means[c][k] = dir_rng.gauss();
        norm += means[c][k] * means[c][k];
      }
      norm = std::sqrt(norm);
      for (int k = 0; k < spec.dim; ++k)
        means[c][k] *= spec.separation / norm;
    }
  }
  return means;
}

// rotation by shift_magnitude radians in consecutive coordinate planes, then
// translation by shift_magnitude along a seeded random unit direction (a
// fixed axis-aligned direction would be invisible to symmetric classifiers)
inline void apply_shift(const SyntheticSpec& spec, std::vector<double>& mean) {
  const bool rotate = spec.shift_kind == "rotation" || spec.shift_kind == "both";
  const bool translate =
      spec.shift_kind == "translation" || spec.shift_kind == "both";
  if (rotate) {
    const double c = std::cos(spec.shift_magnitude);
    const double s = std::sin(spec.shift_magnitude);
    for (int k = 0; k + 1 < spec.dim; k += 2) {
      const double a = mean[k], b = mean[k + 1];
      mean[k] = c * a - s * b;
      mean[k + 1] = s * a + c * b;
    }
  }
  if (translate) {
    Rng dir_rng = rng_stream(spec.seed, 11);
    std::vector<double> t(spec.dim);
    double norm = 0.0;
    for (double& v : t) {
      v = dir_rng.gauss();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int k = 0; k < spec.dim; ++k)
      mean[k] += spec.shift_magnitude * t[k] / norm;
  }
}

inline DomainDataset sample_domain(const SyntheticSpec& spec,
                                   const std::vector<std::vector<double>>& means,
                                   DomainTag tag, Rng rng) {
  const int n = spec.classes * spec.samples_per_class;
  Matrix x(n, spec.dim);
  std::vector<int> y(n);
  int row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int k = 0; k < spec.dim; ++k)
        x(row, k) = means[c][k] + spec.covariance_scale * rng.gauss();
      y[row] = c;
    }
  }
  DomainDataset ds;
  ds.features = std::move(x);
  ds.labels = std::move(y);
  ds.tag = tag;
  ds.num_classes = spec.classes;
  return ds;
}
}  // namespace detail

// Source classes sit at separated means; target classes use the shifted
// means with the same class identities. Bit-identical output per seed.
inline std::pair<DomainDataset, DomainDataset> synth_shifted_gaussians(
    const SyntheticSpec& spec) {
  spec.validate();
  const auto means = detail::class_means(spec);
  auto target_means = means;
  for (auto& m : target_means) detail::apply_shift(spec, m);
  DomainDataset src = detail::sample_domain(spec, means, DomainTag::Source,
                                            rng_stream(spec.seed, 0));
  DomainDataset tgt = detail::sample_domain(spec, target_means, DomainTag::Target,
                                            rng_stream(spec.seed, 1));
  return {std::move(src), std::move(tgt)};
}

// ---------------------------------------------------------------------------
// deterministic mini-batch index slices

inline std::vector<std::vector<int>> batches(int n, int b, uint64_t seed,
                                             int epoch) {
  if (b < 1 || b > n)
    throw ParamError("batches: batch size " + std::to_string(b) +
                     " outside [1," + std::to_string(n) + "]");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng = rng_stream(seed, 0x42000000ULL + static_cast<uint64_t>(epoch));
  rng.shuffle(perm);
  std::vector<std::vector<int>> out;
  for (int lo = 0; lo < n; lo += b) {
    const int hi = std::min(n, lo + b);
    out.emplace_back(perm.begin() + lo, perm.begin() + hi);
  }
  return out;
}

}  // namespace dot
