#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dot/attention.hpp"
#include "dot/data.hpp"
#include "dot/matrix.hpp"
#include "dot/nets.hpp"
#include "dot/ot.hpp"
#include "dot/rng.hpp"

namespace dot {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ShapeError("accuracy: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / pred.size();
}

// ---------------------------------------------------------------------------
// domain correlation

// F-norm of the empirical cross-covariance (1/n)(Fa - mean)^T (Fb - mean').
// Rows are paired by index; when counts differ the larger side is
// subsampled with a seeded draw.
inline double cross_cov_fnorm(const FeatureMatrix& fa_in, const FeatureMatrix& fb_in,
                              uint64_t seed = 0) {
  Matrix fa = fa_in, fb = fb_in;
  if (fa.rows() != fb.rows()) {
    const int n = std::min(fa.rows(), fb.rows());
    Matrix& big = fa.rows() > fb.rows() ? fa : fb;
    std::vector<int> idx(big.rows());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng = rng_stream(seed, 0xc0cULL);
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    big = take_rows(big, idx);
  }
  const int n = fa.rows();
  if (n < 2) throw ParamError("cross_cov_fnorm: need at least 2 paired samples");
  const std::vector<double> ma = col_means(fa), mb = col_means(fb);
  Matrix sigma(fa.cols(), fb.cols());
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < fa.cols(); ++i) {
      const double da = fa(r, i) - ma[i];
      for (int j = 0; j < fb.cols(); ++j)
        sigma(i, j) += da * (fb(r, j) - mb[j]);
    }
  for (double& v : sigma.data()) v /= n;
  return frobenius_norm(sigma);
}

// ---------------------------------------------------------------------------
// scatter analysis

struct ScatterStats {
  // mean distance of samples to their class center
  double within_src = 0.0, within_tgt = 0.0;
  // mean distance of class centers to the pooled two-domain center
  double between_src = 0.0, between_tgt = 0.0;
  // mean distance between matched class centers
  double center_dist = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {
inline std::map<int, std::vector<int>> by_class(const std::vector<int>& labels) {
  std::map<int, std::vector<int>> m;
  for (size_t i = 0; i < labels.size(); ++i)
    m[labels[i]].push_back(static_cast<int>(i));
  return m;
}

inline std::vector<double> mean_of_rows(const Matrix& f, const std::vector<int>& idx) {
  std::vector<double> m(f.cols(), 0.0);
  for (int i : idx)
    for (int j = 0; j < f.cols(); ++j) m[j] += f(i, j);
  for (double& v : m) v /= idx.size();
  return m;
}

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace detail

inline ScatterStats scatter_stats(const FeatureMatrix& fs, const std::vector<int>& ys,
                                  const FeatureMatrix& ft, const std::vector<int>& yt) {
  if (fs.rows() != static_cast<int>(ys.size()) ||
      ft.rows() != static_cast<int>(yt.size()))
    throw ShapeError("scatter_stats: label/feature count mismatch");
  ScatterStats st;
  const auto cs = detail::by_class(ys), ct = detail::by_class(yt);

  // pooled center over both domains
  std::vector<double> pooled(fs.cols(), 0.0);
  for (int i = 0; i < fs.rows(); ++i)
    for (int j = 0; j < fs.cols(); ++j) pooled[j] += fs(i, j);
  for (int i = 0; i < ft.rows(); ++i)
    for (int j = 0; j < ft.cols(); ++j) pooled[j] += ft(i, j);
  for (double& v : pooled) v /= (fs.rows() + ft.rows());

  std::map<int, std::vector<double>> centers_s, centers_t;
  auto domain_pass = [&](const Matrix& f, const std::map<int, std::vector<int>>& cls,
                         std::map<int, std::vector<double>>& centers,
                         double& within, double& between) {
    double wsum = 0.0;
    int wcount = 0;
    double bsum = 0.0;
    for (const auto& [label, idx] : cls) {
      if (idx.empty()) continue;
      const auto c = detail::mean_of_rows(f, idx);
      centers[label] = c;
      for (int i : idx) {
        double s = 0.0;
        for (int j = 0; j < f.cols(); ++j)
          s += (f(i, j) - c[j]) * (f(i, j) - c[j]);
        wsum += std::sqrt(s);
        ++wcount;
      }
      bsum += detail::dist(c, pooled);
    }
    within = wcount ? wsum / wcount : 0.0;
    between = cls.empty() ? 0.0 : bsum / cls.size();
  };
  domain_pass(fs, cs, centers_s, st.within_src, st.between_src);
  domain_pass(ft, ct, centers_t, st.within_tgt, st.between_tgt);

  double csum = 0.0;
  int cnum = 0;
  for (const auto& [label, c] : centers_s) {
    auto it = centers_t.find(label);
    if (it == centers_t.end()) {
      st.warnings.push_back("class " + std::to_string(label) +
                            " absent from target; skipped in center distance");
      continue;
    }
    csum += detail::dist(c, it->second);
    ++cnum;
  }
  for (const auto& [label, c] : centers_t)
    if (!centers_s.count(label))
      st.warnings.push_back("class " + std::to_string(label) +
                            " absent from source; skipped in center distance");
  if (cnum == 0) throw CoverageError("scatter_stats: no class present in both domains");
  st.center_dist = csum / cnum;
  return st;
}

// ---------------------------------------------------------------------------
// proxy A-distance

struct ProbeConfig {
  int steps = 500;
  double learning_rate = 0.1;
  uint64_t seed = 0;
};

namespace detail {
// Logistic probe: returns held-out error of a linear domain classifier.
inline double domain_probe_error(const Matrix& fa, const Matrix& fb,
                                 const ProbeConfig& pc) {
  const int d = fa.cols();
  if (fb.cols() != d) throw ShapeError("a_distance: feature dims differ");
  if (fa.rows() < 4 || fb.rows() < 4)
    throw ParamError("a_distance: need at least 4 samples per domain");

  auto split = [&](const Matrix& f, uint64_t salt) {
    std::vector<int> idx(f.rows());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng = rng_stream(pc.seed, salt);
    rng.shuffle(idx);
    const int half = f.rows() / 2;
    std::vector<int> train(idx.begin(), idx.begin() + half);
    std::vector<int> test(idx.begin() + half, idx.end());
    return std::make_pair(take_rows(f, train), take_rows(f, test));
  };
  auto [a_train, a_test] = split(fa, 0xa1);
  auto [b_train, b_test] = split(fb, 0xb2);
  if (a_train.rows() < 1 || b_train.rows() < 1 || a_test.rows() < 1 ||
      b_test.rows() < 1)
    throw ParamError("a_distance: degenerate split");

  std::vector<double> w(d, 0.0);
  double bias = 0.0;
  const int n = a_train.rows() + b_train.rows();
  for (int step = 0; step < pc.steps; ++step) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    auto accumulate = [&](const Matrix& x, double y) {
      for (int i = 0; i < x.rows(); ++i) {
        double z = bias;
        for (int j = 0; j < d; ++j) z += w[j] * x(i, j);
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double g = (p - y) / n;
        for (int j = 0; j < d; ++j) gw[j] += g * x(i, j);
        gb += g;
      }
    };
    accumulate(a_train, 0.0);
    accumulate(b_train, 1.0);
    for (int j = 0; j < d; ++j) w[j] -= pc.learning_rate * gw[j];
    bias -= pc.learning_rate * gb;
  }

  int wrong = 0;
  auto count = [&](const Matrix& x, int y) {
    for (int i = 0; i < x.rows(); ++i) {
      double z = bias;
      for (int j = 0; j < d; ++j) z += w[j] * x(i, j);
      if ((z > 0.0 ? 1 : 0) != y) ++wrong;
    }
  };
  count(a_test, 0);
  count(b_test, 1);
  return static_cast<double>(wrong) / (a_test.rows() + b_test.rows());
}
}  // namespace detail

// d_A = 2 (1 - 2 eps), clamped to [0, 2]
inline double a_distance_from_error(double eps) {
  return std::clamp(2.0 * (1.0 - 2.0 * eps), 0.0, 2.0);
}

// eps is the held-out error of a linear probe separating the two domains.
inline double a_distance(const FeatureMatrix& fs, const FeatureMatrix& ft,
                         const ProbeConfig& pc = {}) {
  return a_distance_from_error(detail::domain_probe_error(fs, ft, pc));
}

// Per-class A-distance averaged under the target class frequencies. Every
// class seen in either domain must appear in both with at least 4 samples.
inline double a_c_distance(const FeatureMatrix& fs, const std::vector<int>& ys,
                           const FeatureMatrix& ft, const std::vector<int>& yt,
                           const ProbeConfig& pc = {}) {
  const auto cs = detail::by_class(ys), ct = detail::by_class(yt);
  for (const auto& [label, idx] : cs)
    if (!ct.count(label))
      throw CoverageError("a_c_distance: class " + std::to_string(label) +
                          " absent from the target domain");
  double weighted = 0.0;
  int covered_targets = 0;
  for (const auto& [label, tidx] : ct) {
    auto it = cs.find(label);
    if (it == cs.end() || it->second.size() < 4 || tidx.size() < 4)
      throw CoverageError("a_c_distance: class " + std::to_string(label) +
                          " lacks 4 samples in both domains");
    const double d =
        a_distance(take_rows(fs, it->second), take_rows(ft, tidx), pc);
    weighted += d * tidx.size();
    covered_targets += static_cast<int>(tidx.size());
  }
  if (covered_targets == 0) throw CoverageError("a_c_distance: no target classes");
  return weighted / covered_targets;
}

// ---------------------------------------------------------------------------
// empirical bound monitor (target labels are evaluation-only)

struct BoundReport {
  double eps_s = 0.0;
  double eps_t = 0.0;
  double w2_hat = 0.0;
};

inline BoundReport bound_monitor(const ModelParams& params,
                                 const DomainDataset& source,
                                 const DomainDataset& target,
                                 double w2_lambda = 0.5) {
  if (!source.labeled() || !target.labeled())
    throw ParamError("bound_monitor: both domains need labels");
  const FeatureMatrix fs = project(params.source_net, source.features);
  const FeatureMatrix ft = project(params.target_net, target.features);
  const FeatureMatrix fhat = transport_features(attention_map(fs, ft), ft);

  BoundReport r;
  r.eps_s = 1.0 - accuracy(argmax_rows(params.classifier.probabilities(fhat)),
                           source.labels);
  r.eps_t = 1.0 - accuracy(argmax_rows(params.classifier.probabilities(ft)),
                           target.labels);
  r.w2_hat = w2_distance(fhat, ft, w2_lambda, 1e-6, std::nullopt, std::nullopt, 2000);
  return r;
}

// ---------------------------------------------------------------------------
// per-epoch log and exports

struct EpochRecord {
  int epoch = 0;
  double l_tce = 0.0, l_ent = 0.0, l_t = 0.0, l_s = 0.0;
  double source_acc = 0.0;
  std::optional<double> target_acc;
  double w2 = 0.0;
  ScatterStats scatter;
  double xcov_transported = 0.0;  // ||Sigma(F_hat^s, F^t)||_F
  double xcov_raw = 0.0;          // ||Sigma(F^s, F^t)||_F
};

struct MetricsLog {
  std::vector<EpochRecord> records;
  std::vector<std::string> notes;

  void append(EpochRecord r) {
    if (!records.empty() && r.epoch <= records.back().epoch)
      throw ParamError("metrics log: epochs must increase");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(r.l_tce) || !finite(r.l_ent) || !finite(r.l_t) ||
        !finite(r.l_s) || !finite(r.source_acc) || !finite(r.w2) ||
        !finite(r.xcov_transported) || !finite(r.xcov_raw))
      throw NumericError("metrics log: non-finite value at epoch " +
                         std::to_string(r.epoch));
    records.push_back(std::move(r));
  }
};

namespace detail {
inline std::vector<std::pair<std::string, double>> record_values(
    const EpochRecord& r) {
  std::vector<std::pair<std::string, double>> v = {
      {"l_tce", r.l_tce},
      {"l_ent", r.l_ent},
      {"l_t", r.l_t},
      {"l_s", r.l_s},
      {"source_acc", r.source_acc},
      {"w2", r.w2},
      {"within_src", r.scatter.within_src},
      {"within_tgt", r.scatter.within_tgt},
      {"between_src", r.scatter.between_src},
      {"between_tgt", r.scatter.between_tgt},
      {"center_dist", r.scatter.center_dist},
      {"xcov_transported", r.xcov_transported},
      {"xcov_raw", r.xcov_raw},
  };
  if (r.target_acc) v.emplace_back("target_acc", *r.target_acc);
  return v;
}
}  // namespace detail

// Long-format CSV: epoch,metric,value.
inline void write_metrics_csv(const MetricsLog& log, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ParseError("cannot open for writing: " + path);
  std::fprintf(f, "epoch,metric,value\n");
  for (const auto& r : log.records)
    for (const auto& [name, value] : detail::record_values(r))
      std::fprintf(f, "%d,%s,%.17g\n", r.epoch, name.c_str(), value);
  std::fclose(f);
}

// Minimal self-contained line chart: one polyline, labeled axes.
inline void write_curve_svg(const std::string& metric,
                            const std::vector<std::pair<int, double>>& series,
                            const std::string& path) {
  if (series.empty()) return;
  const double width = 480, height = 320, ml = 60, mr = 15, mt = 30, mb = 40;
  double ymin = series.front().second, ymax = ymin;
  for (const auto& [e, v] : series) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (ymax - ymin < 1e-12) {
    ymax += 1.0;
    ymin -= 1.0;
  }
  const int emin = series.front().first, emax = series.back().first;
  const double espan = emax > emin ? emax - emin : 1.0;
  auto px = [&](int e) { return ml + (width - ml - mr) * (e - emin) / espan; };
  auto py = [&](double v) {
    return height - mb - (height - mt - mb) * (v - ymin) / (ymax - ymin);
  };

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ParseError("cannot open for writing: " + path);
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
               "height=\"%g\" viewBox=\"0 0 %g %g\">\n",
               width, height, width, height);
  std::fprintf(f, "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", width,
               height);
  std::fprintf(f,
               "<text x=\"%g\" y=\"18\" font-family=\"sans-serif\" "
               "font-size=\"14\" text-anchor=\"middle\">%s</text>\n",
               width / 2, metric.c_str());
  // axes
  std::fprintf(f,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
               "stroke=\"black\"/>\n",
               ml, height - mb, width - mr, height - mb);
  std::fprintf(f,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
               "stroke=\"black\"/>\n",
               ml, mt, ml, height - mb);
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"12\" text-anchor=\"middle\">epoch</text>\n",
               (ml + width - mr) / 2, height - 8);
  std::fprintf(f,
               "<text x=\"14\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"12\" text-anchor=\"middle\" "
               "transform=\"rotate(-90 14 %g)\">%s</text>\n",
               (mt + height - mb) / 2, (mt + height - mb) / 2, metric.c_str());
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"10\">%d</text>\n",
               ml, height - mb + 14, emin);
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"10\" text-anchor=\"end\">%d</text>\n",
               width - mr, height - mb + 14, emax);
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"10\" text-anchor=\"end\">%.4g</text>\n",
               ml - 4, height - mb, ymin);
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"10\" text-anchor=\"end\">%.4g</text>\n",
               ml - 4, mt + 10, ymax);
  std::fprintf(f, "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"");
  for (const auto& [e, v] : series) std::fprintf(f, "%.2f,%.2f ", px(e), py(v));
  std::fprintf(f, "\"/>\n</svg>\n");
  std::fclose(f);
}

// metrics.csv plus one SVG per metric present in the log.
inline void export_curves(const MetricsLog& log, const std::string& out_dir) {
  write_metrics_csv(log, out_dir + "/metrics.csv");
  if (log.records.empty()) return;
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& r : log.records)
    for (const auto& [name, value] : detail::record_values(r))
      series[name].emplace_back(r.epoch, value);
  for (const auto& [name, s] : series)
    write_curve_svg(name, s, out_dir + "/curve_" + name + ".svg");
}

inline void export_heatmap_csv(const Matrix& m, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ParseError("cannot open for writing: " + path);
  write_heatmap_csv(m, f);
  std::fclose(f);
}

}  // namespace dot
