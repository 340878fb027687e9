#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dot/attention.hpp"
#include "dot/config.hpp"
#include "dot/data.hpp"
#include "dot/graph.hpp"
#include "dot/matrix.hpp"
#include "dot/metrics.hpp"
#include "dot/nets.hpp"
#include "dot/tape.hpp"

namespace dot {

// Mean cross-entropy of the classifier on transformed source features.
inline double tce_loss(const FeatureMatrix& fhat, const std::vector<int>& labels,
                       const ClassifierHead& head) {
  if (fhat.rows() != static_cast<int>(labels.size()))
    throw ShapeError("tce_loss: " + std::to_string(fhat.rows()) + " rows vs " +
                     std::to_string(labels.size()) + " labels");
  const Matrix p = head.probabilities(fhat);
  double loss = 0.0;
  for (int i = 0; i < p.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= p.cols())
      throw InputError("tce_loss: label " + std::to_string(y) + " outside [0," +
                       std::to_string(p.cols()) + ")");
    loss -= std::log(std::max(p(i, y), Tape::kLogClamp));
  }
  return loss / p.rows();
}

struct LossBreakdown {
  double total = 0.0;
  double tce = 0.0;
  double ent = 0.0;
  double lpp_t = 0.0;
  double lpp_s = 0.0;
};

struct ObjectiveParts {
  int loss = -1, tce = -1, ent = -1, lpp_t = -1, lpp_s = -1;
  int fs = -1, ft = -1, fhat = -1;
};

// Builds the four-term objective on an existing tape whose parameter handles
// follow ModelParams::registry() order. The target kNN graph is built from
// the current projected features and enters the loss as a constant; pass a
// prebuilt graph to freeze it (training steps and gradient checks do).
inline ObjectiveParts build_objective(Tape& t, const std::vector<int>& handles,
                                      const ModelParams& arch,
                                      const FeatureMatrix& xs,
                                      const std::vector<int>& ys,
                                      const FeatureMatrix& xt,
                                      const TrainConfig& cfg,
                                      const AdjacencyGraph* target_graph = nullptr) {
  if (xs.rows() == 0 || xt.rows() == 0)
    throw ParamError("total_loss: batches must be nonempty");
  ObjectiveParts g;
  const size_t per_net = arch.source_net.layers.size() * 2;
  NetVars src_vars, tgt_vars;
  for (size_t i = 0; i < arch.source_net.layers.size(); ++i)
    src_vars.layer_vars.emplace_back(handles[2 * i], handles[2 * i + 1]);
  for (size_t i = 0; i < arch.target_net.layers.size(); ++i)
    tgt_vars.layer_vars.emplace_back(handles[per_net + 2 * i],
                                     handles[per_net + 2 * i + 1]);
  const int wc = handles[per_net * 2];
  const int bc = handles[per_net * 2 + 1];

  g.fs = net_forward(t, arch.source_net, src_vars, t.input(xs));
  g.ft = net_forward(t, arch.target_net, tgt_vars, t.input(xt));
  const int a = attention_map_op(t, g.fs, g.ft);
  g.fhat = t.matmul(a, g.ft);

  g.tce = t.mean_nll(t.row_softmax(t.add_rowvec(t.matmul(g.fhat, wc), bc), 1.0), ys);
  g.ent = t.entropy_mean(t.row_softmax(t.add_rowvec(t.matmul(g.ft, wc), bc), 1.0));

  AdjacencyGraph wt;
  if (target_graph) {
    wt = *target_graph;
  } else {
    const int k = std::min(cfg.knn_k, xt.rows() - 1);
    if (k >= 1) wt = knn_graph(t.value(g.ft), k);
    else wt.n = xt.rows();
  }
  g.lpp_t = t.lpp(g.ft, wt.laplacian());
  g.lpp_s = t.lpp(g.fhat, supervised_graph(ys).laplacian());

  g.loss = t.add(g.tce, t.add(t.scale(g.ent, cfg.lambda1),
                              t.add(t.scale(g.lpp_t, cfg.lambda2),
                                    t.scale(g.lpp_s, cfg.lambda3))));
  return g;
}

namespace detail {
struct LossGraph {
  Tape tape;
  std::vector<int> param_handles;
  int loss = -1, tce = -1, ent = -1, lpp_t = -1, lpp_s = -1;
  int fs = -1, ft = -1, fhat = -1;
};

inline LossGraph build_total_loss(ModelParams& params,
                                  const FeatureMatrix& xs,
                                  const std::vector<int>& ys,
                                  const FeatureMatrix& xt,
                                  const TrainConfig& cfg,
                                  const AdjacencyGraph* target_graph = nullptr) {
  LossGraph g;
  for (Matrix* p : params.registry()) g.param_handles.push_back(g.tape.param(*p));
  const ObjectiveParts parts = build_objective(g.tape, g.param_handles, params,
                                               xs, ys, xt, cfg, target_graph);
  g.loss = parts.loss;
  g.tce = parts.tce;
  g.ent = parts.ent;
  g.lpp_t = parts.lpp_t;
  g.lpp_s = parts.lpp_s;
  g.fs = parts.fs;
  g.ft = parts.ft;
  g.fhat = parts.fhat;
  return g;
}

inline LossBreakdown breakdown_of(const LossGraph& g) {
  LossBreakdown b;
  b.total = g.tape.value(g.loss)(0, 0);
  b.tce = g.tape.value(g.tce)(0, 0);
  b.ent = g.tape.value(g.ent)(0, 0);
  b.lpp_t = g.tape.value(g.lpp_t)(0, 0);
  b.lpp_s = g.tape.value(g.lpp_s)(0, 0);
  return b;
}
}  // namespace detail

// Evaluates the composite objective and its four raw terms at the current
// parameters.
inline LossBreakdown total_loss(const FeatureMatrix& xs, const std::vector<int>& ys,
                                const FeatureMatrix& xt, ModelParams& params,
                                const TrainConfig& cfg,
                                const AdjacencyGraph* target_graph = nullptr) {
  return detail::breakdown_of(
      detail::build_total_loss(params, xs, ys, xt, cfg, target_graph));
}

// ---------------------------------------------------------------------------
// optimizers

struct Optimizer {
  std::string kind = "adam";
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<Matrix> m, v;

  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
    if (kind == "gd") {
      for (size_t p = 0; p < params.size(); ++p)
        for (size_t i = 0; i < params[p]->size(); ++i)
          params[p]->data()[i] -= lr * grads[p].data()[i];
      return;
    }
    if (m.empty()) {
      for (Matrix* p : params) {
        m.emplace_back(p->rows(), p->cols());
        v.emplace_back(p->rows(), p->cols());
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (size_t p = 0; p < params.size(); ++p) {
      for (size_t i = 0; i < params[p]->size(); ++i) {
        const double g = grads[p].data()[i];
        double& mi = m[p].data()[i];
        double& vi = v[p].data()[i];
        mi = beta1 * mi + (1.0 - beta1) * g;
        vi = beta2 * vi + (1.0 - beta2) * g * g;
        params[p]->data()[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Stage 1: source-only pretraining of F_s and C on plain cross-entropy.

inline std::vector<double> pretrain_source(const DomainDataset& source,
                                           ModelParams& params,
                                           const TrainConfig& cfg) {
  if (!source.labeled())
    throw ParamError("pretrain_source: source domain must carry labels");
  Optimizer opt;
  opt.kind = cfg.optimizer;
  opt.lr = cfg.learning_rate;

  const int n = source.size();
  const int bs = cfg.batch_source > 0 ? std::min(cfg.batch_source, n) : n;
  std::vector<double> curve;
  curve.reserve(cfg.pretrain_epochs);

  // only F_s and C learn here
  auto trainable = [&] {
    std::vector<Matrix*> out;
    for (auto& l : params.source_net.layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
    out.push_back(&params.classifier.w);
    out.push_back(&params.classifier.b);
    return out;
  };

  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto slices = batches(n, bs, cfg.seed ^ 0x5052ULL, epoch);
    for (const auto& slice : slices) {
      Tape t;
      std::vector<int> handles;
      for (Matrix* p : trainable()) handles.push_back(t.param(*p));
      NetVars vars;
      for (size_t i = 0; i < params.source_net.layers.size(); ++i)
        vars.layer_vars.emplace_back(handles[2 * i], handles[2 * i + 1]);
      const int wc = handles[handles.size() - 2];
      const int bc = handles[handles.size() - 1];

      const int fs = net_forward(t, params.source_net, vars,
                                 t.input(take_rows(source.features, slice)));
      std::vector<int> ys(slice.size());
      for (size_t i = 0; i < slice.size(); ++i) ys[i] = source.labels[slice[i]];
      const int loss =
          t.mean_nll(t.row_softmax(t.add_rowvec(t.matmul(fs, wc), bc), 1.0), ys);
      const double lv = t.value(loss)(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("pretrain_source: loss diverged at epoch " +
                           std::to_string(epoch));
      t.backward(loss);
      std::vector<Matrix> grads;
      for (int h : handles) grads.push_back(t.grad(h));
      opt.step(trainable(), grads);
      epoch_loss += lv * slice.size();
    }
    curve.push_back(epoch_loss / n);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// full training procedure

struct TrainResult {
  ModelParams params;
  MetricsLog log;
  std::vector<double> pretrain_curve;
};

namespace detail {
inline AdjacencyGraph induced_subgraph(const AdjacencyGraph& g,
                                       const std::vector<int>& nodes) {
  std::vector<int> pos(g.n, -1);
  for (size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<int>(i);
  AdjacencyGraph out;
  out.n = static_cast<int>(nodes.size());
  for (auto [i, j] : g.edges)
    if (pos[i] >= 0 && pos[j] >= 0)
      out.edges.emplace_back(std::min(pos[i], pos[j]), std::max(pos[i], pos[j]));
  return out;
}

inline EpochRecord evaluate_epoch(int epoch, ModelParams& params,
                                  const DomainDataset& source,
                                  const DomainDataset& target,
                                  const TrainConfig& cfg, MetricsLog& log) {
  EpochRecord r;
  r.epoch = epoch;
  const LossBreakdown lb =
      total_loss(source.features, source.labels, target.features, params, cfg);
  r.l_tce = lb.tce;
  r.l_ent = lb.ent;
  r.l_t = lb.lpp_t;
  r.l_s = lb.lpp_s;

  const FeatureMatrix fs = project(params.source_net, source.features);
  const FeatureMatrix ft = project(params.target_net, target.features);
  const FeatureMatrix fhat = transport_features(attention_map(fs, ft), ft);

  r.source_acc = accuracy(argmax_rows(params.classifier.probabilities(fhat)),
                          source.labels);
  const Prediction tp = predict(params, target.features);
  std::vector<int> yt;
  if (target.labeled()) {
    r.target_acc = accuracy(tp.labels, target.labels);
    yt = target.labels;
  } else {
    yt = tp.labels;
    if (epoch == 0)
      log.notes.push_back("target classes in scatter stats come from predictions");
  }

  // blur proportional to the current cost scale keeps the estimate cheap and
  // the per-epoch trend comparable while feature norms drift
  {
    const Matrix m = pairwise_sq_dist(fhat, ft);
    double mean_cost = 0.0;
    for (double v : m.data()) mean_cost += v;
    mean_cost /= std::max<size_t>(1, m.size());
    const double lam = std::max(1e-9, cfg.w2_lambda * mean_cost);
    const SinkhornResult sr =
        sinkhorn(m, uniform_marginal(fhat.rows()), uniform_marginal(ft.rows()),
                 lam, 1e-4, 200);
    r.w2 = std::sqrt(std::max(0.0, frobenius_dot(sr.plan.matrix, m)));
  }
  ScatterStats st = scatter_stats(fhat, source.labels, ft, yt);
  for (auto& w : st.warnings)
    log.notes.push_back("epoch " + std::to_string(epoch) + ": " + w);
  st.warnings.clear();
  r.scatter = st;
  r.xcov_transported = cross_cov_fnorm(fhat, ft, cfg.seed);
  r.xcov_raw = cross_cov_fnorm(fs, ft, cfg.seed);
  return r;
}
}  // namespace detail

// Pretrain F_s and C on the source, copy F_s into F_t, then minimize the
// four-term objective over both projections and the classifier. Target
// labels, when present, are used only for evaluation records.
inline TrainResult train(const DomainDataset& source, const DomainDataset& target,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (!source.labeled()) throw ParamError("train: source domain must carry labels");
  if (source.num_classes < 2) throw ParamError("train: need at least 2 classes");

  TrainResult res;
  res.params = make_model(source.features.cols(), source.num_classes, cfg);
  res.pretrain_curve = pretrain_source(source, res.params, cfg);
  init_target_from_source(res.params);

  const int ns = source.size(), nt = target.size();
  const int bs = cfg.batch_source > 0 ? std::min(cfg.batch_source, ns) : ns;
  const int bt = cfg.batch_target > 0 ? std::min(cfg.batch_target, nt) : nt;

  Optimizer opt;
  opt.kind = cfg.optimizer;
  opt.lr = cfg.learning_rate;

  res.log.append(detail::evaluate_epoch(0, res.params, source, target, cfg, res.log));

  AdjacencyGraph target_graph;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if ((epoch - 1) % cfg.knn_refresh_epochs == 0) {
      const FeatureMatrix ft = project(res.params.target_net, target.features);
      const int k = std::min(cfg.knn_k, nt - 1);
      if (k >= 1) target_graph = knn_graph(ft, k);
      else target_graph.n = nt;
    }

    const auto slices_s = batches(ns, bs, cfg.seed, epoch);
    const auto slices_t = batches(nt, bt, cfg.seed ^ 0x7447ULL, epoch);
    const size_t steps = std::max(slices_s.size(), slices_t.size());
    for (size_t s = 0; s < steps; ++s) {
      const auto& is = slices_s[s % slices_s.size()];
      const auto& it = slices_t[s % slices_t.size()];
      std::vector<int> ys(is.size());
      for (size_t i = 0; i < is.size(); ++i) ys[i] = source.labels[is[i]];

      const AdjacencyGraph batch_graph =
          detail::induced_subgraph(target_graph, it);
      auto g = detail::build_total_loss(res.params,
                                        take_rows(source.features, is), ys,
                                        take_rows(target.features, it), cfg,
                                        &batch_graph);
      const LossBreakdown lb = detail::breakdown_of(g);
      if (!std::isfinite(lb.total))
        throw NumericError(
            "train: loss diverged at epoch " + std::to_string(epoch) +
            " (tce=" + std::to_string(lb.tce) + " ent=" + std::to_string(lb.ent) +
            " lpp_t=" + std::to_string(lb.lpp_t) +
            " lpp_s=" + std::to_string(lb.lpp_s) + ")");
      g.tape.backward(g.loss);
      std::vector<Matrix> grads;
      for (int h : g.param_handles) grads.push_back(g.tape.grad(h));
      opt.step(res.params.registry(), grads);
    }

    res.log.append(
        detail::evaluate_epoch(epoch, res.params, source, target, cfg, res.log));
  }
  return res;
}

}  // namespace dot
