#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dot/config.hpp"
#include "dot/matrix.hpp"
#include "dot/rng.hpp"
#include "dot/tape.hpp"

namespace dot {

enum class Activation { Identity, Tanh };

inline const char* activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "identity";
}
inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ParseError("unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
  Activation act = Activation::Identity;
};

// Fully-connected projection stack mapping backbone features to the shared
// attention space.
struct ProjectionNet {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.front().w.rows(); }
  int output_dim() const { return layers.back().w.cols(); }

  bool same_architecture(const ProjectionNet& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (size_t i = 0; i < layers.size(); ++i)
      if (!layers[i].w.same_shape(o.layers[i].w) ||
          layers[i].act != o.layers[i].act)
        return false;
    return true;
  }
};

// F = net(G), row per sample.
inline FeatureMatrix project(const ProjectionNet& net, const FeatureMatrix& g) {
  if (g.cols() != net.input_dim())
    throw ShapeError("project: input width " + std::to_string(g.cols()) +
                     " vs net expecting " + std::to_string(net.input_dim()));
  Matrix x = g;
  for (const auto& layer : net.layers) {
    Matrix z = matmul(x, layer.w);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z(i, j) += layer.b(0, j);
    if (layer.act == Activation::Tanh)
      for (double& v : z.data()) v = std::tanh(v);
    x = std::move(z);
  }
  return x;
}

// Single linear layer with a row-softmax head.
struct ClassifierHead {
  Matrix w;  // d2 x K
  Matrix b;  // 1 x K

  int num_classes() const { return w.cols(); }

  Matrix logits(const FeatureMatrix& f) const {
    if (f.cols() != w.rows())
      throw ShapeError("classifier: input width " + std::to_string(f.cols()) +
                       " vs weights expecting " + std::to_string(w.rows()));
    Matrix z = matmul(f, w);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z(i, j) += b(0, j);
    return z;
  }

  Matrix probabilities(const FeatureMatrix& f) const {
    return softmax_rows(logits(f), 1.0);
  }
};

// ---------------------------------------------------------------------------

struct ModelParams {
  ProjectionNet source_net;
  ProjectionNet target_net;
  ClassifierHead classifier;
  uint64_t seed = 0;

  // Fixed enumeration order; tape registration and optimizer state rely on it.
  std::vector<Matrix*> registry() {
    std::vector<Matrix*> out;
    for (auto& l : source_net.layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
    for (auto& l : target_net.layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
    out.push_back(&classifier.w);
    out.push_back(&classifier.b);
    return out;
  }
};

namespace detail {
inline Matrix glorot(int in, int out, Rng& rng) {
  const double a = std::sqrt(6.0 / (in + out));
  Matrix w(in, out);
  for (double& v : w.data()) v = rng.uniform(-a, a);
  return w;
}
}  // namespace detail

// Two-layer tanh/linear projections and a softmax classifier, Glorot init.
inline ModelParams make_model(int input_dim, int num_classes,
                              const TrainConfig& cfg) {
  if (num_classes < 2) throw ParamError("make_model: need at least 2 classes");
  ModelParams p;
  p.seed = cfg.seed;
  Rng rng = rng_stream(cfg.seed, 0x6d6f64ULL);
  auto make_net = [&] {
    ProjectionNet net;
    net.layers.push_back({detail::glorot(input_dim, cfg.hidden_dim, rng),
                          Matrix(1, cfg.hidden_dim), Activation::Tanh});
    net.layers.push_back({detail::glorot(cfg.hidden_dim, cfg.proj_dim, rng),
                          Matrix(1, cfg.proj_dim), Activation::Identity});
    return net;
  };
  p.source_net = make_net();
  p.target_net = make_net();
  p.classifier = {detail::glorot(cfg.proj_dim, num_classes, rng),
                  Matrix(1, num_classes)};
  return p;
}

// Alg. line "initialize F_t by the pre-trained F_s": deep copy, after which
// the two sets of weights evolve independently.
inline void init_target_from_source(ModelParams& params) {
  if (!params.source_net.same_architecture(params.target_net))
    throw ShapeError("init_target_from_source: architecture mismatch");
  params.target_net = params.source_net;
}

// ---------------------------------------------------------------------------
// tape bindings

struct NetVars {
  std::vector<std::pair<int, int>> layer_vars;  // (w, b) handles
};

inline NetVars register_net(Tape& t, ProjectionNet& net) {
  NetVars v;
  for (auto& l : net.layers)
    v.layer_vars.emplace_back(t.param(l.w), t.param(l.b));
  return v;
}

inline int net_forward(Tape& t, const ProjectionNet& net, const NetVars& vars,
                       int x) {
  int h = x;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    h = t.add_rowvec(t.matmul(h, vars.layer_vars[i].first),
                     vars.layer_vars[i].second);
    if (net.layers[i].act == Activation::Tanh) h = t.tanh_of(h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// prediction

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;
};

inline std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(p.rows());
  for (int i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < p.cols(); ++j)
      if (p(i, j) > p(i, best)) best = j;  // ties keep the smaller index
    out[i] = best;
  }
  return out;
}

inline Prediction predict_with(const ProjectionNet& net,
                               const ClassifierHead& head,
                               const FeatureMatrix& x) {
  Matrix probs = head.probabilities(project(net, x));
  Prediction p;
  p.labels = argmax_rows(probs);
  p.probabilities = std::move(probs);
  return p;
}

// Test-stage path: target projection followed by the shared classifier.
inline Prediction predict(const ModelParams& params, const FeatureMatrix& x) {
  return predict_with(params.target_net, params.classifier, x);
}

// ---------------------------------------------------------------------------
// checkpoint (JSON, byte-stable for identical parameters)

namespace detail {
inline Json layer_to_json(const DenseLayer& l) {
  return Json{{"in", l.w.rows()},
              {"out", l.w.cols()},
              {"activation", activation_name(l.act)},
              {"w", l.w.data()},
              {"b", l.b.data()}};
}

inline DenseLayer layer_from_json(const Json& j) {
  try {
    const int in = j.at("in").get<int>();
    const int out = j.at("out").get<int>();
    DenseLayer l;
    l.act = activation_from_name(j.at("activation").get<std::string>());
    l.w = Matrix(in, out, j.at("w").get<std::vector<double>>());
    l.b = Matrix(1, out, j.at("b").get<std::vector<double>>());
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint layer: ") + e.what());
  }
}
}  // namespace detail

inline Json checkpoint_to_json(const ModelParams& params, const TrainConfig& cfg) {
  Json src = Json::array(), tgt = Json::array();
  for (const auto& l : params.source_net.layers)
    src.push_back(detail::layer_to_json(l));
  for (const auto& l : params.target_net.layers)
    tgt.push_back(detail::layer_to_json(l));
  return Json{{"version", 1},
              {"seed", params.seed},
              {"config", to_json(cfg)},
              {"params",
               Json{{"source_net", src},
                    {"target_net", tgt},
                    {"classifier", Json{{"in", params.classifier.w.rows()},
                                        {"classes", params.classifier.w.cols()},
                                        {"w", params.classifier.w.data()},
                                        {"b", params.classifier.b.data()}}}}}};
}

inline void save_checkpoint(const ModelParams& params, const TrainConfig& cfg,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << checkpoint_to_json(params, cfg).dump(2) << "\n";
}

inline std::pair<ModelParams, TrainConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1)
      throw ParseError(path + ": unsupported checkpoint version");
    ModelParams p;
    p.seed = j.at("seed").get<uint64_t>();
    for (const auto& lj : j.at("params").at("source_net"))
      p.source_net.layers.push_back(detail::layer_from_json(lj));
    for (const auto& lj : j.at("params").at("target_net"))
      p.target_net.layers.push_back(detail::layer_from_json(lj));
    const auto& cj = j.at("params").at("classifier");
    const int in = cj.at("in").get<int>();
    const int k = cj.at("classes").get<int>();
    p.classifier.w = Matrix(in, k, cj.at("w").get<std::vector<double>>());
    p.classifier.b = Matrix(1, k, cj.at("b").get<std::vector<double>>());
    TrainConfig cfg = train_config_from_json(j.at("config"));
    if (p.source_net.layers.empty() || p.target_net.layers.empty())
      throw ParseError(path + ": empty projection net");
    return {std::move(p), cfg};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": checkpoint schema: " + e.what());
  }
}

}  // namespace dot
