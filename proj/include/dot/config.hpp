#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dot/errors.hpp"

namespace dot {

using Json = nlohmann::ordered_json;

// Hyper-parameters for the full training procedure. lambda1 weighs the
// target entropy term, lambda2 the target locality term, lambda3 the source
// locality term. Batch sizes of 0 mean whole-domain batches.
struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double learning_rate = 1e-3;
  int epochs = 100;
  int pretrain_epochs = 200;
  int batch_source = 0;
  int batch_target = 0;
  int knn_k = 5;
  uint64_t seed = 0;
  std::string optimizer = "adam";  // "adam" or "gd"
  int hidden_dim = 32;
  int proj_dim = 16;
  int knn_refresh_epochs = 1;  // rebuild the target kNN graph every N epochs
  double w2_lambda = 0.05;     // per-epoch W2 blur, as a fraction of mean cost

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
      throw ParamError("config: lambdas must be >= 0");
    if (learning_rate <= 0) throw ParamError("config: learning_rate must be > 0");
    if (epochs < 0 || pretrain_epochs < 0)
      throw ParamError("config: epoch counts must be >= 0");
    if (batch_source < 0 || batch_target < 0)
      throw ParamError("config: batch sizes must be >= 0 (0 = full batch)");
    if (knn_k < 1) throw ParamError("config: knn_k must be >= 1");
    if (hidden_dim < 1 || proj_dim < 1)
      throw ParamError("config: layer widths must be >= 1");
    if (knn_refresh_epochs < 1)
      throw ParamError("config: knn_refresh_epochs must be >= 1");
    if (optimizer != "adam" && optimizer != "gd")
      throw ParamError("config: optimizer must be 'adam' or 'gd', got '" +
                       optimizer + "'");
    if (w2_lambda <= 0) throw ParamError("config: w2_lambda must be > 0");
  }
};

// Two Gaussian-mixture domains with a common class geometry; the target
// applies the configured mean shift. Stand-in for backbone features.
struct SyntheticSpec {
  int classes = 3;
  int dim = 10;
  double separation = 4.0;
  double covariance_scale = 1.0;
  std::string shift_kind = "translation";  // translation | rotation | both
  double shift_magnitude = 6.0;
  int samples_per_class = 100;
  uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw ParamError("spec: classes must be >= 2");
    if (dim < 1) throw ParamError("spec: dim must be >= 1");
    if (samples_per_class < 2)
      throw ParamError("spec: samples_per_class must be >= 2");
    if (!(separation >= 0) || !(covariance_scale > 0))
      throw ParamError("spec: separation must be >= 0 and covariance_scale > 0");
    if (!std::isfinite(shift_magnitude))
      throw ParamError("spec: shift_magnitude must be finite");
    if (shift_kind != "translation" && shift_kind != "rotation" &&
        shift_kind != "both")
      throw ParamError("spec: shift_kind must be translation|rotation|both, got '" +
                       shift_kind + "'");
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"lambda3", c.lambda3},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"pretrain_epochs", c.pretrain_epochs},
              {"batch_source", c.batch_source},
              {"batch_target", c.batch_target},
              {"knn_k", c.knn_k},
              {"seed", c.seed},
              {"optimizer", c.optimizer},
              {"hidden_dim", c.hidden_dim},
              {"proj_dim", c.proj_dim},
              {"knn_refresh_epochs", c.knn_refresh_epochs},
              {"w2_lambda", c.w2_lambda}};
}

inline Json to_json(const SyntheticSpec& s) {
  return Json{{"classes", s.classes},
              {"dim", s.dim},
              {"separation", s.separation},
              {"covariance_scale", s.covariance_scale},
              {"shift_kind", s.shift_kind},
              {"shift_magnitude", s.shift_magnitude},
              {"samples_per_class", s.samples_per_class},
              {"seed", s.seed}};
}

namespace detail {
template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config field '") + key + "': " + e.what());
  }
}
}  // namespace detail

inline TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("train config must be a JSON object");
  TrainConfig c;
  detail::read_field(j, "lambda1", c.lambda1);
  detail::read_field(j, "lambda2", c.lambda2);
  detail::read_field(j, "lambda3", c.lambda3);
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "epochs", c.epochs);
  detail::read_field(j, "pretrain_epochs", c.pretrain_epochs);
  detail::read_field(j, "batch_source", c.batch_source);
  detail::read_field(j, "batch_target", c.batch_target);
  detail::read_field(j, "knn_k", c.knn_k);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "optimizer", c.optimizer);
  detail::read_field(j, "hidden_dim", c.hidden_dim);
  detail::read_field(j, "proj_dim", c.proj_dim);
  detail::read_field(j, "knn_refresh_epochs", c.knn_refresh_epochs);
  detail::read_field(j, "w2_lambda", c.w2_lambda);
  c.validate();
  return c;
}

inline SyntheticSpec synthetic_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("synthetic spec must be a JSON object");
  SyntheticSpec s;
  detail::read_field(j, "classes", s.classes);
  detail::read_field(j, "dim", s.dim);
  detail::read_field(j, "separation", s.separation);
  detail::read_field(j, "covariance_scale", s.covariance_scale);
  detail::read_field(j, "shift_kind", s.shift_kind);
  detail::read_field(j, "shift_magnitude", s.shift_magnitude);
  detail::read_field(j, "samples_per_class", s.samples_per_class);
  detail::read_field(j, "seed", s.seed);
  s.validate();
  return s;
}

// FNV-1a 64 over a canonical dump; identifies a spec in run manifests.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string spec_hash(const SyntheticSpec& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(s).dump())));
  return std::string(buf);
}

}  // namespace dot
