// Batch-experiment harness: synthesize shifted domains, train the
// domain-transformer, evaluate checkpoints, and compare attention maps
// against entropic transport plans.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dot/dot.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CliFailure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& msg) {
  throw CliFailure{code, msg};
}

int classify(const dot::Error& e) {
  switch (e.kind()) {
    case dot::ErrorKind::Param:
      return kExitUsage;
    case dot::ErrorKind::Numeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kExitUsage, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(kExitData, "cannot open for writing: " + path);
  out << content;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(kExitData, "cannot create directory " + dir + ": " + ec.message());
}

dot::Json parse_json_or_usage(const std::string& text, const std::string& what) {
  try {
    return dot::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(kExitUsage, what + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec_path, out_dir;
};

int cmd_synth(const SynthArgs& a) {
  dot::SyntheticSpec spec;
  try {
    spec = dot::synthetic_spec_from_json(
        parse_json_or_usage(read_file(a.spec_path), a.spec_path));
  } catch (const dot::Error& e) {
    fail(kExitUsage, std::string("spec: ") + e.what());
  }
  ensure_dir(a.out_dir);
  auto [source, target] = dot::synth_shifted_gaussians(spec);
  dot::save_features_csv(source, a.out_dir + "/source.csv");
  dot::save_features_csv(target, a.out_dir + "/target.csv");

  dot::Json manifest{{"seed", spec.seed},
                     {"spec_hash", dot::spec_hash(spec)},
                     {"spec", dot::to_json(spec)},
                     {"files", {"source.csv", "target.csv"}},
                     {"samples_per_domain", source.size()}};
  write_file(a.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::printf("synth: wrote %d+%d samples to %s (spec %s)\n", source.size(),
              target.size(), a.out_dir.c_str(), dot::spec_hash(spec).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string source_path, target_path, config_path, out_dir;
  std::optional<int> epochs;
  std::optional<uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  const std::string config_text = read_file(a.config_path);
  dot::TrainConfig cfg;
  try {
    cfg = dot::train_config_from_json(
        parse_json_or_usage(config_text, a.config_path));
  } catch (const dot::Error& e) {
    fail(kExitUsage, std::string("config: ") + e.what());
  }
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (cfg.epochs < 0) fail(kExitUsage, "--epochs must be >= 0");

  dot::DomainDataset source = dot::load_features_csv(a.source_path);
  dot::DomainDataset target = dot::load_features_csv(a.target_path);
  source.tag = dot::DomainTag::Source;
  target.tag = dot::DomainTag::Target;
  if (!source.labeled())
    throw dot::InputError("train: source file carries no labels");

  ensure_dir(a.out_dir);
  write_file(a.out_dir + "/config.json", config_text);

  dot::TrainResult result = dot::train(source, target, cfg);

  dot::save_checkpoint(result.params, cfg, a.out_dir + "/checkpoint.json");
  dot::export_curves(result.log, a.out_dir);
  {
    const dot::FeatureMatrix fs =
        dot::project(result.params.source_net, source.features);
    const dot::FeatureMatrix ft =
        dot::project(result.params.target_net, target.features);
    dot::export_heatmap_csv(dot::attention_map(fs, ft).matrix,
                            a.out_dir + "/attention_final.csv");
  }
  dot::Json manifest{{"source", a.source_path},
                     {"target", a.target_path},
                     {"config", a.config_path},
                     {"epochs", cfg.epochs},
                     {"seed", cfg.seed},
                     {"effective_config", dot::to_json(cfg)},
                     {"notes", result.log.notes}};
  write_file(a.out_dir + "/run_manifest.json", manifest.dump(2) + "\n");

  const auto& last = result.log.records.back();
  std::printf("train: %d epochs done; source_acc=%.4f", cfg.epochs,
              last.source_acc);
  if (last.target_acc) std::printf(" target_acc=%.4f", *last.target_acc);
  std::printf(" w2=%.6g\n", last.w2);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint_path, target_path, out_dir;
};

int cmd_eval(const EvalArgs& a) {
  auto [params, cfg] = dot::load_checkpoint(a.checkpoint_path);
  dot::DomainDataset target = dot::load_features_csv(a.target_path);
  const dot::Prediction pred = dot::predict(params, target.features);

  ensure_dir(a.out_dir);
  {
    FILE* f = std::fopen((a.out_dir + "/predictions.csv").c_str(), "wb");
    if (!f) fail(kExitData, "cannot open for writing: " + a.out_dir + "/predictions.csv");
    std::fprintf(f, "pred");
    if (target.labeled()) std::fprintf(f, ",label");
    for (int k = 0; k < pred.probabilities.cols(); ++k) std::fprintf(f, ",p%d", k);
    std::fprintf(f, "\n");
    for (int i = 0; i < pred.probabilities.rows(); ++i) {
      std::fprintf(f, "%d", pred.labels[i]);
      if (target.labeled()) std::fprintf(f, ",%d", target.labels[i]);
      for (int k = 0; k < pred.probabilities.cols(); ++k)
        std::fprintf(f, ",%.17g", pred.probabilities(i, k));
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }

  if (target.labeled()) {
    const double acc = dot::accuracy(pred.labels, target.labels);
    write_file(a.out_dir + "/eval.json",
               dot::Json{{"accuracy", acc}, {"samples", target.size()}}.dump(2) + "\n");
    std::printf("eval: %d samples, accuracy=%.4f\n", target.size(), acc);
  } else {
    std::printf("eval: %d samples (unlabeled)\n", target.size());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  std::string checkpoint_path, source_path, target_path, out_dir;
  std::string lambdas;
};

int cmd_compare_ot(const CompareArgs& a) {
  auto [params, cfg] = dot::load_checkpoint(a.checkpoint_path);
  dot::DomainDataset source = dot::load_features_csv(a.source_path);
  dot::DomainDataset target = dot::load_features_csv(a.target_path);

  std::vector<double> lambdas;
  {
    std::stringstream ss(a.lambdas);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size() || v <= 0.0) throw std::invalid_argument(tok);
        lambdas.push_back(v);
      } catch (...) {
        fail(kExitUsage, "--lambdas: bad value '" + tok + "'");
      }
    }
    if (lambdas.empty()) fail(kExitUsage, "--lambdas: empty list");
  }

  const dot::FeatureMatrix fs = dot::project(params.source_net, source.features);
  const dot::FeatureMatrix ft = dot::project(params.target_net, target.features);
  const dot::AttentionMap att = dot::attention_map(fs, ft);
  const double canonical = 2.0 * std::sqrt(static_cast<double>(fs.cols()));

  ensure_dir(a.out_dir);
  FILE* f = std::fopen((a.out_dir + "/consistency.csv").c_str(), "wb");
  if (!f) fail(kExitData, "cannot open for writing: " + a.out_dir + "/consistency.csv");
  std::fprintf(f,
               "lambda,canonical,rownorm_max_discrepancy,plan_max_diff,"
               "mean_row_cosine,min_row_cosine,sparsity_plan,"
               "sparsity_attention,converged,iterations,error\n");
  for (const double lambda : lambdas) {
    const bool is_canonical = std::abs(lambda - canonical) <= 1e-9 * canonical;
    try {
      const dot::ConsistencyReport rep =
          dot::attention_ot_consistency(att, fs, ft, lambda);
      std::fprintf(f, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,\n",
                   lambda, is_canonical ? 1 : 0, rep.rownorm_max_discrepancy,
                   rep.plan_max_diff, rep.mean_row_cosine, rep.min_row_cosine,
                   rep.sparsity_plan, rep.sparsity_attention,
                   rep.sinkhorn_converged ? 1 : 0, rep.sinkhorn_iterations);
    } catch (const dot::Error& e) {
      std::fprintf(f, "%.17g,%d,,,,,,,,,\"%s\"\n", lambda, is_canonical ? 1 : 0,
                   e.what());
    }
  }
  std::fclose(f);
  std::printf("compare-ot: %zu lambdas (canonical 2*sqrt(d2)=%.6g) -> %s\n",
              lambdas.size(), canonical, (a.out_dir + "/consistency.csv").c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-transformer experiment harness"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate shifted Gaussian domains");
  synth->add_option("--spec", synth_args.spec_path, "synthetic spec JSON")->required();
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run the full training procedure");
  train->add_option("--source", train_args.source_path, "labeled source CSV")->required();
  train->add_option("--target", train_args.target_path, "target CSV")->required();
  train->add_option("--config", train_args.config_path, "train config JSON")->required();
  train->add_option("--out", train_args.out_dir, "run directory")->required();
  int epochs_flag = -1;
  uint64_t seed_flag = 0;
  auto* eopt = train->add_option("--epochs", epochs_flag, "override epochs");
  auto* sopt = train->add_option("--seed", seed_flag, "override seed");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "predict with a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint JSON")->required();
  eval->add_option("--target", eval_args.target_path, "target CSV")->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();

  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare-ot", "attention vs transport plans");
  cmp->add_option("--checkpoint", cmp_args.checkpoint_path, "checkpoint JSON")->required();
  cmp->add_option("--source", cmp_args.source_path, "source CSV")->required();
  cmp->add_option("--target", cmp_args.target_path, "target CSV")->required();
  cmp->add_option("--lambdas", cmp_args.lambdas, "comma list of lambda values")->required();
  cmp->add_option("--out", cmp_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) {
      if (*eopt) train_args.epochs = epochs_flag;
      if (*sopt) train_args.seed = seed_flag;
      return cmd_train(train_args);
    }
    if (eval->parsed()) return cmd_eval(eval_args);
    if (cmp->parsed()) return cmd_compare_ot(cmp_args);
  } catch (const CliFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const dot::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
