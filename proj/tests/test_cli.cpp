#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dot/config.hpp"
#include "dot/data.hpp"

namespace fs = std::filesystem;

namespace {
const std::string kCli = DOT_CLI_PATH;

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() /
           ("dot_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(root);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string path(const std::string& rel) const { return (root / rel).string(); }
};

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// tiny well-separated task so train runs in well under a second
std::string tiny_spec_json() {
  dot::SyntheticSpec spec;
  spec.classes = 2;
  spec.dim = 3;
  spec.separation = 6.0;
  spec.covariance_scale = 0.5;
  spec.shift_magnitude = 3.0;
  spec.samples_per_class = 12;
  return dot::to_json(spec).dump(2);
}

std::string tiny_config_json() {
  dot::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.pretrain_epochs = 40;
  cfg.hidden_dim = 8;
  cfg.proj_dim = 4;
  cfg.knn_k = 3;
  return dot::to_json(cfg).dump(2);
}
}  // namespace

TEST_CASE("synth is deterministic and loadable") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("a")) == 0);
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("b")) == 0);
  CHECK(read_text(ws.path("a/source.csv")) == read_text(ws.path("b/source.csv")));
  CHECK(read_text(ws.path("a/target.csv")) == read_text(ws.path("b/target.csv")));
  CHECK(read_text(ws.path("a/manifest.json")) == read_text(ws.path("b/manifest.json")));

  const dot::DomainDataset src = dot::load_features_csv(ws.path("a/source.csv"));
  CHECK(src.labeled());
  CHECK(src.size() == 24);

  // manifest hash moves with the spec
  auto spec_json = dot::Json::parse(tiny_spec_json());
  spec_json["shift_magnitude"] = 4.0;
  write_text(ws.path("spec2.json"), spec_json.dump(2));
  REQUIRE(run("synth --spec " + ws.path("spec2.json") + " --out " + ws.path("c")) == 0);
  const auto m1 = dot::Json::parse(read_text(ws.path("a/manifest.json")));
  const auto m2 = dot::Json::parse(read_text(ws.path("c/manifest.json")));
  CHECK(m1.at("spec_hash") != m2.at("spec_hash"));
}

TEST_CASE("train produces its declared artifacts deterministically") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  write_text(ws.path("config.json"), tiny_config_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("data")) == 0);

  const std::string common = " --source " + ws.path("data/source.csv") +
                             " --target " + ws.path("data/target.csv") +
                             " --config " + ws.path("config.json");
  REQUIRE(run("train" + common + " --out " + ws.path("run1")) == 0);
  for (const char* artifact :
       {"checkpoint.json", "metrics.csv", "attention_final.csv", "config.json",
        "run_manifest.json", "curve_w2.svg"})
    CHECK(fs::exists(ws.path("run1/") + artifact));
  CHECK(read_text(ws.path("run1/config.json")) == read_text(ws.path("config.json")));

  REQUIRE(run("train" + common + " --out " + ws.path("run2")) == 0);
  CHECK(read_text(ws.path("run1/metrics.csv")) == read_text(ws.path("run2/metrics.csv")));
  CHECK(read_text(ws.path("run1/checkpoint.json")) ==
        read_text(ws.path("run2/checkpoint.json")));

  // --seed override changes the run
  REQUIRE(run("train" + common + " --seed 5 --out " + ws.path("run3")) == 0);
  CHECK(read_text(ws.path("run1/metrics.csv")) != read_text(ws.path("run3/metrics.csv")));

  // --epochs 0 equals the pretrain+copy state: source and target nets agree
  REQUIRE(run("train" + common + " --epochs 0 --out " + ws.path("run0")) == 0);
  const auto ckpt = dot::Json::parse(read_text(ws.path("run0/checkpoint.json")));
  CHECK(ckpt.at("params").at("source_net") == ckpt.at("params").at("target_net"));
}

TEST_CASE("eval cross-checks accuracy and handles unlabeled targets") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  write_text(ws.path("config.json"), tiny_config_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("data")) == 0);
  REQUIRE(run("train --source " + ws.path("data/source.csv") + " --target " +
              ws.path("data/target.csv") + " --config " + ws.path("config.json") +
              " --out " + ws.path("run")) == 0);

  REQUIRE(run("eval --checkpoint " + ws.path("run/checkpoint.json") +
              " --target " + ws.path("data/target.csv") + " --out " +
              ws.path("eval1")) == 0);
  REQUIRE(fs::exists(ws.path("eval1/predictions.csv")));
  REQUIRE(fs::exists(ws.path("eval1/eval.json")));

  // recompute accuracy from predictions.csv
  std::ifstream pred(ws.path("eval1/predictions.csv"));
  std::string line;
  std::getline(pred, line);
  CHECK(line.substr(0, 10) == "pred,label");
  const dot::DomainDataset target = dot::load_features_csv(ws.path("data/target.csv"));
  int hits = 0, total = 0;
  while (std::getline(pred, line)) {
    const auto cells = dot::split_csv_line(line);
    hits += cells[0] == cells[1];
    ++total;
  }
  REQUIRE(total == target.size());
  const auto ej = dot::Json::parse(read_text(ws.path("eval1/eval.json")));
  CHECK(ej.at("accuracy").get<double>() ==
        Catch::Approx(static_cast<double>(hits) / total).margin(1e-12));

  // unlabeled target: no accuracy artifact, no label column
  {
    dot::DomainDataset unl = target;
    unl.labels.clear();
    dot::save_features_csv(unl, ws.path("unlabeled.csv"));
  }
  REQUIRE(run("eval --checkpoint " + ws.path("run/checkpoint.json") +
              " --target " + ws.path("unlabeled.csv") + " --out " +
              ws.path("eval2")) == 0);
  CHECK_FALSE(fs::exists(ws.path("eval2/eval.json")));
  std::ifstream pred2(ws.path("eval2/predictions.csv"));
  std::getline(pred2, line);
  CHECK(line.substr(0, 7) == "pred,p0");
}

TEST_CASE("compare-ot emits a ladder with the canonical row flagged") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  write_text(ws.path("config.json"), tiny_config_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("data")) == 0);
  REQUIRE(run("train --source " + ws.path("data/source.csv") + " --target " +
              ws.path("data/target.csv") + " --config " + ws.path("config.json") +
              " --out " + ws.path("run")) == 0);

  // proj_dim = 4 so the canonical lambda is 2 * sqrt(4) = 4
  REQUIRE(run("compare-ot --checkpoint " + ws.path("run/checkpoint.json") +
              " --source " + ws.path("data/source.csv") + " --target " +
              ws.path("data/target.csv") + " --lambdas 0.5,4,20 --out " +
              ws.path("cmp")) == 0);
  std::ifstream csv(ws.path("cmp/consistency.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.find("lambda,canonical") == 0);
  int canonical_rows = 0, rows = 0;
  while (std::getline(csv, line)) {
    const auto cells = dot::split_csv_line(line);
    ++rows;
    if (cells[1] == "1") {
      ++canonical_rows;
      CHECK(cells[0] == "4");
    }
    // every row computed the identity check (a) to near zero
    CHECK(std::stod(cells[2]) < 1e-12);
    CHECK(std::stod(cells[6]) >= std::stod(cells[7]));  // sparsity order
  }
  CHECK(rows == 3);
  CHECK(canonical_rows == 1);
}

TEST_CASE("compare-ot on single-sample domains degenerates to zeros") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  write_text(ws.path("config.json"), tiny_config_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("data")) == 0);
  REQUIRE(run("train --source " + ws.path("data/source.csv") + " --target " +
              ws.path("data/target.csv") + " --config " + ws.path("config.json") +
              " --out " + ws.path("run")) == 0);

  // single-row files with matching width
  const dot::DomainDataset src = dot::load_features_csv(ws.path("data/source.csv"));
  dot::DomainDataset one;
  one.features = dot::take_rows(src.features, {0});
  one.labels = {src.labels[0]};
  one.num_classes = 2;
  dot::save_features_csv(one, ws.path("one.csv"));

  REQUIRE(run("compare-ot --checkpoint " + ws.path("run/checkpoint.json") +
              " --source " + ws.path("one.csv") + " --target " + ws.path("one.csv") +
              " --lambdas 1 --out " + ws.path("cmp1")) == 0);
  std::ifstream csv(ws.path("cmp1/consistency.csv"));
  std::string line;
  std::getline(csv, line);
  REQUIRE(std::getline(csv, line));
  const auto cells = dot::split_csv_line(line);
  CHECK(std::stod(cells[2]) == 0.0);
  CHECK(std::stod(cells[3]) < 1e-9);
}

TEST_CASE("exit statuses follow the usage/data/numeric contract") {
  Workspace ws;
  write_text(ws.path("spec.json"), tiny_spec_json());
  write_text(ws.path("config.json"), tiny_config_json());
  REQUIRE(run("synth --spec " + ws.path("spec.json") + " --out " + ws.path("data")) == 0);

  // usage errors
  CHECK(run("") == 1);
  CHECK(run("synth --out " + ws.path("x")) == 1);
  CHECK(run("nonsense") == 1);
  write_text(ws.path("bad.json"), "{not json");
  CHECK(run("synth --spec " + ws.path("bad.json") + " --out " + ws.path("x")) == 1);
  write_text(ws.path("badcfg.json"), "{\"learning_rate\": -1}");
  CHECK(run("train --source " + ws.path("data/source.csv") + " --target " +
            ws.path("data/target.csv") + " --config " + ws.path("badcfg.json") +
            " --out " + ws.path("x")) == 1);

  // data/schema errors
  write_text(ws.path("ragged.csv"), "f0,f1,label\n1,2,0\n3\n");
  CHECK(run("train --source " + ws.path("ragged.csv") + " --target " +
            ws.path("data/target.csv") + " --config " + ws.path("config.json") +
            " --out " + ws.path("x")) == 2);
  write_text(ws.path("badckpt.json"), "{\"version\": 1}");
  CHECK(run("eval --checkpoint " + ws.path("badckpt.json") + " --target " +
            ws.path("data/target.csv") + " --out " + ws.path("x")) == 2);
}
