#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

#ifndef RWCE_CLI_PATH
#error "RWCE_CLI_PATH must point at the cli binary"
#endif

std::string cli() { return RWCE_CLI_PATH; }

int run(const std::string& args, const fs::path& stderr_to = {}) {
  std::string cmd = cli() + " " + args + " >/dev/null";
  if (stderr_to.empty()) {
    cmd += " 2>/dev/null";
  } else {
    cmd += " 2>" + stderr_to.string();
  }
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

long count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  long n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("rwce_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  fs::path file(const std::string& name, const std::string& content) const {
    const fs::path path = root / name;
    std::ofstream(path) << content;
    return path;
  }
  fs::path sub(const std::string& name) const { return root / name; }
};

const char* kGenSpec = R"({
  "num_classes": 6, "feature_dim": 8, "separation": 2.4, "noise_scale": 1.0,
  "counts": {"train": 600, "val": 100, "cal": 200, "test": 300}, "seed": 7
})";

const char* kTrainConfig = R"({
  "loss": "rwce", "batch_size": 64, "epochs": 4, "alpha": 0.1,
  "optimizer": {"learning_rate": 0.1, "momentum": 0.9, "weight_decay": 0.0005,
                "milestones": [3], "gamma": 0.1},
  "seeds": {"init": 1, "shuffle": 2, "tie_break": 3},
  "architecture": {"hidden": [32]}, "temperature": 1.0,
  "score": {"kind": "hps"}
})";

}  // namespace

TEST_CASE("gen-data writes the configured number of rows and is reproducible") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  CHECK(run("gen-data --config " + spec.string() + " --out " + ws.sub("d1").string()) == 0);
  CHECK(count_lines(ws.sub("d1") / "dataset.csv") == 1 + 600 + 100 + 200 + 300);
  CHECK(fs::exists(ws.sub("d1") / "manifest.json"));

  CHECK(run("gen-data --config " + spec.string() + " --out " + ws.sub("d2").string()) == 0);
  CHECK(slurp(ws.sub("d1") / "dataset.csv") == slurp(ws.sub("d2") / "dataset.csv"));
}

TEST_CASE("gen-data reports a missing seed as a config error") {
  Workspace ws;
  const fs::path spec = ws.file("bad.json", R"({
    "num_classes": 6, "feature_dim": 8, "separation": 2.4,
    "counts": {"train": 10, "val": 10, "cal": 10, "test": 10}
  })");
  const fs::path err = ws.sub("stderr.txt");
  CHECK(run("gen-data --config " + spec.string() + " --out " + ws.sub("x").string(), err) == 2);
  CHECK(slurp(err).find("config: missing field seed") != std::string::npos);
}

TEST_CASE("dry runs validate without touching the filesystem") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  CHECK(run("gen-data --config " + spec.string() + " --out " + ws.sub("never").string() +
            " --dry-run") == 0);
  CHECK_FALSE(fs::exists(ws.sub("never")));
}

TEST_CASE("train, calibrate-eval, and verify complete against a generated dataset") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  const fs::path config = ws.file("train.json", kTrainConfig);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);
  REQUIRE(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("run").string()) == 0);

  // trace.csv has one row per epoch plus the header.
  CHECK(count_lines(ws.sub("run") / "trace.csv") == 1 + 4);
  CHECK(fs::exists(ws.sub("run") / "checkpoints" / "epoch_0004.model"));
  CHECK(fs::exists(ws.sub("run") / "manifest.json"));

  CHECK(run("calibrate-eval --run " + ws.sub("run").string() + " --data " +
            ws.sub("data").string() + " --out " + ws.sub("eval").string()) == 0);
  const std::string metrics = slurp(ws.sub("eval") / "metrics.json");
  CHECK(metrics.find("\"apss\"") != std::string::npos);
  CHECK(metrics.find("\"coverage\"") != std::string::npos);
  CHECK(fs::exists(ws.sub("eval") / "predictor_hps.json"));
  CHECK(fs::exists(ws.sub("eval") / "prediction_sets_hps.csv"));

  CHECK(run("calibrate-eval --run " + ws.sub("run").string() + " --data " +
            ws.sub("data").string() + " --out " + ws.sub("eval_all").string() +
            " --all-scores") == 0);
  const std::string all = slurp(ws.sub("eval_all") / "metrics.json");
  for (const char* kind : {"\"hps\"", "\"aps\"", "\"raps\"", "\"saps\""})
    CHECK(all.find(kind) != std::string::npos);

  CHECK(run("verify --run " + ws.sub("run").string() + " --data " + ws.sub("data").string()) ==
        0);
  CHECK(fs::exists(ws.sub("run") / "verify" / "ledger.csv"));

  // Reruns into fresh directories are byte-identical on the data products.
  REQUIRE(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("run2").string()) == 0);
  CHECK(slurp(ws.sub("run") / "trace.csv") == slurp(ws.sub("run2") / "trace.csv"));
  CHECK(slurp(ws.sub("run") / "ledger.csv") == slurp(ws.sub("run2") / "ledger.csv"));
  CHECK(run("calibrate-eval --run " + ws.sub("run2").string() + " --data " +
            ws.sub("data").string() + " --out " + ws.sub("eval2").string()) == 0);
  CHECK(slurp(ws.sub("eval") / "metrics.json") == slurp(ws.sub("eval2") / "metrics.json"));
}

TEST_CASE("calibrate-eval validates alpha and artifacts") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  const fs::path config = ws.file("train.json", kTrainConfig);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);
  REQUIRE(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("run").string()) == 0);

  CHECK(run("calibrate-eval --run " + ws.sub("run").string() + " --data " +
            ws.sub("data").string() + " --out " + ws.sub("x").string() + " --alpha 1.5") == 2);

  // Removing the final checkpoint is a missing-artifact failure.
  fs::remove(ws.sub("run") / "checkpoints" / "epoch_0004.model");
  CHECK(run("calibrate-eval --run " + ws.sub("run").string() + " --data " +
            ws.sub("data").string() + " --out " + ws.sub("y").string()) == 4);
}

TEST_CASE("train rejects a conftr config with batch size 1") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);
  const fs::path config = ws.file("bad.json", R"({
    "loss": "conftr", "batch_size": 1, "epochs": 2, "alpha": 0.1,
    "optimizer": {"learning_rate": 0.1},
    "seeds": {"init": 1, "shuffle": 2, "tie_break": 3}
  })");
  CHECK(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
            " --out " + ws.sub("run").string()) == 2);
}

TEST_CASE("verify flags corrupted ledgers with exit 5") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  const fs::path config = ws.file("train.json", kTrainConfig);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);
  REQUIRE(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("run").string()) == 0);

  // Flip one thm2_margin to -0.01 in the recorded ledger.
  const fs::path ledger = ws.sub("run") / "ledger.csv";
  std::ifstream in(ledger);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  in.close();
  REQUIRE(!rows.empty());
  std::vector<std::string> fields;
  std::stringstream ss(rows[1]);
  while (std::getline(ss, line, ',')) fields.push_back(line);
  fields[10] = "-0.01";  // thm2_margin column
  std::ostringstream rebuilt;
  for (std::size_t i = 0; i < fields.size(); ++i) rebuilt << (i ? "," : "") << fields[i];
  rows[1] = rebuilt.str();
  std::ofstream out(ledger, std::ios::trunc);
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  out.close();

  const fs::path err = ws.sub("stderr.txt");
  CHECK(run("verify --run " + ws.sub("run").string() + " --data " + ws.sub("data").string(),
            err) == 5);
  const std::string message = slurp(err);
  CHECK(message.find("theorem2 epoch=2") != std::string::npos);
  CHECK(message.find("margin=-0.01") != std::string::npos);
}

TEST_CASE("verify without checkpoints is a missing artifact") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  const fs::path config = ws.file("train.json", kTrainConfig);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);
  REQUIRE(run("train --config " + config.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("run").string()) == 0);
  fs::remove_all(ws.sub("run") / "checkpoints");
  CHECK(run("verify --run " + ws.sub("run").string() + " --data " + ws.sub("data").string()) ==
        4);
}

TEST_CASE("sweep emits run and aggregate rows and isolates failing cells") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  REQUIRE(run("gen-data --config " + spec.string() + " --out " + ws.sub("data").string()) == 0);

  const fs::path sweep = ws.file("sweep.json", R"({
    "base": {
      "loss": "ce", "batch_size": 64, "epochs": 3, "alpha": 0.1,
      "optimizer": {"learning_rate": 0.1, "momentum": 0.9},
      "seeds": {"init": 1, "shuffle": 2, "tie_break": 3}
    },
    "methods": ["ce", "rwce"], "scores": ["hps", "aps"], "n_seeds": 3
  })");
  REQUIRE(run("sweep --config " + sweep.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("s1").string()) == 0);
  // 12 run rows + 4 aggregate rows + header.
  CHECK(count_lines(ws.sub("s1") / "comparison.csv") == 1 + 12 + 4);

  REQUIRE(run("sweep --config " + sweep.string() + " --data " + ws.sub("data").string() +
              " --out " + ws.sub("s2").string()) == 0);
  CHECK(slurp(ws.sub("s1") / "comparison.csv") == slurp(ws.sub("s2") / "comparison.csv"));
  CHECK(slurp(ws.sub("s1") / "comparison.json") == slurp(ws.sub("s2") / "comparison.json"));

  // A method whose config cannot validate fails alone; the sweep still
  // completes the other cells and signals partial failure.
  const fs::path partial = ws.file("partial.json", R"({
    "base": {
      "loss": "ce", "batch_size": 1, "epochs": 2, "alpha": 0.1,
      "optimizer": {"learning_rate": 0.05},
      "seeds": {"init": 1, "shuffle": 2, "tie_break": 3}
    },
    "methods": ["ce", "conftr"], "scores": ["hps"], "n_seeds": 1
  })");
  CHECK(run("sweep --config " + partial.string() + " --data " + ws.sub("data").string() +
            " --out " + ws.sub("s3").string()) == 1);
  const std::string report = slurp(ws.sub("s3") / "comparison.json");
  CHECK(report.find("\"failed\"") != std::string::npos);
  CHECK(report.find("\"ok\"") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommands exit with the config code") {
  CHECK(run("no-such-command") == 2);
  CHECK(run("train --config missing.json") == 2);  // missing required flags
}

TEST_CASE("RWCE_OUT_ROOT reroots relative output directories") {
  Workspace ws;
  const fs::path spec = ws.file("gen.json", kGenSpec);
  const fs::path rooted = ws.sub("rooted");
  fs::create_directories(rooted);
  const std::string cmd = "RWCE_OUT_ROOT=" + rooted.string() + " " + cli() + " gen-data --config " +
                          spec.string() + " --out data >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(rooted / "data" / "dataset.csv"));
}
