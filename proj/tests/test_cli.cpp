#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logora/data.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(LOGORA_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

const char* kTinyConfig =
    "d_model = 8\n"
    "transformer_layers = 1\n"
    "transformer_heads = 2\n"
    "d_emb = 8\n"
    "d_k = 8\n"
    "d_v = 8\n"
    "discriminator_hidden = 8\n"
    "epochs = 2\n"
    "batch_size = 12\n"
    "learning_rate = 0.003\n"
    "lambda_domain = 0.01\n"
    "lambda_margin = 0.01\n"
    "lambda_dtw = 0.01\n"
    "lambda_center = 0.001\n";

// One shared synthetic triple and a trained run, built on first use.
struct Fixture {
  fs::path root = logora::testing::scratch_dir("cli");
  Run synth, train;

  Fixture() {
    std::ofstream(root / "tiny.cfg") << kTinyConfig;
    synth = run("synth --out " + (root / "data").string() + " --samples-per-class 6 --seed 3");
    train = run("train --config " + (root / "tiny.cfg").string() + " --source " + (root / "data/source").string() +
                " --target " + (root / "data/target").string() + " --eval " + (root / "data/target_test").string() +
                " --out " + (root / "run").string() + " --seed 7");
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("synth writes three datasets") {
  auto& f = fixture();
  REQUIRE(f.synth.code == 0);
  const json info = json::parse(f.synth.out);
  CHECK(info["template_oracle_source_accuracy"].get<double>() >= 0.95);
  for (const char* name : {"source", "target", "target_test"})
    CHECK(logora::load_dataset(f.root / "data" / name).size() == 36);
}

TEST_CASE("train writes metrics, checkpoints and a summary") {
  auto& f = fixture();
  REQUIRE(f.train.code == 0);
  const auto metric_lines = lines(slurp(f.root / "run/metrics.ndjson"));
  REQUIRE(metric_lines.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    const json m = json::parse(metric_lines[e]);
    CHECK(m["epoch"] == e + 1);
    for (const char* key : {"loss_cls", "loss_domain", "loss_margin", "loss_dtw", "loss_center", "target_accuracy"})
      CHECK_MESSAGE(m.contains(key), key);
  }
  CHECK(fs::exists(f.root / "run/checkpoints/epoch_001.lgra"));
  CHECK(fs::exists(f.root / "run/checkpoints/epoch_002.lgra"));
  CHECK(fs::exists(f.root / "run/model.lgra"));
  CHECK(fs::exists(f.root / "run/config.cfg"));
  const json summary = json::parse(slurp(f.root / "run/summary.json"));
  CHECK(json::parse(f.train.out) == summary);
  CHECK(summary["seed"] == 7);
}

TEST_CASE("same seed gives the same summary and metrics") {
  auto& f = fixture();
  const Run again = run("train --config " + (f.root / "run/config.cfg").string() + " --eval " +
                        (f.root / "data/target_test").string() + " --out " + (f.root / "run2").string() +
                        " --no-checkpoints");
  REQUIRE(again.code == 0);
  CHECK(slurp(f.root / "run2/summary.json") == slurp(f.root / "run/summary.json"));
  CHECK(slurp(f.root / "run2/metrics.ndjson") == slurp(f.root / "run/metrics.ndjson"));
  CHECK_FALSE(fs::exists(f.root / "run2/checkpoints"));
}

TEST_CASE("eval reproduces the summary accuracy") {
  auto& f = fixture();
  const Run ev = run("eval --checkpoint " + (f.root / "run/model.lgra").string() + " --data " +
                     (f.root / "data/target_test").string());
  REQUIRE(ev.code == 0);
  const json result = json::parse(ev.out);
  const json summary = json::parse(slurp(f.root / "run/summary.json"));
  CHECK(std::abs(result["accuracy"].get<double>() - summary["target_test_accuracy"].get<double>()) < 1e-12);
  CHECK(result["total"] == 36);

  const Run shifted = run("eval --checkpoint " + (f.root / "run/model.lgra").string() + " --data " +
                          (f.root / "data/target_test").string() + " --shift -16");
  CHECK(shifted.code == 0);
}

TEST_CASE("export-attention writes normalized maps") {
  auto& f = fixture();
  const Run ex = run("export-attention --checkpoint " + (f.root / "run/model.lgra").string() + " --data " +
                     (f.root / "data/target_test").string() + " --sample-index 4 --out " +
                     (f.root / "attn").string());
  REQUIRE(ex.code == 0);
  for (int k : {4, 8, 16}) {
    const auto rows = lines(slurp(f.root / "attn" / ("attention_k" + std::to_string(k) + ".csv")));
    REQUIRE(rows.size() == 15);
    for (const auto& row : rows) {
      double sum = 0.0;
      std::size_t cols = 0;
      std::istringstream in(row);
      for (std::string cell; std::getline(in, cell, ',');) {
        sum += std::stod(cell);
        ++cols;
      }
      CHECK(cols == 128 - 3 * (k - 1));
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  const auto means = lines(slurp(f.root / "attn/attention_means.csv"));
  CHECK(means.front() == "kernel,position,mean_weight");
  const Run out_of_range = run("export-attention --checkpoint " + (f.root / "run/model.lgra").string() + " --data " +
                               (f.root / "data/target_test").string() + " --sample-index 36 --out " +
                               (f.root / "attn2").string());
  CHECK(out_of_range.code == 3);
}

TEST_CASE("exit codes") {
  auto& f = fixture();
  const std::string ckpt = (f.root / "run/model.lgra").string();

  std::ofstream(f.root / "bad.cfg") << "epochs = two\n";
  CHECK(run("train --config " + (f.root / "bad.cfg").string() + " --source " + (f.root / "data/source").string() +
            " --target " + (f.root / "data/target").string() + " --out " + (f.root / "bad").string())
            .code == 2);
  CHECK(run("train --config " + (f.root / "tiny.cfg").string() + " --source " + (f.root / "nowhere").string() +
            " --target " + (f.root / "data/target").string() + " --out " + (f.root / "bad").string())
            .code == 3);
  CHECK(run("train --config " + (f.root / "tiny.cfg").string() + " --source " + (f.root / "data/source").string() +
            " --target " + (f.root / "data/target").string() + " --out " + (f.root / "bad").string() +
            " --ablate cls")
            .code == 2);

  std::ofstream(f.root / "garbage.lgra") << "not a checkpoint";
  CHECK(run("eval --checkpoint " + (f.root / "garbage.lgra").string() + " --data " +
            (f.root / "data/target_test").string())
            .code == 2);

  // Strip the labels from a copy of the test set.
  auto ds = logora::load_dataset(f.root / "data/target_test");
  auto samples = ds.samples();
  for (auto& s : samples) s.label = logora::kUnlabeled;
  logora::save_dataset(logora::Dataset(ds.meta(), samples), f.root / "unlabeled");
  CHECK(run("eval --checkpoint " + ckpt + " --data " + (f.root / "unlabeled").string()).code == 3);

  CHECK(run("no-such-command").code == 2);
  CHECK(run("--help").code == 0);
}
