#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "srlf_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string command = std::string(SRLF_CLI_PATH) + " " + args + " > " + (workdir() / "stdout.txt").string() +
                              " 2> " + (workdir() / "stderr.txt").string();
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir(const std::string& name) { return (workdir() / name).string(); }

const std::string kSmall = " --preset tiny --set synth_threads=40 --set epochs=2";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth output is byte-identical across runs and the manifest counts match") {
    REQUIRE(run("synth" + kSmall + " --out " + dir("s1")) == 0);
    REQUIRE(run("synth" + kSmall + " --out " + dir("s2")) == 0);
    CHECK(slurp(dir("s1") + "/threads.jsonl") == slurp(dir("s2") + "/threads.jsonl"));
    CHECK(slurp(dir("s1") + "/manifest.json") != "");
    const auto manifest = nlohmann::json::parse(slurp(dir("s1") + "/manifest.json"));
    CHECK(manifest["threads"] == 40);
    CHECK(manifest["comments"] == 120);
    long labels = 0;
    for (auto& [k, v] : manifest["labels"].items()) labels += v.get<long>();
    CHECK(labels == 40);

    REQUIRE(run("synth" + kSmall + " --set synth_noise=0 --out " + dir("s0")) == 0);
    CHECK(nlohmann::json::parse(slurp(dir("s0") + "/manifest.json"))["corrupted_count"] == 0);
  }

  TEST_CASE("gradcheck passes clean and fails with an injected fault") {
    CHECK(run("gradcheck --out " + dir("g")) == 0);
    CHECK(slurp(workdir() / "stdout.txt").find("PASS") != std::string::npos);
    CHECK(run("gradcheck --inject-fault relu --out " + dir("g")) == 2);
    CHECK(run("gradcheck --inject-fault nosuchop --out " + dir("g")) == 1);
    CHECK(run("gradcheck --set d=48 --out " + dir("g")) == 1);
  }

  TEST_CASE("train is deterministic and eval reproduces the selected epoch") {
    REQUIRE(run("synth" + kSmall + " --out " + dir("data")) == 0);
    const std::string data = " --data " + dir("data") + "/threads.jsonl";
    REQUIRE(run("train" + kSmall + data + " --out " + dir("t1")) == 0);
    REQUIRE(run("train" + kSmall + data + " --out " + dir("t2")) == 0);
    CHECK(slurp(dir("t1") + "/checkpoint.bin") == slurp(dir("t2") + "/checkpoint.bin"));
    CHECK(slurp(dir("t1") + "/history.jsonl") == slurp(dir("t2") + "/history.jsonl"));

    std::istringstream history(slurp(dir("t1") + "/history.jsonl"));
    std::string line;
    std::getline(history, line);
    CHECK(nlohmann::json::parse(line).contains("config"));
    double best = -1.0;
    int records = 0;
    while (std::getline(history, line)) {
      auto r = nlohmann::json::parse(line);
      ++records;
      for (const char* key : {"epoch", "split", "loss", "accuracy", "f1_nr", "f1_fr", "f1_tr", "f1_ur", "macro_f1"}) {
        CHECK(r.contains(key));
      }
      if (r["split"] == "val") best = std::max(best, r["accuracy"].get<double>());
    }
    CHECK(records == 4);

    REQUIRE(run("eval --checkpoint " + dir("t1") + "/checkpoint.bin --split val --out " + dir("t1")) == 0);
    const auto metrics = nlohmann::json::parse(slurp(dir("t1") + "/metrics_val.json"));
    CHECK(metrics["accuracy"].get<double>() == best);
    CHECK(metrics["confusion"].size() == 4);

    REQUIRE(run("audit --checkpoint " + dir("t1") + "/checkpoint.bin --out " + dir("t1")) == 0);
    const auto audit = nlohmann::json::parse(slurp(dir("t1") + "/audit.json"));
    CHECK(audit.contains("gap"));
  }

  TEST_CASE("eval on an empty split is an error") {
    REQUIRE(run("synth --preset tiny --out " + dir("e")) == 0);
    const std::string data = " --data " + dir("e") + "/threads.jsonl";
    REQUIRE(run("train --preset tiny --set epochs=0 --set batch_size=2" + data + " --out " + dir("e")) == 0);
    // Eight threads leave no room for a validation split.
    CHECK(run("eval --checkpoint " + dir("e") + "/checkpoint.bin --split val --out " + dir("e")) == 1);
    CHECK(slurp(workdir() / "stderr.txt").find("empty") != std::string::npos);
  }

  TEST_CASE("sweep writes one row per value") {
    REQUIRE(run("synth" + kSmall + " --out " + dir("sw")) == 0);
    REQUIRE(run("sweep" + kSmall + " --set epochs=1 --data " + dir("sw") +
                "/threads.jsonl --param lambda --values 1e-8,1e-5,1e-2 --out " + dir("sw")) == 0);
    std::istringstream tsv(slurp(dir("sw") + "/sweep_lambda.tsv"));
    std::string line;
    int rows = 0;
    bool header = false;
    while (std::getline(tsv, line)) {
      if (line.rfind("#", 0) == 0) continue;
      if (!header) {
        header = true;
        CHECK(line.rfind("parameter\tvalue\t", 0) == 0);
        continue;
      }
      ++rows;
      int tabs = 0;
      for (char ch : line) tabs += ch == '\t';
      CHECK(tabs == 8);
    }
    CHECK(rows == 3);
  }

  TEST_CASE("bad configuration exits with status 1") {
    const auto cfg = workdir() / "bad.cfg";
    std::ofstream(cfg) << "gamma=2\nnot_a_key=1\n";
    CHECK(run("train --config " + cfg.string() + " --out " + dir("bad")) == 1);
    CHECK(run("train --set lr=-1 --out " + dir("bad")) == 1);
    CHECK(run("train --out " + dir("bad")) == 1);
  }
}
