#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "sgl/model.hpp"
#include "sgl_cli/cli.hpp"
#include "support/temp_dir.hpp"

using namespace sgl::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome sgl_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = sgl::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string interactions() {
  std::string text;
  for (int u = 0; u < 24; ++u) {
    for (int i = 0; i < 30; ++i) {
      if ((u % 3) == (i % 3) && (u * 7 + i * 5) % 4 != 0) text += "u" + std::to_string(u) + " i" + std::to_string(i) + "\n";
    }
  }
  return text;
}

constexpr const char* kConfig = R"({"layers": 2, "dim": 8, "lr": 0.01, "batch_size": 64, "max_epochs": 3})";

// Prepares a split under dir/prep and returns the manifest path.
std::string prepared(const TempDir& dir) {
  const auto input = dir.write("inter.txt", interactions());
  const auto r = sgl_run({"prepare", "--input", input, "--k-core", "2", "--out", dir.file("prep")});
  REQUIRE(r.code == 0);
  return dir.file("prep/split.jsonl");
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("prepare reports Table-2 style statistics and is reproducible") {
    TempDir dir;
    const auto input = dir.write("inter.txt", interactions());
    const auto a = sgl_run({"prepare", "--input", input, "--k-core", "2", "--out", dir.file("a")});
    const auto b = sgl_run({"prepare", "--input", input, "--k-core", "2", "--out", dir.file("b")});
    REQUIRE(a.code == 0);
    CHECK(a.out.find("users 24") != std::string::npos);
    CHECK(a.out.find("density") != std::string::npos);
    CHECK(sgl::cli::file_checksum(dir.file("a/split.jsonl")) == sgl::cli::file_checksum(dir.file("b/split.jsonl")));
    CHECK(slurp(dir.file("a/stats.csv")).rfind("users,items,interactions,density", 0) == 0);
    CHECK(fs::exists(dir.file("a/manifest.json")));
  }

  TEST_CASE("density matches interactions over users times items") {
    TempDir dir;
    const auto input = dir.write("tiny.txt", "a x\na y\nb x\n");
    const auto r = sgl_run({"prepare", "--input", input, "--k-core", "1", "--out", dir.file("p")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("density 0.75000") != std::string::npos);
  }

  TEST_CASE("bad input path fails with the path in the message") {
    TempDir dir;
    const auto r = sgl_run({"prepare", "--input", "/no/such/file.txt", "--out", dir.file("o")});
    CHECK(r.code == sgl::cli::kModuleError);
    CHECK(r.err.find("/no/such/file.txt") != std::string::npos);
  }

  TEST_CASE("malformed input reports the line") {
    TempDir dir;
    const auto input = dir.write("bad.txt", "a x\nb\n");
    const auto r = sgl_run({"prepare", "--input", input, "--k-core", "1", "--out", dir.file("o")});
    CHECK(r.code == sgl::cli::kModuleError);
    CHECK(r.err.find("bad.txt:2") != std::string::npos);
  }

  TEST_CASE("train without a config is a usage error") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto r = sgl_run({"train", "--split", split, "--out", dir.file("t")});
    CHECK(r.code == sgl::cli::kUsageError);
    CHECK(r.err.find("--config") != std::string::npos);
    CHECK(sgl_run({}).code == sgl::cli::kUsageError);
    CHECK(sgl_run({"train", "--config", dir.write("c.json", kConfig), "--split", split, "--operator", "xx"}).code ==
          sgl::cli::kUsageError);
  }

  TEST_CASE("train writes checkpoints, curves and a manifest; flags override the file") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto config = dir.write("c.json", kConfig);
    const auto r = sgl_run({"--deterministic", "train", "--config", config, "--split", split, "--operator", "rw",
                            "--tau", "0.5", "--neg-scope", "merge", "--seed", "9", "--out", dir.file("t")});
    REQUIRE(r.code == 0);
    for (const char* f : {"best.ckpt", "final.ckpt", "curve.csv", "curve.jsonl", "manifest.json"})
      CHECK(fs::exists(dir.file(std::string("t/") + f)));
    const auto manifest = slurp(dir.file("t/manifest.json"));
    CHECK(manifest.find("\"operator\": \"rw\"") != std::string::npos);
    CHECK(manifest.find("\"tau\": 0.5") != std::string::npos);
    CHECK(manifest.find("\"neg_scope\": \"merge\"") != std::string::npos);
    CHECK(manifest.find("\"seed\": 9") != std::string::npos);
    CHECK(manifest.find("\"checksum\"") != std::string::npos);
    CHECK(manifest.find("started_at") == std::string::npos);
  }

  TEST_CASE("deterministic reruns produce identical bytes") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto config = dir.write("c.json", kConfig);
    for (const char* sub : {"r1", "r2"}) {
      REQUIRE(sgl_run({"--deterministic", "train", "--config", config, "--split", split, "--out", dir.file(sub)}).code == 0);
      REQUIRE(sgl_run({"--deterministic", "longtail", "--checkpoint", dir.file(std::string(sub) + "/best.ckpt"),
                       "--split", split, "--config", config, "--out", dir.file(std::string(sub) + "/lt")})
                  .code == 0);
    }
    for (const char* f : {"curve.csv", "curve.jsonl", "best.ckpt", "lt/metrics.csv",
                          "lt/metrics.jsonl", "lt/longtail.csv"}) {
      CHECK(slurp(dir.file(std::string("r1/") + f)) == slurp(dir.file(std::string("r2/") + f)));
    }
  }

  TEST_CASE("baseline mode matches an explicit no-SSL config") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto config = dir.write("c.json", kConfig);
    const auto plain = dir.write("p.json", R"({"layers": 2, "dim": 8, "lr": 0.01, "batch_size": 64, "max_epochs": 3,
                                               "lambda1": 0, "operator": "none"})");
    REQUIRE(sgl_run({"train", "--config", config, "--split", split, "--mode", "baseline", "--out", dir.file("a")}).code == 0);
    REQUIRE(sgl_run({"train", "--config", plain, "--split", split, "--out", dir.file("b")}).code == 0);
    CHECK(slurp(dir.file("a/final.ckpt")) == slurp(dir.file("b/final.ckpt")));
  }

  TEST_CASE("evaluate defaults to K = 20 and longtail writes ten groups") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto config = dir.write("c.json", kConfig);
    REQUIRE(sgl_run({"train", "--config", config, "--split", split, "--out", dir.file("t")}).code == 0);
    const auto ev = sgl_run({"evaluate", "--checkpoint", dir.file("t/best.ckpt"), "--split", split, "--layers", "2",
                             "--out", dir.file("e")});
    REQUIRE(ev.code == 0);
    CHECK(slurp(dir.file("e/metrics.csv")).find("\n20,") != std::string::npos);
    const auto lt = sgl_run({"longtail", "--checkpoint", dir.file("t/best.ckpt"), "--split", split, "--layers", "2",
                             "--out", dir.file("l")});
    REQUIRE(lt.code == 0);
    std::istringstream rows(slurp(dir.file("l/longtail.csv")));
    std::string line;
    std::getline(rows, line);
    int n = 0;
    while (std::getline(rows, line)) ++n;
    CHECK(n == 10);
  }

  TEST_CASE("missing or mismatched checkpoint is an error") {
    TempDir dir;
    const auto split = prepared(dir);
    auto r = sgl_run({"evaluate", "--checkpoint", dir.file("none.ckpt"), "--split", split, "--out", dir.file("e")});
    CHECK(r.code == sgl::cli::kModuleError);
    CHECK(r.err.find("none.ckpt") != std::string::npos);
    sgl::EmbeddingTable t;
    t.num_users = 2;
    t.num_items = 2;
    t.values = sgl::Matrix::Zero(4, 3);
    sgl::save_checkpoint(t, 0, dir.file("small.ckpt"));
    r = sgl_run({"evaluate", "--checkpoint", dir.file("small.ckpt"), "--split", split, "--out", dir.file("e")});
    CHECK(r.code == sgl::cli::kModuleError);
  }

  TEST_CASE("noise sweeps the default ratios for both variants") {
    TempDir dir;
    const auto split = prepared(dir);
    const auto config = dir.write("c.json", kConfig);
    const auto r = sgl_run({"--deterministic", "noise", "--config", config, "--split", split, "--out", dir.file("n")});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir.file("n/noise.csv"));
    for (const char* row : {"\n0,sgl,", "\n0.20000000000000001,sgl,", "\n0,baseline,", "\n0.20000000000000001,baseline,"})
      CHECK(csv.find(row) != std::string::npos);
    CHECK(sgl_run({"noise", "--config", config, "--split", split, "--ratios", "0.1", "--out", dir.file("m")}).code ==
          sgl::cli::kModuleError);
  }

  TEST_CASE("analyze writes two curves and a summary") {
    TempDir dir;
    const auto r = sgl_run({"analyze", "--tau", "1.0,0.1", "--out", dir.file("a")});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir.file("a/g_curve_tau_1.csv")));
    CHECK(fs::exists(dir.file("a/g_curve_tau_0.1.csv")));
    CHECK(fs::exists(dir.file("a/hard_negative_summary.csv")));
    CHECK(sgl_run({"analyze", "--tau", "abc", "--out", dir.file("b")}).code == sgl::cli::kUsageError);
  }

  TEST_CASE("output directory falls back to the environment") {
    TempDir dir;
    CHECK(sgl::cli::resolve_output_dir("x") == "x");
    ::setenv("SGL_OUTPUT_DIR", dir.file("env").c_str(), 1);
    CHECK(sgl::cli::resolve_output_dir("") == dir.file("env"));
    const auto r = sgl_run({"analyze", "--tau", "0.5"});
    ::unsetenv("SGL_OUTPUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir.file("env/g_curve_tau_0.5.csv")));
  }
}
