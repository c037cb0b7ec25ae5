#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "segfuse/corpus_io.hpp"

// End-to-end checks against the installed command-line binary. The path is
// injected by the build so the test always drives the freshly built tool.

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("segfuse_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd =
      std::string(SEGFUSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("command line end to end") {
  TempDir tmp;
  const std::string corpus = tmp.path("corpus.json");
  const std::string ckpt = tmp.path("ckpt.json");
  const std::string results = tmp.path("results.json");
  const std::string results_b = tmp.path("results_b.json");

  SECTION("help and argument errors") {
    CHECK(run("--help") == 0);
    CHECK(run("synth --help") == 0);
    CHECK(run("") == 2);                       // a subcommand is required
    CHECK(run("synth") == 2);                  // missing required flags
    CHECK(run("frobnicate --out x.json") == 2);
    CHECK(run("synth --out x.json --count 4 --seed 1 --p-pn 0.3 "
              "--ip-erosion 0.3 --bogus-flag 7") == 2);
  }

  SECTION("full pipeline") {
    REQUIRE(run("synth --out " + corpus +
                " --count 8 --seed 5 --p-pn 0.4 --ip-erosion 0.3 "
                "--h 16 --w 16 --c 8") == 0);
    const auto doc = segfuse::parse_json_file(corpus);
    REQUIRE(doc["samples"].size() == 8);
    REQUIRE(doc["samples"][0]["H"] == 16);

    // Identical invocations must produce identical bytes.
    const std::string corpus2 = tmp.path("corpus2.json");
    REQUIRE(run("synth --out " + corpus2 +
                " --count 8 --seed 5 --p-pn 0.4 --ip-erosion 0.3 "
                "--h 16 --w 16 --c 8") == 0);
    REQUIRE(slurp(corpus) == slurp(corpus2));

    REQUIRE(run("train --corpus " + corpus + " --out " + ckpt +
                " --iters 3 --lr 1e-3 --wd 1e-2 --seed 2") == 0);
    REQUIRE(std::filesystem::exists(ckpt));

    // Baseline fusion needs no checkpoint; learned fusion does.
    REQUIRE(run("fuse --corpus " + corpus + " --mode average --tau 0.35 --out " +
                results) == 0);
    CHECK(run("fuse --corpus " + corpus + " --mode gsi --tau 0.35 --out " +
              results_b) == 2);
    REQUIRE(run("fuse --corpus " + corpus + " --ckpt " + ckpt +
                " --mode gsi+cfi --tau 0.35 --out " + results_b) == 0);
    CHECK(run("fuse --corpus " + corpus + " --ckpt " + ckpt +
              " --mode meet --tau 0.35 --out x.json") == 2);
    CHECK(run("fuse --corpus " + corpus + " --ckpt " + ckpt +
              " --mode average --tau 1.5 --out x.json") == 2);

    const std::string csv = tmp.path("report.csv");
    const std::string json = tmp.path("report.json");
    REQUIRE(run("eval --results " + results + " --corpus " + corpus +
                " --report " + csv + " --json " + json) == 0);
    const std::string table = slurp(csv);
    CHECK(table.find("metric,value") == 0);
    CHECK(table.find("overall_iou,") != std::string::npos);
    const auto rep = segfuse::parse_json_file(json);
    CHECK(rep["mode"] == "average");
    CHECK(rep["count"] == 8);

    const std::string analysis = tmp.path("analysis.json");
    REQUIRE(run("analyze --results " + results + " --kde --mer --bins --out " +
                analysis) == 0);
    auto an = segfuse::parse_json_file(analysis);
    CHECK(an.contains("kde"));
    CHECK(an.contains("mer"));
    CHECK(an.contains("bins"));

    REQUIRE(run("analyze --results " + results + " --results-b " + results_b +
                " --mer --out " + analysis) == 0);
    an = segfuse::parse_json_file(analysis);
    CHECK(an["mer_inputs"] == "fused_a_vs_fused_b");
    CHECK_FALSE(an.contains("kde"));
  }

  SECTION("damaged and mismatched inputs") {
    REQUIRE(run("synth --out " + corpus +
                " --count 2 --seed 5 --p-pn 0 --ip-erosion 0 "
                "--h 12 --w 12 --c 8") == 0);

    std::ofstream(tmp.path("broken.json")) << "{ not json";
    CHECK(run("train --corpus " + tmp.path("broken.json") +
              " --out x.json --iters 1 --lr 1e-3 --wd 0 --seed 1") == 3);
    CHECK(run("fuse --corpus " + tmp.path("broken.json") +
              " --mode average --tau 0.35 --out x.json") == 3);

    CHECK(run("fuse --corpus " + tmp.path("nowhere.json") +
              " --mode average --tau 0.35 --out x.json") == 2);

    REQUIRE(run("fuse --corpus " + corpus + " --mode union --tau 0.35 --out " +
                results) == 0);
    const std::string other = tmp.path("other.json");
    REQUIRE(run("synth --out " + other +
                " --count 3 --seed 6 --p-pn 0 --ip-erosion 0 "
                "--h 12 --w 12 --c 8") == 0);
    CHECK(run("eval --results " + results + " --corpus " + other +
              " --report r.csv --json r.json") == 2);

    CHECK(run("train --corpus " + corpus +
              " --out x.json --iters 0 --lr 1e-3 --wd 0 --seed 1") == 2);
  }
}
