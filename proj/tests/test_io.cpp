#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "segfuse/checkpoint.hpp"
#include "segfuse/corpus_io.hpp"
#include "segfuse/pipeline.hpp"
#include "segfuse/synthetic.hpp"
#include "segfuse/training.hpp"

using namespace segfuse;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("segfuse_io_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<Sample> demo_corpus(std::size_t count) {
  SceneSpec spec;
  spec.height = 12;
  spec.width = 12;
  spec.channels = 8;
  ErrorProfile profile;
  profile.p_pn = 0.5;
  profile.ip_erosion = 0.2;
  profile.map_noise = 0.05;
  return make_corpus(spec, profile, count, 17);
}

}  // namespace

TEST_CASE("corpus files survive a write-read-write round trip byte for byte") {
  TempDir tmp;
  const auto corpus = demo_corpus(3);
  const std::string first = tmp.path("a.json");
  const std::string second = tmp.path("b.json");
  write_corpus(first, corpus);
  const auto restored = read_corpus(first);
  REQUIRE(restored.size() == corpus.size());
  write_corpus(second, restored);
  CHECK(slurp(first) == slurp(second));

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(restored[i].id == corpus[i].id);
    CHECK(restored[i].ground_truth.bits == corpus[i].ground_truth.bits);
    CHECK(restored[i].triplet.scores == corpus[i].triplet.scores);
    CHECK(restored[i].triplet.embeddings.values() ==
          corpus[i].triplet.embeddings.values());
    CHECK(restored[i].pixels.data.values() == corpus[i].pixels.data.values());
    CHECK(restored[i].bottom_up.values == corpus[i].bottom_up.values);
  }
}

TEST_CASE("corpus reader rejects damage with the corrupt-file error") {
  TempDir tmp;
  const auto corpus = demo_corpus(1);
  const std::string good = tmp.path("good.json");
  write_corpus(good, corpus);

  CHECK_THROWS_AS(read_corpus(tmp.path("absent.json")), InvalidInputError);

  const std::string text = slurp(good);
  spit(tmp.path("trunc.json"), text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_corpus(tmp.path("trunc.json")), CorruptFileError);

  spit(tmp.path("notjson.json"), "this is not json\n");
  CHECK_THROWS_AS(read_corpus(tmp.path("notjson.json")), CorruptFileError);

  auto j = nlohmann::json::parse(text);
  j["version"] = 999;
  spit(tmp.path("version.json"), j.dump());
  CHECK_THROWS_AS(read_corpus(tmp.path("version.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  j["samples"][0]["gt_rle"] = {0};  // decodes to zero pixels for a 12x12 mask
  spit(tmp.path("rle.json"), j.dump());
  CHECK_THROWS_AS(read_corpus(tmp.path("rle.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  std::string blob = j["samples"][0]["pixel_embeddings"].get<std::string>();
  blob.resize(blob.size() - 8);  // no longer a whole number of doubles
  j["samples"][0]["pixel_embeddings"] = blob;
  spit(tmp.path("blob.json"), j.dump());
  CHECK_THROWS_AS(read_corpus(tmp.path("blob.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  j["samples"][0]["topdown"].erase("scores");
  spit(tmp.path("missing.json"), j.dump());
  CHECK_THROWS_AS(read_corpus(tmp.path("missing.json")), CorruptFileError);
}

TEST_CASE("checkpoints restore every parameter bitwise") {
  TempDir tmp;
  FusionModel model = FusionModel::init(8, InteractionConfig{}, 13);
  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.weight_decay = 1e-2;
  cfg.iterations = 2;
  cfg.batch_size = 2;
  cfg.seed = 31;
  cfg.use_cfi = false;
  fit(demo_corpus(2), model, cfg);  // move away from initialization

  const std::string first = tmp.path("ckpt.json");
  const std::string second = tmp.path("ckpt2.json");
  write_checkpoint(first, model, cfg);
  LoadedCheckpoint loaded = read_checkpoint(first);

  CHECK(loaded.config.learning_rate == cfg.learning_rate);
  CHECK(loaded.config.weight_decay == cfg.weight_decay);
  CHECK(loaded.config.iterations == cfg.iterations);
  CHECK(loaded.config.seed == cfg.seed);
  CHECK(loaded.config.use_cfi == cfg.use_cfi);
  CHECK(loaded.model.channels == model.channels);

  const ParamRegistry ra = model.registry();
  const ParamRegistry rb = loaded.model.registry();
  REQUIRE(ra.entries().size() == rb.entries().size());
  for (std::size_t i = 0; i < ra.entries().size(); ++i) {
    REQUIRE(ra.entries()[i].first == rb.entries()[i].first);
    REQUIRE(ra.entries()[i].second.values() == rb.entries()[i].second.values());
  }

  write_checkpoint(second, loaded.model, loaded.config);
  CHECK(slurp(first) == slurp(second));
}

TEST_CASE("checkpoint reader rejects damage with the corrupt-file error") {
  TempDir tmp;
  FusionModel model = FusionModel::init(8, InteractionConfig{}, 13);
  const std::string good = tmp.path("good.json");
  write_checkpoint(good, model, TrainConfig{});
  const std::string text = slurp(good);

  CHECK_THROWS_AS(read_checkpoint(tmp.path("absent.json")), InvalidInputError);

  spit(tmp.path("trunc.json"), text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(tmp.path("trunc.json")), CorruptFileError);

  auto j = nlohmann::json::parse(text);
  j["version"] = 999;
  spit(tmp.path("version.json"), j.dump());
  CHECK_THROWS_AS(read_checkpoint(tmp.path("version.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  j["params"][0]["name"] = "no_such_parameter";
  spit(tmp.path("name.json"), j.dump());
  CHECK_THROWS_AS(read_checkpoint(tmp.path("name.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  j["params"][1] = j["params"][0];  // duplicate entry, one param missing
  spit(tmp.path("dup.json"), j.dump());
  CHECK_THROWS_AS(read_checkpoint(tmp.path("dup.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  std::string blob = j["params"][0]["data"].get<std::string>();
  blob.resize(blob.size() - 12);
  j["params"][0]["data"] = blob;
  spit(tmp.path("short.json"), j.dump());
  CHECK_THROWS_AS(read_checkpoint(tmp.path("short.json")), CorruptFileError);

  j = nlohmann::json::parse(text);
  j["params"].erase(j["params"].size() - 1);
  spit(tmp.path("fewer.json"), j.dump());
  CHECK_THROWS_AS(read_checkpoint(tmp.path("fewer.json")), CorruptFileError);
}

TEST_CASE("results files round trip and reject damage") {
  TempDir tmp;
  const auto corpus = demo_corpus(3);
  const PipelineResult result =
      run_pipeline(corpus, FuseMode::Average, kDefaultTau, nullptr);

  const std::string first = tmp.path("r.json");
  const std::string second = tmp.path("r2.json");
  write_results(first, result);
  const PipelineResult back = read_results(first);
  CHECK(back.mode == result.mode);
  CHECK(back.tau == result.tau);
  CHECK(back.overall_iou == result.overall_iou);
  CHECK(back.mean_iou == result.mean_iou);
  REQUIRE(back.samples.size() == result.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i].id == result.samples[i].id);
    CHECK(back.samples[i].fused.bits == result.samples[i].fused.bits);
    CHECK(back.samples[i].iou_fused == result.samples[i].iou_fused);
  }
  write_results(second, back);
  CHECK(slurp(first) == slurp(second));

  CHECK_THROWS_AS(read_results(tmp.path("absent.json")), InvalidInputError);
  const std::string text = slurp(first);
  spit(tmp.path("bad.json"), text.substr(0, text.size() - 30));
  CHECK_THROWS_AS(read_results(tmp.path("bad.json")), CorruptFileError);
}

TEST_CASE("binary blobs encode little-endian doubles") {
  const std::vector<double> values = {0.0, 1.0, -2.5, 1e308, -1e-308};
  const std::string blob = doubles_to_base64(values);
  CHECK(base64_to_doubles(blob) == values);
  // 1.0 in little-endian IEEE-754: six zero bytes then 0xf0 0x3f.
  const std::vector<unsigned char> raw = base64_decode(blob);
  REQUIRE(raw.size() == values.size() * 8);
  CHECK(raw[8] == 0x00);
  CHECK(raw[14] == 0xf0);
  CHECK(raw[15] == 0x3f);

  CHECK_THROWS_AS(base64_decode("ab!d"), CorruptFileError);
  CHECK_THROWS_AS(base64_to_doubles("AAAA"), CorruptFileError);  // 3 bytes
}
