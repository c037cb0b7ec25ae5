#include <catch2/catch_amalgamated.hpp>

#include "segfuse/pipeline.hpp"
#include "segfuse/reports.hpp"
#include "segfuse/synthetic.hpp"

using namespace segfuse;

namespace {

std::vector<Sample> mixed_corpus(std::size_t count, std::uint64_t seed) {
  SceneSpec spec;
  spec.height = 16;
  spec.width = 16;
  spec.channels = 8;
  ErrorProfile profile;
  profile.p_pn = 0.4;
  profile.ip_erosion = 0.3;
  return make_corpus(spec, profile, count, seed);
}

}  // namespace

TEST_CASE("baseline modes reproduce the plain integration rules bitwise") {
  const auto corpus = mixed_corpus(8, 31);
  for (const auto [mode, strategy] :
       {std::pair{FuseMode::Intersection, BaselineStrategy::Intersection},
        std::pair{FuseMode::Union, BaselineStrategy::Union},
        std::pair{FuseMode::Average, BaselineStrategy::Average}}) {
    for (const Sample& s : corpus) {
      const SampleResult r = fuse_sample(s, mode, kDefaultTau, nullptr);
      const TopdownResult td = extract_topdown_result(s.triplet);
      const BinaryMask direct =
          baseline_integrate(td.map, s.bottom_up, strategy, kDefaultTau);
      REQUIRE(r.fused.bits == direct.bits);
      CHECK_FALSE(r.has_confidence);
      CHECK(r.iou_fused == iou(direct, s.ground_truth));
    }
  }
}

TEST_CASE("learned modes demand a model") {
  const auto corpus = mixed_corpus(1, 32);
  for (const FuseMode mode : {FuseMode::Si, FuseMode::Gsi, FuseMode::GsiCfi}) {
    CHECK_THROWS_AS(fuse_sample(corpus[0], mode, kDefaultTau, nullptr),
                    ConfigError);
    CHECK_THROWS_AS(run_pipeline(corpus, mode, kDefaultTau, nullptr),
                    ConfigError);
  }
}

TEST_CASE("pipeline validates corpus and threshold") {
  const auto corpus = mixed_corpus(1, 33);
  CHECK_THROWS_AS(run_pipeline({}, FuseMode::Average, kDefaultTau, nullptr),
                  InvalidInputError);
  CHECK_THROWS_AS(run_pipeline(corpus, FuseMode::Average, 0.0, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(run_pipeline(corpus, FuseMode::Average, 1.0, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(run_pipeline(corpus, FuseMode::Average, -0.2, nullptr),
                  ConfigError);
}

TEST_CASE("pipeline aggregates match a recomputation from the masks") {
  const auto corpus = mixed_corpus(10, 34);
  const PipelineResult result =
      run_pipeline(corpus, FuseMode::Average, kDefaultTau, nullptr);
  REQUIRE(result.samples.size() == corpus.size());

  std::vector<BinaryMask> preds, truths;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(result.samples[i].id == corpus[i].id);
    CHECK(result.samples[i].iou_fused >= 0.0);
    CHECK(result.samples[i].iou_fused <= 1.0);
    preds.push_back(result.samples[i].fused);
    truths.push_back(corpus[i].ground_truth);
  }
  const CorpusIou agg = corpus_iou(preds, truths);
  CHECK(result.overall_iou == agg.overall);
  CHECK(result.mean_iou == agg.mean);
}

TEST_CASE("intersection predictions are contained in union predictions") {
  const auto corpus = mixed_corpus(10, 35);
  const PipelineResult inter =
      run_pipeline(corpus, FuseMode::Intersection, kDefaultTau, nullptr);
  const PipelineResult uni =
      run_pipeline(corpus, FuseMode::Union, kDefaultTau, nullptr);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (std::size_t p = 0; p < inter.samples[i].fused.bits.size(); ++p)
      if (inter.samples[i].fused.bits[p]) REQUIRE(uni.samples[i].fused.bits[p]);
}

TEST_CASE("learned modes run on an untrained model and report confidences") {
  const auto corpus = mixed_corpus(4, 36);
  const FusionModel model = FusionModel::init(8, InteractionConfig{}, 3);
  for (const FuseMode mode : {FuseMode::Si, FuseMode::Gsi, FuseMode::GsiCfi}) {
    const PipelineResult result =
        run_pipeline(corpus, mode, kDefaultTau, &model);
    CHECK(result.mode == mode);
    for (const SampleResult& r : result.samples) {
      REQUIRE(r.has_confidence);
      CHECK(r.conf_td > 0.0);
      CHECK(r.conf_td < 1.0);
      CHECK(r.conf_bu > 0.0);
      CHECK(r.conf_bu < 1.0);
      REQUIRE(r.fused.height == 16);
      REQUIRE(r.fused.width == 16);
    }
  }
}

TEST_CASE("inference is repeatable run to run") {
  const auto corpus = mixed_corpus(4, 37);
  const FusionModel model = FusionModel::init(8, InteractionConfig{}, 3);
  const PipelineResult a = run_pipeline(corpus, FuseMode::GsiCfi, kDefaultTau, &model);
  const PipelineResult b = run_pipeline(corpus, FuseMode::GsiCfi, kDefaultTau, &model);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.overall_iou == b.overall_iou);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].fused.bits == b.samples[i].fused.bits);
    CHECK(a.samples[i].conf_td == b.samples[i].conf_td);
    CHECK(a.samples[i].conf_bu == b.samples[i].conf_bu);
  }
}

TEST_CASE("evaluation report agrees with direct metric calls") {
  const auto corpus = mixed_corpus(12, 38);
  const PipelineResult result =
      run_pipeline(corpus, FuseMode::Intersection, kDefaultTau, nullptr);
  const EvalReport rep = build_eval_report(result, corpus);

  CHECK(rep.mode == "intersection");
  CHECK(rep.tau == kDefaultTau);
  CHECK(rep.count == corpus.size());
  CHECK(rep.overall_iou == result.overall_iou);
  CHECK(rep.mean_iou == result.mean_iou);
  CHECK(rep.bins_fused.total == corpus.size());
  CHECK(rep.bins_topdown.total == corpus.size());
  CHECK(rep.bins_bottomup.total == corpus.size());

  std::vector<double> td, bu;
  for (const SampleResult& r : result.samples) {
    td.push_back(r.iou_td_raw);
    bu.push_back(r.iou_bu_raw);
  }
  CHECK(rep.mer_raw_branches == mutually_exclusive_rate(td, bu));
  // The profile used here erodes every bottom-up map into the IP band.
  CHECK(detail_report::bin_count(rep.bins_bottomup, ErrorBin::InferiorPositive) ==
        corpus.size());
}

TEST_CASE("results are cross-checked against the corpus before evaluation") {
  const auto corpus = mixed_corpus(3, 39);
  const PipelineResult result =
      run_pipeline(corpus, FuseMode::Average, kDefaultTau, nullptr);

  PipelineResult fewer = result;
  fewer.samples.pop_back();
  CHECK_THROWS_AS(build_eval_report(fewer, corpus), InvalidInputError);

  PipelineResult renamed = result;
  renamed.samples[1].id = "someone-else";
  CHECK_THROWS_AS(build_eval_report(renamed, corpus), InvalidInputError);

  PipelineResult resized = result;
  resized.samples[0].height = 99;
  CHECK_THROWS_AS(build_eval_report(resized, corpus), InvalidInputError);
}

TEST_CASE("analysis emits exactly the requested sections") {
  const auto corpus = mixed_corpus(6, 40);
  const PipelineResult a =
      run_pipeline(corpus, FuseMode::Intersection, kDefaultTau, nullptr);
  const PipelineResult b =
      run_pipeline(corpus, FuseMode::Average, kDefaultTau, nullptr);

  AnalyzeOptions none;
  nlohmann::json doc = build_analysis(a, nullptr, none);
  CHECK(doc.contains("summary"));
  CHECK_FALSE(doc.contains("kde"));
  CHECK_FALSE(doc.contains("bins"));
  CHECK_FALSE(doc.contains("mer"));

  AnalyzeOptions all{true, true, true};
  doc = build_analysis(a, nullptr, all);
  CHECK(doc["mode"] == "intersection");
  CHECK(doc["summary"]["count"] == corpus.size());
  REQUIRE(doc["kde"]["grid"].size() == 512);
  REQUIRE(doc["kde"]["fused"]["density"].size() == 512);
  CHECK(doc["kde"].contains("topdown_raw"));
  CHECK(doc["kde"].contains("bottomup_raw"));
  CHECK_FALSE(doc["kde"].contains("fused_b"));
  CHECK(doc["mer_inputs"] == "topdown_raw_vs_bottomup_raw");
  CHECK(doc["bins"]["bottomup"]["ip"] == corpus.size());

  doc = build_analysis(a, &b, all);
  CHECK(doc["mode_b"] == "average");
  CHECK(doc["summary_b"]["count"] == corpus.size());
  CHECK(doc["kde"].contains("fused_b"));
  CHECK_FALSE(doc["kde"].contains("topdown_raw"));
  CHECK(doc["mer_inputs"] == "fused_a_vs_fused_b");
  CHECK(doc["bins"].contains("fused_b"));

  PipelineResult shorter = b;
  shorter.samples.pop_back();
  CHECK_THROWS_AS(build_analysis(a, &shorter, all), InvalidInputError);
}
