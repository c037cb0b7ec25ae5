#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segfuse/corpus_io.hpp"
#include "segfuse/forward.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/model.hpp"

namespace segfuse {

struct SampleResult {
  std::string id;
  std::size_t height = 0;
  std::size_t width = 0;
  BinaryMask fused;
  double iou_fused = 0.0;
  double iou_td_raw = 0.0;  // argmax-proposal mask vs GT
  double iou_bu_raw = 0.0;  // binarized probability map vs GT
  bool has_confidence = false;
  double conf_td = 0.0;
  double conf_bu = 0.0;
};

struct PipelineResult {
  FuseMode mode = FuseMode::Average;
  double tau = kDefaultTau;
  std::vector<SampleResult> samples;
  double overall_iou = 0.0;
  double mean_iou = 0.0;
};

namespace detail_pipeline {

inline BaselineStrategy baseline_of(FuseMode mode) {
  switch (mode) {
    case FuseMode::Intersection: return BaselineStrategy::Intersection;
    case FuseMode::Union: return BaselineStrategy::Union;
    case FuseMode::Average: return BaselineStrategy::Average;
    default:
      throw ConfigError(std::string("mode ") + fuse_mode_name(mode) +
                        " is not a baseline strategy");
  }
}

}  // namespace detail_pipeline

/// Runs one sample through the selected integration path and scores it
/// against ground truth. `model` may be null for the set-op baselines.
inline SampleResult fuse_sample(const Sample& sample, FuseMode mode, double tau,
                                const FusionModel* model) {
  sample.validate();
  SampleResult r;
  r.id = sample.id;
  r.height = sample.ground_truth.height;
  r.width = sample.ground_truth.width;

  const TopdownResult raw_td = extract_topdown_result(sample.triplet);
  r.iou_td_raw = iou(binarize(raw_td.map, tau), sample.ground_truth);
  r.iou_bu_raw = iou(binarize(sample.bottom_up, tau), sample.ground_truth);

  if (fuse_mode_learned(mode)) {
    if (model == nullptr)
      throw ConfigError(std::string("mode ") + fuse_mode_name(mode) +
                        " requires a trained checkpoint");
    NoGradGuard guard;
    Rng rng(0);  // inference never draws; the mean is used directly
    const ForwardOutcome fwd =
        forward_learned(sample, *model, mode, SampleMode::Infer, rng);
    r.fused = binarize(tensor_to_map(fwd.fused, r.height, r.width), tau);
    r.has_confidence = true;
    r.conf_td = fwd.conf_td.item();
    r.conf_bu = fwd.conf_bu.item();
  } else {
    r.fused = baseline_integrate(raw_td.map, sample.bottom_up,
                                 detail_pipeline::baseline_of(mode), tau);
  }
  r.iou_fused = iou(r.fused, sample.ground_truth);
  return r;
}

inline PipelineResult run_pipeline(const std::vector<Sample>& corpus, FuseMode mode,
                                   double tau, const FusionModel* model = nullptr) {
  if (corpus.empty()) throw InvalidInputError("pipeline needs a non-empty corpus");
  if (tau <= 0.0 || tau >= 1.0)
    throw ConfigError("threshold must lie strictly inside (0,1)");
  PipelineResult out;
  out.mode = mode;
  out.tau = tau;
  out.samples.reserve(corpus.size());
  std::vector<BinaryMask> preds, truths;
  preds.reserve(corpus.size());
  truths.reserve(corpus.size());
  for (const Sample& s : corpus) {
    out.samples.push_back(fuse_sample(s, mode, tau, model));
    preds.push_back(out.samples.back().fused);
    truths.push_back(s.ground_truth);
  }
  const CorpusIou agg = corpus_iou(preds, truths);
  out.overall_iou = agg.overall;
  out.mean_iou = agg.mean;
  return out;
}

constexpr int kResultsVersion = 1;

inline void write_results(const std::string& path, const PipelineResult& result) {
  nlohmann::json doc;
  doc["version"] = kResultsVersion;
  doc["mode"] = fuse_mode_name(result.mode);
  doc["tau"] = result.tau;
  doc["summary"] = {{"count", result.samples.size()},
                    {"overall_iou", result.overall_iou},
                    {"mean_iou", result.mean_iou}};
  nlohmann::json samples = nlohmann::json::array();
  for (const SampleResult& r : result.samples) {
    nlohmann::json sj;
    sj["id"] = r.id;
    sj["H"] = r.height;
    sj["W"] = r.width;
    sj["fused_rle"] = rle_encode(r.fused);
    sj["iou_fused"] = r.iou_fused;
    sj["iou_td_raw"] = r.iou_td_raw;
    sj["iou_bu_raw"] = r.iou_bu_raw;
    if (r.has_confidence) {
      sj["conf_td"] = r.conf_td;
      sj["conf_bu"] = r.conf_bu;
    }
    samples.push_back(std::move(sj));
  }
  doc["samples"] = std::move(samples);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  out << doc.dump() << '\n';
  if (!out) throw InvalidInputError("failed writing " + path);
}

inline PipelineResult read_results(const std::string& path) {
  const nlohmann::json doc = parse_json_file(path);
  using detail_io::field;
  if (!doc.contains("version") || doc.at("version") != kResultsVersion)
    throw CorruptFileError(path + ": unsupported results version");
  PipelineResult out;
  try {
    out.mode = parse_fuse_mode(field<std::string>(doc, "mode"));
    out.tau = field<double>(doc, "tau");
    if (!doc.contains("summary") || !doc.contains("samples"))
      throw CorruptFileError("missing summary or samples");
    const nlohmann::json& summary = doc.at("summary");
    out.overall_iou = field<double>(summary, "overall_iou");
    out.mean_iou = field<double>(summary, "mean_iou");
    for (const nlohmann::json& sj : doc.at("samples")) {
      SampleResult r;
      r.id = field<std::string>(sj, "id");
      r.height = field<std::size_t>(sj, "H");
      r.width = field<std::size_t>(sj, "W");
      r.fused = rle_decode(field<std::vector<std::size_t>>(sj, "fused_rle"),
                           r.height, r.width);
      r.iou_fused = field<double>(sj, "iou_fused");
      r.iou_td_raw = field<double>(sj, "iou_td_raw");
      r.iou_bu_raw = field<double>(sj, "iou_bu_raw");
      if (sj.contains("conf_td")) {
        r.has_confidence = true;
        r.conf_td = field<double>(sj, "conf_td");
        r.conf_bu = field<double>(sj, "conf_bu");
      }
      out.samples.push_back(std::move(r));
    }
    if (out.samples.size() != field<std::size_t>(summary, "count"))
      throw CorruptFileError("sample count disagrees with summary");
  } catch (const Error& e) {
    // Any structural defect in a results file reads as corruption.
    throw CorruptFileError(path + ": " + e.what());
  }
  return out;
}

}  // namespace segfuse
