#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfuse/metrics.hpp"
#include "segfuse/pipeline.hpp"

namespace segfuse {

namespace detail_report {

// nlohmann prints doubles with the shortest representation that round-trips,
// so routing CSV numbers through it keeps the two report formats consistent
// and the files bytewise reproducible.
inline std::string num(double v) { return nlohmann::json(v).dump(); }

inline std::size_t bin_count(const ErrorTaxonomy& t, ErrorBin bin) {
  return t.counts[static_cast<std::size_t>(bin)];
}

inline nlohmann::json bins_json(const ErrorTaxonomy& t) {
  return {{"pn", bin_count(t, ErrorBin::PolarNegative)},
          {"other_negative", bin_count(t, ErrorBin::OtherNegative)},
          {"ip", bin_count(t, ErrorBin::InferiorPositive)},
          {"high_positive", bin_count(t, ErrorBin::HighPositive)},
          {"positives", t.positives},
          {"total", t.total}};
}

}  // namespace detail_report

/// Cross-checks a results file against the corpus it claims to score.
inline void check_results_match_corpus(const PipelineResult& results,
                                       const std::vector<Sample>& corpus) {
  if (results.samples.size() != corpus.size())
    throw InvalidInputError("results hold " +
                            std::to_string(results.samples.size()) +
                            " samples, corpus holds " +
                            std::to_string(corpus.size()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SampleResult& r = results.samples[i];
    const Sample& s = corpus[i];
    if (r.id != s.id)
      throw InvalidInputError("sample " + std::to_string(i) + " is " + r.id +
                              " in the results but " + s.id + " in the corpus");
    if (r.height != s.ground_truth.height || r.width != s.ground_truth.width)
      throw InvalidInputError("sample " + r.id +
                              ": results and corpus disagree on canvas size");
  }
}

struct EvalReport {
  std::string mode;
  double tau = 0.0;
  std::size_t count = 0;
  double overall_iou = 0.0;
  double mean_iou = 0.0;
  double mer_raw_branches = 0.0;  // raw top-down vs raw bottom-up
  ErrorTaxonomy bins_fused, bins_topdown, bins_bottomup;
};

inline EvalReport build_eval_report(const PipelineResult& results,
                                    const std::vector<Sample>& corpus) {
  check_results_match_corpus(results, corpus);
  EvalReport rep;
  rep.mode = fuse_mode_name(results.mode);
  rep.tau = results.tau;
  rep.count = results.samples.size();

  std::vector<BinaryMask> preds, truths;
  std::vector<double> fused_ious, td_ious, bu_ious;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SampleResult& r = results.samples[i];
    preds.push_back(r.fused);
    truths.push_back(corpus[i].ground_truth);
    fused_ious.push_back(r.iou_fused);
    td_ious.push_back(r.iou_td_raw);
    bu_ious.push_back(r.iou_bu_raw);
  }
  const CorpusIou agg = corpus_iou(preds, truths);
  rep.overall_iou = agg.overall;
  rep.mean_iou = agg.mean;
  rep.mer_raw_branches = mutually_exclusive_rate(td_ious, bu_ious);
  rep.bins_fused = classify_errors(fused_ious);
  rep.bins_topdown = classify_errors(td_ious);
  rep.bins_bottomup = classify_errors(bu_ious);
  return rep;
}

inline void write_eval_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  using detail_report::num;
  out << "metric,value\n";
  out << "mode," << rep.mode << '\n';
  out << "tau," << num(rep.tau) << '\n';
  out << "count," << rep.count << '\n';
  out << "overall_iou," << num(rep.overall_iou) << '\n';
  out << "mean_iou," << num(rep.mean_iou) << '\n';
  out << "mer_raw_branches," << num(rep.mer_raw_branches) << '\n';
  const auto bin_rows = [&out](const char* prefix, const ErrorTaxonomy& t) {
    using detail_report::bin_count;
    out << prefix << "_pn," << bin_count(t, ErrorBin::PolarNegative) << '\n';
    out << prefix << "_other_negative,"
        << bin_count(t, ErrorBin::OtherNegative) << '\n';
    out << prefix << "_ip," << bin_count(t, ErrorBin::InferiorPositive) << '\n';
    out << prefix << "_high_positive,"
        << bin_count(t, ErrorBin::HighPositive) << '\n';
  };
  bin_rows("fused", rep.bins_fused);
  bin_rows("topdown", rep.bins_topdown);
  bin_rows("bottomup", rep.bins_bottomup);
  if (!out) throw InvalidInputError("failed writing " + path);
}

inline void write_eval_json(const std::string& path, const EvalReport& rep) {
  nlohmann::json doc;
  doc["mode"] = rep.mode;
  doc["tau"] = rep.tau;
  doc["count"] = rep.count;
  doc["overall_iou"] = rep.overall_iou;
  doc["mean_iou"] = rep.mean_iou;
  doc["mer_raw_branches"] = rep.mer_raw_branches;
  doc["bins"] = {{"fused", detail_report::bins_json(rep.bins_fused)},
                 {"topdown", detail_report::bins_json(rep.bins_topdown)},
                 {"bottomup", detail_report::bins_json(rep.bins_bottomup)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw InvalidInputError("failed writing " + path);
}

struct AnalyzeOptions {
  bool kde = false;
  bool mer = false;
  bool bins = false;
};

/// Digs distribution-level statistics out of one results file, or compares
/// two. With a second file, MER contrasts the fused predictions of the two
/// runs; alone, it contrasts the raw branches inside the single run.
inline nlohmann::json build_analysis(const PipelineResult& a,
                                     const PipelineResult* b,
                                     const AnalyzeOptions& opts) {
  if (b != nullptr && b->samples.size() != a.samples.size())
    throw InvalidInputError("paired results differ in sample count");

  std::vector<double> fused_a, fused_b, td_a, bu_a;
  for (const SampleResult& r : a.samples) {
    fused_a.push_back(r.iou_fused);
    td_a.push_back(r.iou_td_raw);
    bu_a.push_back(r.iou_bu_raw);
  }
  if (b != nullptr)
    for (const SampleResult& r : b->samples) fused_b.push_back(r.iou_fused);

  nlohmann::json doc;
  doc["mode"] = fuse_mode_name(a.mode);
  doc["summary"] = {{"count", a.samples.size()},
                    {"overall_iou", a.overall_iou},
                    {"mean_iou", a.mean_iou}};
  if (b != nullptr) {
    doc["mode_b"] = fuse_mode_name(b->mode);
    doc["summary_b"] = {{"count", b->samples.size()},
                        {"overall_iou", b->overall_iou},
                        {"mean_iou", b->mean_iou}};
  }

  if (opts.kde) {
    const std::vector<double> grid = kde_default_grid();
    nlohmann::json kj;
    kj["grid"] = grid;
    kj["fused"] = {{"bandwidth", scott_bandwidth(fused_a)},
                   {"density", kde_curve(fused_a, 0.0, grid)}};
    if (b != nullptr)
      kj["fused_b"] = {{"bandwidth", scott_bandwidth(fused_b)},
                       {"density", kde_curve(fused_b, 0.0, grid)}};
    else {
      kj["topdown_raw"] = {{"bandwidth", scott_bandwidth(td_a)},
                           {"density", kde_curve(td_a, 0.0, grid)}};
      kj["bottomup_raw"] = {{"bandwidth", scott_bandwidth(bu_a)},
                            {"density", kde_curve(bu_a, 0.0, grid)}};
    }
    doc["kde"] = std::move(kj);
  }

  if (opts.bins) {
    doc["bins"] = {{"fused", detail_report::bins_json(classify_errors(fused_a))},
                   {"topdown", detail_report::bins_json(classify_errors(td_a))},
                   {"bottomup", detail_report::bins_json(classify_errors(bu_a))}};
    if (b != nullptr)
      doc["bins"]["fused_b"] =
          detail_report::bins_json(classify_errors(fused_b));
  }

  if (opts.mer) {
    doc["mer"] = b != nullptr ? mutually_exclusive_rate(fused_a, fused_b)
                              : mutually_exclusive_rate(td_a, bu_a);
    doc["mer_inputs"] = b != nullptr ? "fused_a_vs_fused_b"
                                     : "topdown_raw_vs_bottomup_raw";
  }
  return doc;
}

inline void write_analysis(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw InvalidInputError("failed writing " + path);
}

}  // namespace segfuse
