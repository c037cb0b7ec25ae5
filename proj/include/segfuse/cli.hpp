#pragma once

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segfuse/checkpoint.hpp"
#include "segfuse/pipeline.hpp"
#include "segfuse/reports.hpp"
#include "segfuse/synthetic.hpp"

namespace segfuse {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitCorrupt = 3;

namespace detail_cli {

struct SynthArgs {
  std::string out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double p_pn = 0.0;
  double ip_erosion = 0.0;
  std::size_t height = 32, width = 32, channels = 16;
};

struct TrainArgs {
  std::string corpus, out;
  std::size_t iters = 0;
  double lr = 1e-5;
  double wd = 5e-2;
  std::uint64_t seed = 0;
  bool no_cfi = false;
};

struct FuseArgs {
  std::string corpus, ckpt, mode, out;
  double tau = kDefaultTau;
};

struct EvalArgs {
  std::string results, corpus, report_csv, report_json;
};

struct AnalyzeArgs {
  std::string results, results_b, out;
  bool kde = false, mer = false, bins = false;
};

inline void run_synth(const SynthArgs& a) {
  SceneSpec spec;
  spec.height = a.height;
  spec.width = a.width;
  spec.channels = a.channels;
  ErrorProfile profile;
  profile.p_pn = a.p_pn;
  profile.ip_erosion = a.ip_erosion;
  const std::vector<Sample> corpus =
      make_corpus(spec, profile, a.count, a.seed);
  write_corpus(a.out, corpus);
  std::cout << "wrote " << corpus.size() << " samples to " << a.out << '\n';
}

inline void run_train(const TrainArgs& a) {
  const std::vector<Sample> corpus = read_corpus(a.corpus);
  TrainConfig cfg;
  cfg.iterations = a.iters;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.wd;
  cfg.seed = a.seed;
  cfg.use_cfi = !a.no_cfi;
  FusionModel model =
      FusionModel::init(corpus.front().pixels.channels, InteractionConfig{}, a.seed);
  const TrainingCurve curve = fit(corpus, model, cfg);
  write_checkpoint(a.out, model, cfg);
  std::cout << "trained " << cfg.iterations << " iterations; final loss "
            << (curve.empty() ? 0.0 : curve.back().total)
            << "; wrote " << a.out << '\n';
}

inline void run_fuse(const FuseArgs& a) {
  const FuseMode mode = parse_fuse_mode(a.mode);
  const std::vector<Sample> corpus = read_corpus(a.corpus);
  LoadedCheckpoint loaded;
  const FusionModel* model = nullptr;
  if (fuse_mode_learned(mode)) {
    if (a.ckpt.empty())
      throw ConfigError("mode " + a.mode + " requires --ckpt");
    loaded = read_checkpoint(a.ckpt);
    if (loaded.model.channels != corpus.front().pixels.channels)
      throw ConfigError("checkpoint works on " +
                        std::to_string(loaded.model.channels) +
                        " channels, corpus has " +
                        std::to_string(corpus.front().pixels.channels));
    model = &loaded.model;
  }
  const PipelineResult result = run_pipeline(corpus, mode, a.tau, model);
  write_results(a.out, result);
  std::cout << a.mode << ": overall IoU " << result.overall_iou << ", mean IoU "
            << result.mean_iou << " over " << result.samples.size()
            << " samples; wrote " << a.out << '\n';
}

inline void run_eval(const EvalArgs& a) {
  const PipelineResult results = read_results(a.results);
  const std::vector<Sample> corpus = read_corpus(a.corpus);
  const EvalReport rep = build_eval_report(results, corpus);
  write_eval_csv(a.report_csv, rep);
  write_eval_json(a.report_json, rep);
  std::cout << "wrote " << a.report_csv << " and " << a.report_json << '\n';
}

inline void run_analyze(const AnalyzeArgs& a) {
  const PipelineResult results = read_results(a.results);
  PipelineResult results_b;
  const PipelineResult* b = nullptr;
  if (!a.results_b.empty()) {
    results_b = read_results(a.results_b);
    b = &results_b;
  }
  AnalyzeOptions opts;
  opts.kde = a.kde;
  opts.mer = a.mer;
  opts.bins = a.bins;
  write_analysis(a.out, build_analysis(results, b, opts));
  std::cout << "wrote " << a.out << '\n';
}

}  // namespace detail_cli

/// Full command-line surface. Returns a process exit code: 0 on success,
/// 2 for invalid input or configuration, 3 for corrupt files.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"top-down / bottom-up segmentation fusion toolkit"};
  app.require_subcommand(1);

  detail_cli::SynthArgs synth;
  CLI::App* cmd_synth =
      app.add_subcommand("synth", "generate a synthetic prediction corpus");
  // --h (canvas height) needs the single-dash-style long name, so help loses
  // its -h alias here.
  cmd_synth->set_help_flag("--help", "print this help message and exit");
  cmd_synth->add_option("--out", synth.out, "corpus file to write")->required();
  cmd_synth->add_option("--count", synth.count, "number of samples")->required();
  cmd_synth->add_option("--seed", synth.seed, "rng seed")->required();
  cmd_synth->add_option("--p-pn", synth.p_pn, "wrong-instance injection rate")
      ->required();
  cmd_synth
      ->add_option("--ip-erosion", synth.ip_erosion,
                   "referred-pixel erosion fraction")
      ->required();
  cmd_synth->add_option("--h", synth.height, "canvas height")
      ->capture_default_str();
  cmd_synth->add_option("--w", synth.width, "canvas width")
      ->capture_default_str();
  cmd_synth->add_option("--c", synth.channels, "embedding channels")
      ->capture_default_str();

  detail_cli::TrainArgs train;
  CLI::App* cmd_train =
      app.add_subcommand("train", "fit the confidence and interaction heads");
  cmd_train->add_option("--corpus", train.corpus, "corpus file")->required();
  cmd_train->add_option("--out", train.out, "checkpoint file to write")
      ->required();
  cmd_train->add_option("--iters", train.iters, "optimizer steps")->required();
  cmd_train->add_option("--lr", train.lr, "learning rate")->capture_default_str();
  cmd_train->add_option("--wd", train.wd, "weight decay")->capture_default_str();
  cmd_train->add_option("--seed", train.seed, "rng seed")->required();
  cmd_train->add_flag("--no-cfi", train.no_cfi,
                      "train confidence heads on the raw branches only");

  detail_cli::FuseArgs fuse;
  CLI::App* cmd_fuse =
      app.add_subcommand("fuse", "run one integration mode over a corpus");
  cmd_fuse->add_option("--corpus", fuse.corpus, "corpus file")->required();
  cmd_fuse->add_option("--ckpt", fuse.ckpt,
                       "checkpoint file (needed for si/gsi/gsi+cfi)");
  cmd_fuse
      ->add_option("--mode", fuse.mode,
                   "intersection|union|average|si|gsi|gsi+cfi")
      ->required();
  cmd_fuse->add_option("--tau", fuse.tau, "binarization threshold")
      ->capture_default_str();
  cmd_fuse->add_option("--out", fuse.out, "results file to write")->required();

  detail_cli::EvalArgs eval;
  CLI::App* cmd_eval =
      app.add_subcommand("eval", "score a results file against its corpus");
  cmd_eval->add_option("--results", eval.results, "results file")->required();
  cmd_eval->add_option("--corpus", eval.corpus, "corpus file")->required();
  cmd_eval->add_option("--report", eval.report_csv, "CSV report to write")
      ->required();
  cmd_eval->add_option("--json", eval.report_json, "JSON report to write")
      ->required();

  detail_cli::AnalyzeArgs analyze;
  CLI::App* cmd_analyze = app.add_subcommand(
      "analyze", "distribution-level statistics for one or two result files");
  cmd_analyze->add_option("--results", analyze.results, "results file")
      ->required();
  cmd_analyze->add_option("--results-b", analyze.results_b,
                          "second results file to compare against");
  cmd_analyze->add_flag("--kde", analyze.kde, "emit IoU density curves");
  cmd_analyze->add_flag("--mer", analyze.mer, "emit the mutual-exclusivity rate");
  cmd_analyze->add_flag("--bins", analyze.bins, "emit error-taxonomy bin counts");
  cmd_analyze->add_option("--out", analyze.out, "analysis file to write")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (cmd_synth->parsed()) detail_cli::run_synth(synth);
    if (cmd_train->parsed()) detail_cli::run_train(train);
    if (cmd_fuse->parsed()) detail_cli::run_fuse(fuse);
    if (cmd_eval->parsed()) detail_cli::run_eval(eval);
    if (cmd_analyze->parsed()) detail_cli::run_analyze(analyze);
  } catch (const CorruptFileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

}  // namespace segfuse
