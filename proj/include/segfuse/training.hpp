#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "segfuse/forward.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/model.hpp"

namespace segfuse {

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 5e-2;
  std::size_t iterations = 5000;
  std::size_t batch_size = 24;
  double w_seg = 1.0;
  double w_conf = 1.0;
  std::uint64_t seed = 0;
  bool use_cfi = true;

  void validate() const {
    if (learning_rate <= 0.0 || weight_decay < 0.0)
      throw ConfigError("learning rate must be positive and decay nonnegative");
    if (iterations < 1 || batch_size < 1)
      throw ConfigError("iterations and batch size must be at least 1");
    if (w_seg < 0.0 || w_conf < 0.0)
      throw ConfigError("loss weights must be nonnegative");
  }
};

/// Ground-truth IoU of each branch's binarized map — the regression targets
/// for the confidence heads.
inline std::pair<double, double> branch_iou_targets(const Sample& sample,
                                                    const Tensor& p_td,
                                                    const Tensor& p_bu,
                                                    double tau) {
  const std::size_t h = sample.ground_truth.height;
  const std::size_t w = sample.ground_truth.width;
  const double td =
      iou(binarize(tensor_to_map(p_td, h, w), tau), sample.ground_truth);
  const double bu =
      iou(binarize(tensor_to_map(p_bu, h, w), tau), sample.ground_truth);
  return {td, bu};
}

struct LossParts {
  Tensor total;  // scalar
  double seg = 0.0;
  double conf = 0.0;
};

/// w_seg · BCE(fused, gt) + w_conf · [smooth_l1(conf_td, gt_iou_td) +
/// smooth_l1(conf_bu, gt_iou_bu)]. The BCE op clamps the fused map
/// internally, so the Eq-12 halving never produces log(0).
inline LossParts total_loss(const ForwardOutcome& fwd, const Sample& sample,
                            double gt_iou_td, double gt_iou_bu, double w_seg,
                            double w_conf) {
  const Tensor gt = mask_to_tensor(sample.ground_truth);
  const Tensor seg = binary_cross_entropy_loss(fwd.fused, gt);
  const Tensor conf =
      add(smooth_l1_loss(fwd.conf_td, Tensor::scalar(gt_iou_td)),
          smooth_l1_loss(fwd.conf_bu, Tensor::scalar(gt_iou_bu)));
  LossParts parts;
  parts.seg = seg.item();
  parts.conf = conf.item();
  parts.total = add(mul_scalar(seg, w_seg), mul_scalar(conf, w_conf));
  return parts;
}

/// Decoupled-weight-decay adaptive-moment optimizer.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamRegistry& params) {
    ++t_;
    if (m_.empty()) {
      m_.resize(params.entries().size());
      v_.resize(params.entries().size());
      for (std::size_t i = 0; i < params.entries().size(); ++i) {
        m_[i].assign(params.entries()[i].second.size(), 0.0);
        v_[i].assign(params.entries()[i].second.size(), 0.0);
      }
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.entries().size(); ++i) {
      Tensor param = params.entries()[i].second;
      if (!param.requires_grad()) continue;
      const std::vector<double>& grad = param.grad();
      std::vector<double>& values = param.mutable_values();
      if (grad.empty()) {
        // Never reached by a backward pass this step: decay still applies.
        for (double& p : values) p -= lr_ * wd_ * p;
        continue;
      }
      for (const double g : grad)
        if (!std::isfinite(g))
          throw TrainingError("non-finite gradient for parameter " +
                              params.entries()[i].first);
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double g = grad[k];
        m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
        v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i][k] / bc1;
        const double vhat = v_[i][k] / bc2;
        values[k] -= lr_ * wd_ * values[k];
        values[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct IterationMetrics {
  double total = 0.0;
  double seg = 0.0;
  double conf = 0.0;
};

using TrainingCurve = std::vector<IterationMetrics>;

/// One optimizer update over a batch of sample indices. Per-sample backward
/// passes accumulate into the leaf gradients (scaled to a batch mean) before
/// the single AdamW step.
inline IterationMetrics train_step(const std::vector<Sample>& corpus,
                                   const std::vector<std::size_t>& batch,
                                   FusionModel& model, const ParamRegistry& params,
                                   AdamW& opt, const TrainConfig& cfg, Rng& rng) {
  params.zero_grad();
  IterationMetrics metrics;
  const double invb = 1.0 / static_cast<double>(batch.size());
  const FuseMode mode = cfg.use_cfi ? FuseMode::GsiCfi : FuseMode::Gsi;
  for (const std::size_t idx : batch) {
    const Sample& sample = corpus[idx];
    ForwardOutcome fwd =
        forward_learned(sample, model, mode, SampleMode::Train, rng);
    const auto targets =
        branch_iou_targets(sample, fwd.p_td, fwd.p_bu, kDefaultTau);
    LossParts parts = total_loss(fwd, sample, targets.first, targets.second,
                                 cfg.w_seg, cfg.w_conf);

    // Auxiliary point-confidence regression keeps the no-distribution heads
    // usable from the same checkpoint.
    const Tensor si_td = point_confidence_topdown(fwd.selected_embedding, model.point_td);
    const Tensor si_bu = point_confidence_bottomup(sample.pixels, fwd.p_bu, model.point_bu);
    const Tensor aux =
        add(smooth_l1_loss(si_td, Tensor::scalar(targets.first)),
            smooth_l1_loss(si_bu, Tensor::scalar(targets.second)));

    add(parts.total, aux).backward({invb});
    metrics.total += parts.total.item() * invb;
    metrics.seg += parts.seg * invb;
    metrics.conf += parts.conf * invb;
  }
  opt.step(params);
  return metrics;
}

/// Shuffled mini-batch optimization; reshuffles whenever the corpus is
/// exhausted. Deterministic for a fixed seed and config.
inline TrainingCurve fit(const std::vector<Sample>& corpus, FusionModel& model,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw InvalidInputError("fit: empty corpus");
  const ParamRegistry params = model.registry();
  AdamW opt(cfg.learning_rate, cfg.weight_decay);
  Rng shuffle_rng = Rng::derived(cfg.seed, 0x7368756666ULL);
  Rng sample_rng = Rng::derived(cfg.seed, 0x73616d706cULL);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  TrainingCurve curve;
  curve.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> batch;
    batch.reserve(cfg.batch_size);
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    curve.push_back(
        train_step(corpus, batch, model, params, opt, cfg, sample_rng));
  }
  return curve;
}

}  // namespace segfuse
