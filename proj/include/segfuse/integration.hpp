#pragma once

#include <cstddef>
#include <vector>

#include "segfuse/branches.hpp"
#include "segfuse/nn.hpp"
#include "segfuse/ops.hpp"
#include "segfuse/rng.hpp"

namespace segfuse {

struct PerformanceDistribution {
  double mu = 0.0;
  double sigma = 0.0;  // kept nonnegative by the softplus head
};

/// Differentiable (μ, σ) pair straight from a prediction head.
struct DistributionPrediction {
  Tensor mu;     // [1], in (0,1)
  Tensor sigma;  // [1], positive

  PerformanceDistribution value() const { return {mu.item(), sigma.item()}; }
};

enum class SampleMode { Train, Infer };

/// Head output split into (raw_mu, raw_sigma); μ is squashed by sigmoid since
/// it targets an IoU, σ made positive by softplus.
inline DistributionPrediction predict_distribution(const Tensor& input,
                                                   const Mlp3& head) {
  const Tensor out = head.forward(input);  // [1, 2]
  if (out.rank() != 2 || out.shape()[0] != 1 || out.shape()[1] != 2)
    throw DimensionError("distribution head must emit [1, 2], got " +
                         shape_str(out.shape()));
  DistributionPrediction pred;
  pred.mu = reshape(sigmoid(slice_cols(out, 0, 1)), {1});
  pred.sigma = reshape(softplus(slice_cols(out, 1, 2)), {1});
  return pred;
}

/// Eq-style top-down confidence: the head reads the selected instance
/// embedding.
inline DistributionPrediction predict_distribution_topdown(
    const Tensor& selected_embedding, const Mlp3& head) {
  if (selected_embedding.rank() != 2 || selected_embedding.shape()[0] != 1)
    throw DimensionError("selected embedding must be [1, C], got " +
                         shape_str(selected_embedding.shape()));
  return predict_distribution(selected_embedding, head);
}

/// Global average pool of E_p masked by the branch map, then the head. The map
/// broadcast is per pixel across all channels.
inline Tensor pooled_masked_embedding(const PixelEmbeddings& pixels,
                                      const Tensor& map /* [1, H*W] */) {
  if (map.rank() != 2 || map.shape()[0] != 1 ||
      map.shape()[1] != pixels.pixel_count())
    throw DimensionError("map " + shape_str(map.shape()) +
                         " does not cover " + std::to_string(pixels.pixel_count()) +
                         " pixels");
  // GAP(E_p ⊙ P) = (E_p · Pᵀ) / (H*W), channel by channel.
  const Tensor col = matmul(pixels.data, transpose(map));  // [C, 1]
  return mul_scalar(transpose(col), 1.0 / static_cast<double>(pixels.pixel_count()));
}

inline DistributionPrediction predict_distribution_bottomup(
    const PixelEmbeddings& pixels, const Tensor& map, const Mlp3& head) {
  return predict_distribution(pooled_masked_embedding(pixels, map), head);
}

/// Reparameterized draw μ + σ·ε (train) or the mean (infer). Gradients reach μ
/// with coefficient 1 and σ with coefficient ε.
inline Tensor sample_confidence_t(const DistributionPrediction& dist,
                                  SampleMode mode, Rng& rng) {
  if (mode == SampleMode::Infer) return dist.mu;
  const double eps = rng.normal();
  return add(dist.mu, mul_scalar(dist.sigma, eps));
}

inline double sample_confidence(const PerformanceDistribution& dist,
                                SampleMode mode, Rng& rng) {
  if (mode == SampleMode::Infer) return dist.mu;
  return dist.mu + dist.sigma * rng.normal();
}

/// Eq-11 spatial map Σ_j m^j · λ^j · ŝ^j as a [1, H*W] tensor; the forward
/// value equals the hard re-selection, while gradients reach the scores both
/// through λ (straight-through) and the explicit ŝ factor.
inline Tensor differentiable_topdown(const Tensor& mask_matrix /* [n, H*W] */,
                                     const Tensor& lambda /* [n] or [n,1] */,
                                     const Tensor& scores /* [n] or [n,1] */) {
  const std::size_t n = mask_matrix.shape()[0];
  if (lambda.size() != n || scores.size() != n)
    throw DimensionError("selection/score lengths do not match " +
                         std::to_string(n) + " masks");
  const Tensor weights =
      reshape(multiply(reshape(lambda, {1, n}), reshape(scores, {1, n})), {1, n});
  return matmul(weights, mask_matrix);  // [1, H*W]
}

/// Confidence-weighted fusion (P_td·iou_td + P_bu·iou_bu) / 2.
inline Tensor blend(const Tensor& p_td, const Tensor& p_bu, const Tensor& iou_td,
                    const Tensor& iou_bu) {
  if (p_td.shape() != p_bu.shape())
    throw DimensionError("blend: map shapes disagree, " + shape_str(p_td.shape()) +
                         " vs " + shape_str(p_bu.shape()));
  if (iou_td.size() != 1 || iou_bu.size() != 1)
    throw DimensionError("blend: confidences must be scalars");
  return mul_scalar(add(mul_scalar_tensor(p_td, iou_td),
                        mul_scalar_tensor(p_bu, iou_bu)),
                    0.5);
}

struct BlendResult {
  ProbabilityMap fused;
  double iou_td = 0.0;
  double iou_bu = 0.0;
  std::vector<double> lambda;
  PerformanceDistribution dist_td;
  PerformanceDistribution dist_bu;
};

/// Point-estimate confidence (the no-distribution ablation): same trunk shape,
/// single sigmoid output, no σ and no sampling.
inline Tensor point_confidence(const Tensor& input, const Mlp3& head) {
  const Tensor out = head.forward(input);
  if (out.size() != 1)
    throw DimensionError("point confidence head must emit one value, got " +
                         shape_str(out.shape()));
  return reshape(sigmoid(out), {1});
}

inline Tensor point_confidence_topdown(const Tensor& selected_embedding,
                                       const Mlp3& head) {
  if (selected_embedding.rank() != 2 || selected_embedding.shape()[0] != 1)
    throw DimensionError("selected embedding must be [1, C], got " +
                         shape_str(selected_embedding.shape()));
  return point_confidence(selected_embedding, head);
}

inline Tensor point_confidence_bottomup(const PixelEmbeddings& pixels,
                                        const Tensor& map, const Mlp3& head) {
  return point_confidence(pooled_masked_embedding(pixels, map), head);
}

}  // namespace segfuse
