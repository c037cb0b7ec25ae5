#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "segfuse/mask.hpp"
#include "segfuse/ops.hpp"
#include "segfuse/tensor.hpp"

namespace segfuse {

/// Top-down branch output: n instance masks, their embeddings, and
/// query-alignment scores.
struct InstanceTripletSet {
  std::vector<BinaryMask> masks;
  Tensor embeddings;           // [n, C]
  std::vector<double> scores;  // n values in [0, 1]

  std::size_t count() const { return masks.size(); }
  std::size_t channels() const { return embeddings.shape()[1]; }

  void validate() const {
    if (masks.empty())
      throw InvalidInputError("instance triplet set must hold at least one instance");
    if (embeddings.rank() != 2 || embeddings.shape()[0] != masks.size())
      throw DimensionError("embeddings shape " + shape_str(embeddings.shape()) +
                           " does not match " + std::to_string(masks.size()) +
                           " masks");
    if (scores.size() != masks.size())
      throw DimensionError("score count " + std::to_string(scores.size()) +
                           " does not match " + std::to_string(masks.size()) +
                           " masks");
    for (std::size_t j = 1; j < masks.size(); ++j)
      if (masks[j].height != masks[0].height || masks[j].width != masks[0].width)
        throw DimensionError("instance masks disagree on spatial shape");
    for (const double s : scores)
      if (!(s >= 0.0 && s <= 1.0))
        throw InvalidInputError("alignment score " + std::to_string(s) +
                                " outside [0,1]");
  }

  /// Constant [n, H*W] matrix of mask indicators, one mask per row.
  Tensor mask_matrix() const {
    const std::size_t n = masks.size(), hw = masks[0].size();
    std::vector<double> data(n * hw);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < hw; ++p) data[j * hw + p] = masks[j].bits[p];
    return Tensor::from_data({n, hw}, std::move(data));
  }
};

/// Bottom-up branch features: C channels over an H×W grid, stored as a
/// [C, H*W] matrix (channel-major, row-major pixels).
struct PixelEmbeddings {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor data;  // [C, H*W]

  PixelEmbeddings() = default;
  PixelEmbeddings(std::size_t c, std::size_t h, std::size_t w, Tensor t)
      : channels(c), height(h), width(w), data(std::move(t)) {
    if (data.rank() != 2 || data.shape()[0] != c || data.shape()[1] != h * w)
      throw DimensionError("pixel embedding tensor shape " +
                           shape_str(data.shape()) + " does not match " +
                           std::to_string(c) + " channels over " +
                           std::to_string(h) + "x" + std::to_string(w));
  }

  std::size_t pixel_count() const { return height * width; }
};

/// One evaluation unit: ground truth plus both branches' raw outputs.
struct Sample {
  std::string id;
  BinaryMask ground_truth;
  InstanceTripletSet triplet;
  PixelEmbeddings pixels;
  ProbabilityMap bottom_up;

  void validate() const {
    triplet.validate();
    const std::size_t h = ground_truth.height, w = ground_truth.width;
    if (triplet.masks[0].height != h || triplet.masks[0].width != w)
      throw DimensionError("triplet masks do not match ground-truth shape");
    if (pixels.height != h || pixels.width != w)
      throw DimensionError("pixel embeddings do not match ground-truth shape");
    if (bottom_up.height != h || bottom_up.width != w)
      throw DimensionError("bottom-up map does not match ground-truth shape");
    if (pixels.channels != triplet.channels())
      throw DimensionError("pixel channel count " +
                           std::to_string(pixels.channels) +
                           " differs from instance embedding dim " +
                           std::to_string(triplet.channels()));
  }
};

/// The per-pixel logit-regression head (a 1x1 convolution): weight [1, C],
/// shared bias.
struct LinearHead {
  Tensor weight;  // [1, C]
  Tensor bias;    // [1]

  LinearHead() = default;
  LinearHead(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rank() != 2 || weight.shape()[0] != 1)
      throw DimensionError("head weight must be [1, C], got " +
                           shape_str(weight.shape()));
    if (bias.size() != 1)
      throw DimensionError("head bias must be a scalar");
  }

  std::size_t in_channels() const { return weight.shape()[1]; }

  /// Raw logits [1, H*W] for a [C, H*W] feature matrix.
  Tensor logits(const Tensor& features) const {
    if (features.rank() != 2 || features.shape()[0] != in_channels())
      throw DimensionError("head expects " + std::to_string(in_channels()) +
                           " channels, got " + shape_str(features.shape()));
    return add_scalar(matmul(weight, features), bias.values()[0]);
  }
};

struct TopdownResult {
  ProbabilityMap map;
  std::size_t chosen_index = 0;
};

/// Scales the best-scoring instance mask by its score; ties keep the lowest
/// index.
inline TopdownResult extract_topdown_result(const InstanceTripletSet& triplet) {
  if (triplet.masks.empty())
    throw InvalidInputError("cannot extract a result from an empty triplet set");
  const std::size_t best = argmax_index(triplet.scores);
  const BinaryMask& m = triplet.masks[best];
  TopdownResult result;
  result.chosen_index = best;
  result.map = ProbabilityMap(m.height, m.width);
  const double s = triplet.scores[best];
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    result.map.values[i] = m.bits[i] ? s : 0.0;
  return result;
}

/// Per-pixel affine map over the C channels followed by sigmoid.
inline Tensor decode_bottomup_tensor(const PixelEmbeddings& pixels,
                                     const LinearHead& head) {
  if (head.in_channels() != pixels.channels)
    throw DimensionError("decode head expects " +
                         std::to_string(head.in_channels()) +
                         " channels, pixel embeddings carry " +
                         std::to_string(pixels.channels));
  return sigmoid(head.logits(pixels.data));
}

inline ProbabilityMap decode_bottomup(const PixelEmbeddings& pixels,
                                      const LinearHead& head) {
  NoGradGuard no_grad;
  return tensor_to_map(decode_bottomup_tensor(pixels, head), pixels.height,
                       pixels.width);
}

}  // namespace segfuse
