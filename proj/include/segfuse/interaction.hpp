#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "segfuse/branches.hpp"
#include "segfuse/nn.hpp"
#include "segfuse/ops.hpp"

namespace segfuse {

struct InteractionConfig {
  std::size_t num_layers = 3;
  std::size_t num_heads = 4;
  std::size_t hidden_dim = 16;  // C
  std::size_t ffn_dim = 0;      // 0 -> 4C

  std::size_t effective_ffn_dim() const {
    return ffn_dim ? ffn_dim : 4 * hidden_dim;
  }

  void validate() const {
    if (num_layers < 1 || num_heads < 1 || hidden_dim < 1)
      throw ConfigError("interaction config requires positive layer/head/dim counts");
    if (hidden_dim % num_heads != 0)
      throw ConfigError("hidden dim " + std::to_string(hidden_dim) +
                        " not divisible by " + std::to_string(num_heads) +
                        " heads");
  }
};

/// Fixed 2-D sinusoidal encoding over an H×W grid: first C/2 channels encode
/// the row coordinate, the rest the column, alternating sin/cos with
/// geometrically spaced frequencies. Returned as [H*W, C].
inline Tensor sinusoidal_positions(std::size_t h, std::size_t w, std::size_t c) {
  if (c % 2 != 0)
    throw ConfigError("positional encoding needs an even channel count");
  const std::size_t half = c / 2;
  std::vector<double> data(h * w * c, 0.0);
  auto fill = [&](std::size_t offset, std::size_t coord, std::size_t p) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i / 2) /
                                static_cast<double>(half));
      const double angle = static_cast<double>(coord) * freq;
      data[p * c + offset + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      fill(0, y, p);
      fill(half, x, p);
    }
  return Tensor::from_data({h * w, c}, std::move(data));
}

struct AttentionParams {
  Linear wq, wk, wv, wo;

  AttentionParams() = default;
  AttentionParams(std::size_t dim, Rng& rng)
      : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng) {}

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    wq.register_params(reg, prefix + ".wq");
    wk.register_params(reg, prefix + ".wk");
    wv.register_params(reg, prefix + ".wv");
    wo.register_params(reg, prefix + ".wo");
  }
};

struct DecoderLayerParams {
  AttentionParams cross_attn;
  AttentionParams self_attn;
  Linear ffn1, ffn2;
  LayerNormParams norm_cross, norm_self, norm_ffn;

  DecoderLayerParams() = default;
  DecoderLayerParams(std::size_t dim, std::size_t ffn_dim, Rng& rng)
      : cross_attn(dim, rng),
        self_attn(dim, rng),
        ffn1(dim, ffn_dim, rng),
        ffn2(ffn_dim, dim, rng),
        norm_cross(dim),
        norm_self(dim),
        norm_ffn(dim) {}

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    cross_attn.register_params(reg, prefix + ".cross");
    self_attn.register_params(reg, prefix + ".self");
    ffn1.register_params(reg, prefix + ".ffn1");
    ffn2.register_params(reg, prefix + ".ffn2");
    norm_cross.register_params(reg, prefix + ".norm_cross");
    norm_self.register_params(reg, prefix + ".norm_self");
    norm_ffn.register_params(reg, prefix + ".norm_ffn");
  }
};

struct InteractionParams {
  std::vector<DecoderLayerParams> layers;
  Mlp3 score_head;  // shared across layers: C -> C -> C -> 1, then sigmoid

  InteractionParams() = default;
  InteractionParams(const InteractionConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t c = cfg.hidden_dim;
    for (std::size_t l = 0; l < cfg.num_layers; ++l)
      layers.emplace_back(c, cfg.effective_ffn_dim(), rng);
    score_head = Mlp3(c, c, c, 1, rng);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].register_params(reg, prefix + ".layer" + std::to_string(l));
    score_head.register_params(reg, prefix + ".score_head");
  }
};

/// Per-layer attention distributions (values only), one [heads*queries] list of
/// key-distributions per layer.
struct InteractionTrace {
  std::vector<std::vector<std::vector<double>>> cross_attention;
  std::vector<std::vector<std::vector<double>>> self_attention;
};

namespace detail_attn {

inline void record_rows(const Tensor& att, std::size_t nk,
                        std::vector<std::vector<double>>& sink) {
  const std::size_t rows = att.shape()[0];
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row(nk);
    for (std::size_t j = 0; j < nk; ++j) row[j] = att(r, j);
    sink.push_back(std::move(row));
  }
}

}  // namespace detail_attn

/// Scaled dot-product multi-head attention. Positions (when defined) are added
/// to the key inputs only.
inline Tensor multi_head_attention(const Tensor& queries_in, const Tensor& keys_in,
                                   const AttentionParams& params,
                                   std::size_t num_heads,
                                   const Tensor& key_positions = Tensor(),
                                   std::vector<std::vector<double>>* trace = nullptr) {
  const std::size_t c = queries_in.shape()[1];
  if (keys_in.shape()[1] != c)
    throw DimensionError("attention key dim " + shape_str(keys_in.shape()) +
                         " does not match query dim " +
                         shape_str(queries_in.shape()));
  if (c % num_heads != 0)
    throw ConfigError("attention dim not divisible by head count");
  Tensor key_src = keys_in;
  if (key_positions.defined()) {
    if (key_positions.shape() != keys_in.shape())
      throw DimensionError("key positions shape " +
                           shape_str(key_positions.shape()) +
                           " does not match keys " + shape_str(keys_in.shape()));
    key_src = add(keys_in, key_positions);
  }
  const Tensor q = params.wq.forward(queries_in);
  const Tensor k = params.wk.forward(key_src);
  const Tensor v = params.wv.forward(keys_in);
  const std::size_t d = c / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const std::size_t nk = keys_in.shape()[0];
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Tensor qh = slice_cols(q, h * d, (h + 1) * d);
    const Tensor kh = slice_cols(k, h * d, (h + 1) * d);
    const Tensor vh = slice_cols(v, h * d, (h + 1) * d);
    const Tensor att = softmax(mul_scalar(matmul(qh, transpose(kh)), scale), 1);
    if (trace) detail_attn::record_rows(att, nk, *trace);
    heads.push_back(matmul(att, vh));
  }
  return params.wo.forward(concat_cols(heads));
}

/// Row j of the result is E^j scaled by its alignment score s^j.
inline Tensor modulate_embeddings(const InstanceTripletSet& triplet) {
  triplet.validate();
  Tensor scores = Tensor::from_data({triplet.count()}, triplet.scores);
  return scale_rows(triplet.embeddings, scores);
}

struct FeatureInteractionResult {
  Tensor enhanced;  // [n, C]
  Tensor scores;    // [n, 1], in (0,1)
  std::vector<std::vector<double>> per_layer_scores;  // L lists of n values
};

/// L pre-norm decoder layers over the instance tokens: cross-attention into
/// the pixel tokens, then self-attention, then feed-forward, each as a
/// residual branch. A shared score head reads every layer's tokens; the last
/// layer's scores are the refined alignment scores.
inline FeatureInteractionResult feature_interaction(
    const Tensor& modulated, const PixelEmbeddings& pixels,
    const InteractionConfig& cfg, const InteractionParams& params,
    InteractionTrace* trace = nullptr) {
  cfg.validate();
  if (modulated.rank() != 2 || modulated.shape()[1] != cfg.hidden_dim)
    throw DimensionError("instance tokens " + shape_str(modulated.shape()) +
                         " do not match hidden dim " +
                         std::to_string(cfg.hidden_dim));
  if (pixels.channels != cfg.hidden_dim)
    throw DimensionError("pixel channels " + std::to_string(pixels.channels) +
                         " do not match hidden dim " +
                         std::to_string(cfg.hidden_dim));
  if (params.layers.size() != cfg.num_layers)
    throw ConfigError("parameter set holds " + std::to_string(params.layers.size()) +
                      " layers, config expects " + std::to_string(cfg.num_layers));

  const Tensor pixel_tokens = transpose(pixels.data);  // [H*W, C]
  const Tensor positions =
      sinusoidal_positions(pixels.height, pixels.width, cfg.hidden_dim);

  FeatureInteractionResult out;
  Tensor x = modulated;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const DecoderLayerParams& layer = params.layers[l];
    std::vector<std::vector<double>>* cross_sink = nullptr;
    std::vector<std::vector<double>>* self_sink = nullptr;
    if (trace) {
      trace->cross_attention.emplace_back();
      trace->self_attention.emplace_back();
      cross_sink = &trace->cross_attention.back();
      self_sink = &trace->self_attention.back();
    }
    x = add(x, multi_head_attention(layer.norm_cross.forward(x), pixel_tokens,
                                    layer.cross_attn, cfg.num_heads, positions,
                                    cross_sink));
    const Tensor normed = layer.norm_self.forward(x);
    x = add(x, multi_head_attention(normed, normed, layer.self_attn,
                                    cfg.num_heads, Tensor(), self_sink));
    x = add(x, layer.ffn2.forward(relu(layer.ffn1.forward(layer.norm_ffn.forward(x)))));

    const Tensor layer_scores = sigmoid(params.score_head.forward(x));
    out.per_layer_scores.push_back(layer_scores.values());
    if (l + 1 == cfg.num_layers) {
      out.enhanced = x;
      out.scores = layer_scores;
    }
  }
  return out;
}

/// Re-selects the reported mask using refined scores (same rule as the base
/// extraction, ties to the lowest index).
inline TopdownResult update_topdown(const InstanceTripletSet& triplet,
                                    const std::vector<double>& refined_scores) {
  if (refined_scores.size() != triplet.count())
    throw DimensionError("refined score count " +
                         std::to_string(refined_scores.size()) +
                         " does not match " + std::to_string(triplet.count()) +
                         " instances");
  const std::size_t best = argmax_index(refined_scores);
  const BinaryMask& m = triplet.masks[best];
  TopdownResult result;
  result.chosen_index = best;
  result.map = ProbabilityMap(m.height, m.width);
  const double s = refined_scores[best];
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    result.map.values[i] = m.bits[i] ? s : 0.0;
  return result;
}

/// At every pixel, sums the embeddings of all instances whose mask covers it
/// (zero vector where nothing does). mask_matrix is the [n, H*W] indicator.
inline Tensor assign_instances_to_pixels(const Tensor& enhanced,
                                         const Tensor& mask_matrix) {
  if (enhanced.rank() != 2 || mask_matrix.rank() != 2 ||
      enhanced.shape()[0] != mask_matrix.shape()[0])
    throw DimensionError("instance count mismatch between embeddings " +
                         shape_str(enhanced.shape()) + " and masks " +
                         shape_str(mask_matrix.shape()));
  return matmul(transpose(enhanced), mask_matrix);  // [C, H*W]
}

/// Channel-wise concatenation: original C channels first, assigned C second.
inline Tensor enhance_pixel_embeddings(const PixelEmbeddings& pixels,
                                       const Tensor& assigned) {
  if (assigned.shape() != pixels.data.shape())
    throw DimensionError("assigned embeddings " + shape_str(assigned.shape()) +
                         " do not match pixel embeddings " +
                         shape_str(pixels.data.shape()));
  return concat_rows(pixels.data, assigned);  // [2C, H*W]
}

/// Decodes the doubled channels with the original head on the first half and a
/// trainable extension on the appended half; with a zero extension this equals
/// the base decode bitwise.
inline Tensor decode_enhanced(const Tensor& enhanced, const LinearHead& base_head,
                              const Tensor& extension_weights) {
  const std::size_t c = base_head.in_channels();
  if (enhanced.rank() != 2 || enhanced.shape()[0] != 2 * c)
    throw DimensionError("enhanced features " + shape_str(enhanced.shape()) +
                         " do not provide 2x" + std::to_string(c) + " channels");
  if (extension_weights.rank() != 2 || extension_weights.shape()[0] != 1 ||
      extension_weights.shape()[1] != c)
    throw DimensionError("extension weights must be [1, " + std::to_string(c) +
                         "], got " + shape_str(extension_weights.shape()));
  const Tensor base_logits = base_head.logits(slice_rows(enhanced, 0, c));
  const Tensor ext_logits = matmul(extension_weights, slice_rows(enhanced, c, 2 * c));
  return sigmoid(add(base_logits, ext_logits));
}

}  // namespace segfuse
