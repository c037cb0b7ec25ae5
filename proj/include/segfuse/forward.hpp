#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "segfuse/integration.hpp"
#include "segfuse/interaction.hpp"
#include "segfuse/model.hpp"

namespace segfuse {

enum class FuseMode { Intersection, Union, Average, Si, Gsi, GsiCfi };

inline FuseMode parse_fuse_mode(const std::string& name) {
  if (name == "intersection") return FuseMode::Intersection;
  if (name == "union") return FuseMode::Union;
  if (name == "average") return FuseMode::Average;
  if (name == "si") return FuseMode::Si;
  if (name == "gsi") return FuseMode::Gsi;
  if (name == "gsi+cfi") return FuseMode::GsiCfi;
  throw ConfigError("unknown fuse mode: " + name);
}

inline const char* fuse_mode_name(FuseMode mode) {
  switch (mode) {
    case FuseMode::Intersection: return "intersection";
    case FuseMode::Union: return "union";
    case FuseMode::Average: return "average";
    case FuseMode::Si: return "si";
    case FuseMode::Gsi: return "gsi";
    case FuseMode::GsiCfi: return "gsi+cfi";
  }
  return "?";
}

inline bool fuse_mode_learned(FuseMode mode) {
  return mode == FuseMode::Si || mode == FuseMode::Gsi || mode == FuseMode::GsiCfi;
}

/// Full interaction-stage output for one sample.
struct CfiOutput {
  Tensor enhanced_embeddings;                         // [n, C]
  Tensor enhanced_scores;                             // [n, 1]
  std::vector<std::vector<double>> per_layer_scores;  // L lists
  Tensor enhanced_pixels;                             // [2C, H*W]
  Tensor updated_topdown;                             // [1, H*W]
  Tensor updated_bottomup;                            // [1, H*W]
  Tensor lambda;                                      // [n, 1]
  std::size_t chosen_index = 0;
};

inline CfiOutput run_cfi(const Sample& sample, const FusionModel& model,
                         InteractionTrace* trace = nullptr) {
  CfiOutput out;
  const Tensor modulated = modulate_embeddings(sample.triplet);
  FeatureInteractionResult fi = feature_interaction(
      modulated, sample.pixels, model.interaction_cfg, model.interaction, trace);
  out.enhanced_embeddings = fi.enhanced;
  out.enhanced_scores = fi.scores;
  out.per_layer_scores = std::move(fi.per_layer_scores);

  const Tensor mask_matrix = sample.triplet.mask_matrix();
  const Tensor assigned =
      assign_instances_to_pixels(out.enhanced_embeddings, mask_matrix);
  out.enhanced_pixels = enhance_pixel_embeddings(sample.pixels, assigned);
  out.updated_bottomup =
      decode_enhanced(out.enhanced_pixels, model.base_head, model.extension_weights);

  out.lambda = straight_through_select(out.enhanced_scores);
  out.chosen_index = argmax_index(out.enhanced_scores.values());
  out.updated_topdown =
      differentiable_topdown(mask_matrix, out.lambda, out.enhanced_scores);
  return out;
}

/// One sample through a learned integration path.
struct ForwardOutcome {
  Tensor p_td;     // [1, H*W]
  Tensor p_bu;     // [1, H*W]
  Tensor conf_td;  // [1]
  Tensor conf_bu;  // [1]
  Tensor fused;    // [1, H*W]
  DistributionPrediction dist_td, dist_bu;  // defined for gsi modes
  Tensor selected_embedding;                // [1, C]
  std::vector<double> refined_scores;       // Ŝ (or the original S)
  std::vector<std::vector<double>> per_layer_scores;
  std::size_t chosen_index = 0;
};

inline ForwardOutcome forward_learned(const Sample& sample, const FusionModel& model,
                                      FuseMode mode, SampleMode sampling, Rng& rng,
                                      InteractionTrace* trace = nullptr) {
  if (!fuse_mode_learned(mode))
    throw ConfigError(std::string("mode ") + fuse_mode_name(mode) +
                      " has no learned forward pass");
  ForwardOutcome out;
  if (mode == FuseMode::GsiCfi) {
    CfiOutput cfi = run_cfi(sample, model, trace);
    out.p_td = cfi.updated_topdown;
    out.p_bu = cfi.updated_bottomup;
    out.refined_scores = cfi.enhanced_scores.values();
    out.per_layer_scores = std::move(cfi.per_layer_scores);
    out.chosen_index = cfi.chosen_index;
    out.selected_embedding =
        select_row(cfi.enhanced_embeddings, cfi.chosen_index);
  } else {
    const Tensor mask_matrix = sample.triplet.mask_matrix();
    const Tensor scores =
        Tensor::from_data({sample.triplet.count()}, sample.triplet.scores);
    const Tensor lambda = straight_through_select(scores);
    out.p_td = differentiable_topdown(mask_matrix, lambda, scores);
    out.p_bu = map_to_tensor(sample.bottom_up);
    out.refined_scores = sample.triplet.scores;
    out.chosen_index = argmax_index(sample.triplet.scores);
    out.selected_embedding =
        select_row(sample.triplet.embeddings, out.chosen_index);
  }

  if (mode == FuseMode::Si) {
    out.conf_td = point_confidence_topdown(out.selected_embedding, model.point_td);
    out.conf_bu = point_confidence_bottomup(sample.pixels, out.p_bu, model.point_bu);
  } else {
    out.dist_td = predict_distribution_topdown(out.selected_embedding, model.dist_td);
    out.dist_bu = predict_distribution_bottomup(sample.pixels, out.p_bu, model.dist_bu);
    out.conf_td = sample_confidence_t(out.dist_td, sampling, rng);
    out.conf_bu = sample_confidence_t(out.dist_bu, sampling, rng);
  }
  out.fused = blend(out.p_td, out.p_bu, out.conf_td, out.conf_bu);
  return out;
}

}  // namespace segfuse
