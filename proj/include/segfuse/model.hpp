#pragma once

#include <cstddef>
#include <cstdint>

#include "segfuse/branches.hpp"
#include "segfuse/integration.hpp"
#include "segfuse/interaction.hpp"
#include "segfuse/nn.hpp"

namespace segfuse {

/// Every learnable piece of the fusion stage. The per-pixel decode head is
/// frozen (the branches it decodes are fixed inputs); everything else trains.
struct FusionModel {
  std::size_t channels = 0;
  InteractionConfig interaction_cfg;
  InteractionParams interaction;
  LinearHead base_head;      // frozen
  Tensor extension_weights;  // [1, C], zero-initialized
  Mlp3 dist_td, dist_bu;     // distribution heads, C -> C -> C/2 -> 2
  Mlp3 point_td, point_bu;   // point-estimate heads, C -> C -> C/2 -> 1

  static FusionModel init(std::size_t channels, InteractionConfig cfg,
                          std::uint64_t seed) {
    if (channels < 2) throw ConfigError("model needs at least two channels");
    cfg.hidden_dim = channels;
    cfg.validate();
    FusionModel m;
    m.channels = channels;
    m.interaction_cfg = cfg;
    Rng rng = Rng::derived(seed, 0x6d6f64656cULL);
    m.interaction = InteractionParams(cfg, rng);
    // Convention shared with the synthetic corpus: channel 0 carries the
    // branch logit, so a frozen unit-weight head reproduces the stored map.
    std::vector<double> w(channels, 0.0);
    w[0] = 1.0;
    m.base_head = LinearHead(Tensor::from_data({1, channels}, std::move(w)),
                             Tensor::zeros({1}));
    m.extension_weights = Tensor::zeros({1, channels}, /*requires_grad=*/true);
    const std::size_t half = channels / 2;
    m.dist_td = Mlp3(channels, channels, half, 2, rng);
    m.dist_bu = Mlp3(channels, channels, half, 2, rng);
    m.point_td = Mlp3(channels, channels, half, 1, rng);
    m.point_bu = Mlp3(channels, channels, half, 1, rng);
    return m;
  }

  /// Serialization/optimization order. Frozen tensors are included so
  /// checkpoints are self-contained; the optimizer skips them by
  /// requires_grad.
  ParamRegistry registry() const {
    ParamRegistry reg;
    interaction.register_params(reg, "cfi");
    reg.add("decode.base.weight", base_head.weight);
    reg.add("decode.base.bias", base_head.bias);
    reg.add("decode.extension", extension_weights);
    dist_td.register_params(reg, "gsi.dist_td");
    dist_bu.register_params(reg, "gsi.dist_bu");
    point_td.register_params(reg, "si.point_td");
    point_bu.register_params(reg, "si.point_bu");
    return reg;
  }
};

}  // namespace segfuse
