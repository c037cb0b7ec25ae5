#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "segfuse/ops.hpp"
#include "segfuse/rng.hpp"
#include "segfuse/tensor.hpp"

namespace segfuse {

/// Flat, ordered view of every trainable tensor in a model. Insertion order is
/// the serialization order, names are the lookup keys.
class ParamRegistry {
 public:
  void add(const std::string& name, const Tensor& t) {
    for (const auto& e : entries_)
      if (e.first == name)
        throw ConfigError("duplicate parameter name: " + name);
    entries_.emplace_back(name, t);
  }

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }

  Tensor find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return e.second;
    throw ConfigError("unknown parameter name: " + name);
  }

  bool contains(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return true;
    return false;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  void zero_grad() const {
    for (const auto& e : entries_) e.second.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng,
                             bool requires_grad = true) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(fan_in * fan_out);
  for (double& v : data) v = rng.uniform(-limit, limit);
  return Tensor::from_data({fan_in, fan_out}, std::move(data), requires_grad);
}

/// y = x W + b with x of shape [rows, in], W of shape [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng)
      : weight(xavier_uniform(in, out, rng)),
        bias(Tensor::zeros({out}, /*requires_grad=*/true)) {}

  Tensor forward(const Tensor& x) const {
    return add_rowvec(matmul(x, weight), bias);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".weight", weight);
    reg.add(prefix + ".bias", bias);
  }
};

/// Three linear layers with ReLU between them.
struct Mlp3 {
  Linear l1, l2, l3;

  Mlp3() = default;
  Mlp3(std::size_t in, std::size_t h1, std::size_t h2, std::size_t out, Rng& rng)
      : l1(in, h1, rng), l2(h1, h2, rng), l3(h2, out, rng) {}

  Tensor forward(const Tensor& x) const {
    return l3.forward(relu(l2.forward(relu(l1.forward(x)))));
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    l1.register_params(reg, prefix + ".l1");
    l2.register_params(reg, prefix + ".l2");
    l3.register_params(reg, prefix + ".l3");
  }
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  LayerNormParams() = default;
  explicit LayerNormParams(std::size_t dim)
      : gamma(Tensor::full({dim}, 1.0, /*requires_grad=*/true)),
        beta(Tensor::zeros({dim}, /*requires_grad=*/true)) {}

  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }

  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".gamma", gamma);
    reg.add(prefix + ".beta", beta);
  }
};

}  // namespace segfuse
