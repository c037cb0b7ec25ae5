#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfuse/base64.hpp"
#include "segfuse/corpus_io.hpp"
#include "segfuse/model.hpp"
#include "segfuse/training.hpp"

namespace segfuse {

constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(const std::string& path, const FusionModel& model,
                             const TrainConfig& cfg) {
  nlohmann::json doc;
  doc["version"] = kCheckpointVersion;
  doc["channels"] = model.channels;
  doc["interaction"] = {{"num_layers", model.interaction_cfg.num_layers},
                        {"num_heads", model.interaction_cfg.num_heads},
                        {"ffn_dim", model.interaction_cfg.effective_ffn_dim()}};
  doc["train"] = {{"learning_rate", cfg.learning_rate},
                  {"weight_decay", cfg.weight_decay},
                  {"iterations", cfg.iterations},
                  {"batch_size", cfg.batch_size},
                  {"w_seg", cfg.w_seg},
                  {"w_conf", cfg.w_conf},
                  {"seed", cfg.seed},
                  {"use_cfi", cfg.use_cfi}};
  nlohmann::json params = nlohmann::json::array();
  const ParamRegistry reg = model.registry();
  for (const auto& entry : reg.entries()) {
    nlohmann::json p;
    p["name"] = entry.first;
    p["shape"] = entry.second.shape();
    p["data"] = doubles_to_base64(entry.second.values());
    params.push_back(std::move(p));
  }
  doc["params"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw InvalidInputError("failed writing " + path);
}

struct LoadedCheckpoint {
  FusionModel model;
  TrainConfig config;
};

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
  const nlohmann::json doc = parse_json_file(path);
  using detail_io::field;
  if (!doc.contains("version") || doc.at("version") != kCheckpointVersion)
    throw CorruptFileError(path + ": unsupported checkpoint version");
  const std::size_t channels = field<std::size_t>(doc, "channels");
  if (!doc.contains("interaction") || !doc.contains("params"))
    throw CorruptFileError(path + ": missing interaction config or params");
  const nlohmann::json& ij = doc.at("interaction");

  InteractionConfig cfg;
  cfg.num_layers = field<std::size_t>(ij, "num_layers");
  cfg.num_heads = field<std::size_t>(ij, "num_heads");
  cfg.ffn_dim = field<std::size_t>(ij, "ffn_dim");
  cfg.hidden_dim = channels;

  LoadedCheckpoint loaded;
  try {
    loaded.model = FusionModel::init(channels, cfg, /*seed=*/0);
  } catch (const Error& e) {
    throw CorruptFileError(path + ": " + e.what());
  }

  if (doc.contains("train")) {
    const nlohmann::json& tj = doc.at("train");
    loaded.config.learning_rate = field<double>(tj, "learning_rate");
    loaded.config.weight_decay = field<double>(tj, "weight_decay");
    loaded.config.iterations = field<std::size_t>(tj, "iterations");
    loaded.config.batch_size = field<std::size_t>(tj, "batch_size");
    loaded.config.w_seg = field<double>(tj, "w_seg");
    loaded.config.w_conf = field<double>(tj, "w_conf");
    loaded.config.seed = field<std::uint64_t>(tj, "seed");
    loaded.config.use_cfi = field<bool>(tj, "use_cfi");
  }

  const ParamRegistry reg = loaded.model.registry();
  std::set<std::string> restored;
  for (const auto& pj : doc.at("params")) {
    const std::string name = field<std::string>(pj, "name");
    const Shape shape = field<Shape>(pj, "shape");
    const std::vector<double> data =
        base64_to_doubles(field<std::string>(pj, "data"));
    if (!reg.contains(name))
      throw CorruptFileError(path + ": unknown parameter " + name);
    if (!restored.insert(name).second)
      throw CorruptFileError(path + ": duplicate parameter " + name);
    Tensor t = reg.find(name);
    if (t.shape() != shape || t.size() != data.size())
      throw CorruptFileError(path + ": parameter " + name + " has shape " +
                             shape_str(shape) + ", model expects " +
                             shape_str(t.shape()));
    t.mutable_values() = data;
  }
  if (restored.size() != reg.entries().size())
    throw CorruptFileError(path + ": checkpoint restores " +
                           std::to_string(restored.size()) + " of " +
                           std::to_string(reg.entries().size()) + " parameters");
  return loaded;
}

}  // namespace segfuse
