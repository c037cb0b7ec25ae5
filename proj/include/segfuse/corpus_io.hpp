#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfuse/base64.hpp"
#include "segfuse/branches.hpp"
#include "segfuse/mask.hpp"

namespace segfuse {

constexpr int kDumpVersion = 1;

inline nlohmann::json sample_to_json(const Sample& sample) {
  nlohmann::json td;
  nlohmann::json masks = nlohmann::json::array();
  for (const BinaryMask& m : sample.triplet.masks)
    masks.push_back(rle_encode(m));
  td["masks_rle"] = std::move(masks);
  td["scores"] = sample.triplet.scores;
  td["embeddings"] = doubles_to_base64(sample.triplet.embeddings.values());

  nlohmann::json j;
  j["id"] = sample.id;
  j["H"] = sample.ground_truth.height;
  j["W"] = sample.ground_truth.width;
  j["gt_rle"] = rle_encode(sample.ground_truth);
  j["topdown"] = std::move(td);
  j["pixel_embeddings"] = doubles_to_base64(sample.pixels.data.values());
  j["bottomup_map"] = doubles_to_base64(sample.bottom_up.values);
  return j;
}

inline void write_corpus(const std::string& path,
                         const std::vector<Sample>& samples) {
  nlohmann::json doc;
  doc["version"] = kDumpVersion;
  nlohmann::json arr = nlohmann::json::array();
  for (const Sample& s : samples) arr.push_back(sample_to_json(s));
  doc["samples"] = std::move(arr);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open " + path + " for writing");
  out << doc.dump();
  out << '\n';
  if (!out) throw InvalidInputError("failed writing " + path);
}

namespace detail_io {

inline std::vector<std::size_t> runs_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw CorruptFileError("RLE runs must be an array");
  std::vector<std::size_t> runs;
  runs.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw CorruptFileError("RLE run is not an integer");
    const long long r = v.get<long long>();
    if (r < 0) throw CorruptFileError("negative RLE run length");
    runs.push_back(static_cast<std::size_t>(r));
  }
  return runs;
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw CorruptFileError(std::string("missing field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorruptFileError(std::string("malformed field: ") + key);
  }
}

}  // namespace detail_io

inline Sample sample_from_json(const nlohmann::json& j) {
  using detail_io::field;
  Sample sample;
  sample.id = field<std::string>(j, "id");
  const std::size_t h = field<std::size_t>(j, "H");
  const std::size_t w = field<std::size_t>(j, "W");
  if (h == 0 || w == 0) throw CorruptFileError("degenerate sample dimensions");
  if (!j.contains("gt_rle") || !j.contains("topdown"))
    throw CorruptFileError("sample missing gt_rle or topdown");
  sample.ground_truth = rle_decode(detail_io::runs_from_json(j.at("gt_rle")), h, w);

  const nlohmann::json& td = j.at("topdown");
  if (!td.contains("masks_rle") || !td.at("masks_rle").is_array() ||
      td.at("masks_rle").empty())
    throw CorruptFileError("topdown masks_rle missing or empty");
  for (const auto& runs : td.at("masks_rle"))
    sample.triplet.masks.push_back(
        rle_decode(detail_io::runs_from_json(runs), h, w));
  sample.triplet.scores = field<std::vector<double>>(td, "scores");

  const std::size_t n = sample.triplet.masks.size();
  const std::vector<double> emb =
      base64_to_doubles(field<std::string>(td, "embeddings"));
  if (emb.empty() || emb.size() % n != 0)
    throw CorruptFileError("embedding blob length " + std::to_string(emb.size()) +
                           " is not a multiple of " + std::to_string(n) +
                           " instances");
  const std::size_t c = emb.size() / n;
  sample.triplet.embeddings = Tensor::from_data({n, c}, emb);

  const std::vector<double> pix =
      base64_to_doubles(field<std::string>(j, "pixel_embeddings"));
  if (pix.size() != c * h * w)
    throw CorruptFileError("pixel embedding blob length " +
                           std::to_string(pix.size()) + " does not equal " +
                           std::to_string(c * h * w));
  sample.pixels = PixelEmbeddings(c, h, w, Tensor::from_data({c, h * w}, pix));

  const std::vector<double> bu =
      base64_to_doubles(field<std::string>(j, "bottomup_map"));
  if (bu.size() != h * w)
    throw CorruptFileError("bottom-up map length mismatch");
  sample.bottom_up = ProbabilityMap(h, w);
  sample.bottom_up.values = bu;

  try {
    sample.validate();
    sample.bottom_up.check_probability_range();
  } catch (const Error& e) {
    throw CorruptFileError(std::string("inconsistent sample: ") + e.what());
  }
  return sample;
}

inline nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path + ": " + e.what());
  }
}

inline std::vector<Sample> read_corpus(const std::string& path) {
  const nlohmann::json doc = parse_json_file(path);
  if (!doc.contains("version") || doc.at("version") != kDumpVersion)
    throw CorruptFileError(path + ": unsupported dump version");
  if (!doc.contains("samples") || !doc.at("samples").is_array() ||
      doc.at("samples").empty())
    throw CorruptFileError(path + ": no samples");
  std::vector<Sample> samples;
  for (const auto& js : doc.at("samples")) samples.push_back(sample_from_json(js));
  const std::size_t c = samples[0].pixels.channels;
  for (const Sample& s : samples)
    if (s.pixels.channels != c)
      throw CorruptFileError(path + ": samples disagree on channel count");
  return samples;
}

}  // namespace segfuse
