#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segfuse/errors.hpp"
#include "segfuse/tensor.hpp"

namespace segfuse {

constexpr double kDefaultTau = 0.35;

struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;  // row-major, values 0/1

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w)
      : height(h), width(w), bits(h * w, 0) {}

  std::size_t size() const { return height * width; }
  bool at(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
  void set(std::size_t y, std::size_t x, bool v) {
    bits[y * width + x] = v ? 1 : 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const std::uint8_t b : bits) n += b;
    return n;
  }

  bool empty_mask() const { return count() == 0; }

  bool operator==(const BinaryMask& other) const {
    return height == other.height && width == other.width && bits == other.bits;
  }
};

struct ProbabilityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major
  bool logit_space = false;

  ProbabilityMap() = default;
  ProbabilityMap(std::size_t h, std::size_t w, double fill = 0.0,
                 bool logits = false)
      : height(h), width(w), values(h * w, fill), logit_space(logits) {}

  std::size_t size() const { return height * width; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  void check_probability_range() const {
    if (logit_space) return;
    for (const double v : values)
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInputError("probability map value " + std::to_string(v) +
                                " outside [0,1]");
  }
};

/// bit = 1 iff value strictly exceeds tau.
inline BinaryMask binarize(const ProbabilityMap& map, double tau) {
  BinaryMask out(map.height, map.width);
  for (std::size_t i = 0; i < map.values.size(); ++i)
    out.bits[i] = map.values[i] > tau ? 1 : 0;
  return out;
}

/// Alternating run lengths over the row-major bit stream; the first run counts
/// zeros and may be 0 when the mask starts with a set pixel.
inline std::vector<std::size_t> rle_encode(const BinaryMask& mask) {
  std::vector<std::size_t> runs;
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (const std::uint8_t b : mask.bits) {
    if (b == current) {
      ++run;
    } else {
      runs.push_back(run);
      current = b;
      run = 1;
    }
  }
  runs.push_back(run);
  return runs;
}

inline BinaryMask rle_decode(const std::vector<std::size_t>& runs, std::size_t h,
                             std::size_t w) {
  std::size_t total = 0;
  for (const std::size_t r : runs) total += r;
  if (total != h * w)
    throw CorruptFileError("run lengths sum to " + std::to_string(total) +
                           ", expected " + std::to_string(h * w));
  BinaryMask mask(h, w);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (const std::size_t r : runs) {
    for (std::size_t i = 0; i < r; ++i) mask.bits[pos++] = value;
    value = value ? 0 : 1;
  }
  return mask;
}

inline Tensor mask_to_tensor(const BinaryMask& mask) {
  std::vector<double> v(mask.bits.begin(), mask.bits.end());
  return Tensor::from_data({1, mask.size()}, std::move(v));
}

inline ProbabilityMap tensor_to_map(const Tensor& t, std::size_t h, std::size_t w) {
  if (t.size() != h * w)
    throw DimensionError("tensor of shape " + shape_str(t.shape()) +
                         " is not a " + std::to_string(h) + "x" +
                         std::to_string(w) + " map");
  ProbabilityMap map(h, w);
  map.values = t.values();
  return map;
}

inline Tensor map_to_tensor(const ProbabilityMap& map) {
  std::vector<double> v = map.values;
  return Tensor::from_data({1, map.size()}, std::move(v));
}

}  // namespace segfuse
