#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "segfuse/branches.hpp"
#include "segfuse/mask.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/rng.hpp"

namespace segfuse {

enum class ShapeFamily { Rectangle, Ellipse };

struct SceneSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t min_instances = 2;
  std::size_t max_instances = 5;
  ShapeFamily family = ShapeFamily::Rectangle;
  std::size_t channels = 16;

  void validate() const {
    if (height < 4 || width < 4)
      throw GenerationError("canvas must be at least 4x4");
    if (min_instances < 1 || min_instances > max_instances)
      throw GenerationError("instance count range is empty");
    if (channels < 8)
      throw ConfigError("simulator needs at least 8 embedding channels, got " +
                        std::to_string(channels));
  }
};

struct ErrorProfile {
  double p_pn = 0.0;        // chance the top-down branch picks a wrong instance
  double ip_erosion = 0.0;  // fraction of referred pixels the bottom-up map drops
  double score_noise = 0.0;
  double map_noise = 0.0;

  void validate() const {
    if (!(p_pn >= 0.0 && p_pn <= 1.0))
      throw ConfigError("p_pn must lie in [0,1]");
    if (!(ip_erosion >= 0.0 && ip_erosion < 1.0))
      throw ConfigError("ip_erosion must lie in [0,1)");
    if (score_noise < 0.0 || map_noise < 0.0)
      throw ConfigError("noise scales must be nonnegative");
  }
};

struct SceneInstance {
  BinaryMask mask;
  double centroid_x = 0.0, centroid_y = 0.0;
  std::size_t box_w = 0, box_h = 0;
  std::size_t area = 0;
};

struct Scene {
  std::size_t height = 0, width = 0;
  std::vector<SceneInstance> instances;
  std::size_t referred_index = 0;
  BinaryMask ground_truth;
};

namespace detail_synth {

inline SceneInstance rasterize_rectangle(std::size_t h, std::size_t w, Rng& rng) {
  const std::size_t max_w = std::min<std::size_t>(8, w / 2);
  const std::size_t max_h = std::min<std::size_t>(8, h / 2);
  const std::size_t bw = 2 + rng.below(std::max<std::size_t>(max_w - 1, 1));
  const std::size_t bh = 2 + rng.below(std::max<std::size_t>(max_h - 1, 1));
  const std::size_t x0 = rng.below(w - bw + 1);
  const std::size_t y0 = rng.below(h - bh + 1);
  SceneInstance inst;
  inst.mask = BinaryMask(h, w);
  for (std::size_t y = y0; y < y0 + bh; ++y)
    for (std::size_t x = x0; x < x0 + bw; ++x) inst.mask.set(y, x, true);
  return inst;
}

inline SceneInstance rasterize_ellipse(std::size_t h, std::size_t w, Rng& rng) {
  const double max_a = std::max(1.6, std::min<double>(4.5, w / 4.0));
  const double max_b = std::max(1.6, std::min<double>(4.5, h / 4.0));
  const double a = rng.uniform(1.5, max_a);
  const double b = rng.uniform(1.5, max_b);
  const double cx = rng.uniform(a, w - a);
  const double cy = rng.uniform(b, h - b);
  SceneInstance inst;
  inst.mask = BinaryMask(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = (x + 0.5 - cx) / a;
      const double dy = (y + 0.5 - cy) / b;
      if (dx * dx + dy * dy <= 1.0) inst.mask.set(y, x, true);
    }
  return inst;
}

inline void finish_geometry(SceneInstance& inst) {
  std::size_t min_x = inst.mask.width, max_x = 0, min_y = inst.mask.height,
              max_y = 0, area = 0;
  double sx = 0.0, sy = 0.0;
  for (std::size_t y = 0; y < inst.mask.height; ++y)
    for (std::size_t x = 0; x < inst.mask.width; ++x)
      if (inst.mask.at(y, x)) {
        ++area;
        sx += x;
        sy += y;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  inst.area = area;
  if (area) {
    inst.centroid_x = sx / area;
    inst.centroid_y = sy / area;
    inst.box_w = max_x - min_x + 1;
    inst.box_h = max_y - min_y + 1;
  }
}

inline bool disjoint_from(const BinaryMask& candidate, const BinaryMask& occupied) {
  for (std::size_t i = 0; i < candidate.bits.size(); ++i)
    if (candidate.bits[i] && occupied.bits[i]) return false;
  return true;
}

}  // namespace detail_synth

/// Lays out pairwise-disjoint instances (each at least 4 pixels) and marks one
/// of them as the referred object; pure function of (spec, rng state).
inline Scene generate_scene(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  Scene scene;
  scene.height = spec.height;
  scene.width = spec.width;
  const std::size_t count =
      spec.min_instances +
      rng.below(spec.max_instances - spec.min_instances + 1);
  BinaryMask occupied(spec.height, spec.width);
  for (std::size_t j = 0; j < count; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      SceneInstance inst = spec.family == ShapeFamily::Rectangle
                               ? detail_synth::rasterize_rectangle(spec.height,
                                                                   spec.width, rng)
                               : detail_synth::rasterize_ellipse(spec.height,
                                                                 spec.width, rng);
      detail_synth::finish_geometry(inst);
      if (inst.area < 4) continue;
      if (!detail_synth::disjoint_from(inst.mask, occupied)) continue;
      for (std::size_t i = 0; i < occupied.bits.size(); ++i)
        occupied.bits[i] |= inst.mask.bits[i];
      scene.instances.push_back(std::move(inst));
      placed = true;
    }
    if (!placed)
      throw GenerationError("canvas " + std::to_string(spec.width) + "x" +
                            std::to_string(spec.height) +
                            " cannot fit " + std::to_string(count) +
                            " disjoint instances");
  }
  scene.referred_index = rng.below(count);
  scene.ground_truth = scene.instances[scene.referred_index].mask;
  return scene;
}

/// Instance proposals with geometric-feature embeddings and alignment scores.
/// With probability p_pn a wrong instance receives the top score, creating a
/// polar-negative sample by construction.
inline InstanceTripletSet simulate_topdown(const Scene& scene,
                                           const ErrorProfile& profile,
                                           std::size_t channels, Rng& rng) {
  profile.validate();
  const std::size_t n = scene.instances.size();
  const double hw = static_cast<double>(scene.height * scene.width);
  InstanceTripletSet triplet;
  std::vector<double> emb(n * channels);
  for (std::size_t j = 0; j < n; ++j) {
    const SceneInstance& inst = scene.instances[j];
    triplet.masks.push_back(inst.mask);
    double* row = emb.data() + j * channels;
    row[0] = inst.centroid_x / scene.width;
    row[1] = inst.centroid_y / scene.height;
    row[2] = inst.area / hw;
    row[3] = static_cast<double>(inst.box_w) / scene.width;
    row[4] = static_cast<double>(inst.box_h) / scene.height;
    row[5] = iou(inst.mask, scene.ground_truth);  // referred-overlap cue
    for (std::size_t c = 6; c < channels; ++c) row[c] = rng.normal(0.0, 0.1);
  }
  triplet.embeddings = Tensor::from_data({n, channels}, std::move(emb));

  std::size_t top = scene.referred_index;
  if (n >= 2 && rng.uniform() < profile.p_pn) {
    std::size_t wrong = rng.below(n - 1);
    if (wrong >= scene.referred_index) ++wrong;
    top = wrong;
  }
  triplet.scores.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = j == top ? rng.uniform(0.85, 0.98) : rng.uniform(0.15, 0.55);
    if (profile.score_noise > 0.0) s += rng.normal(0.0, profile.score_noise);
    triplet.scores[j] = std::min(std::max(s, 0.0), 1.0);
  }
  return triplet;
}

/// GT-shaped probability map with a boundary-first fraction of pixels pulled
/// below threshold (the inferior-positive failure mode) plus optional
/// background noise; pixel embeddings carry the map logit and per-pixel
/// geometric/identity cues.
inline std::pair<PixelEmbeddings, ProbabilityMap> simulate_bottomup(
    const Scene& scene, const ErrorProfile& profile, std::size_t channels,
    Rng& rng) {
  profile.validate();
  const std::size_t h = scene.height, w = scene.width, hw = h * w;
  const BinaryMask& gt = scene.ground_truth;

  ProbabilityMap map(h, w);
  for (std::size_t i = 0; i < hw; ++i) map.values[i] = gt.bits[i] ? 1.0 : 0.0;

  // Boundary-first erosion: peel outermost mask pixels (4-neighborhood,
  // canvas edge counts as outside), row-major within each peel round.
  std::size_t to_drop = static_cast<std::size_t>(
      std::llround(profile.ip_erosion * static_cast<double>(gt.count())));
  BinaryMask remaining = gt;
  while (to_drop > 0) {
    std::vector<std::size_t> boundary;
    for (std::size_t y = 0; y < h && boundary.size() < to_drop; ++y)
      for (std::size_t x = 0; x < w && boundary.size() < to_drop; ++x) {
        if (!remaining.at(y, x)) continue;
        const bool edge = y == 0 || y + 1 == h || x == 0 || x + 1 == w ||
                          !remaining.at(y - 1, x) || !remaining.at(y + 1, x) ||
                          !remaining.at(y, x - 1) || !remaining.at(y, x + 1);
        if (edge) boundary.push_back(y * w + x);
      }
    if (boundary.empty()) break;  // nothing left to peel
    for (const std::size_t p : boundary) {
      remaining.bits[p] = 0;
      map.values[p] = rng.uniform(0.0, kDefaultTau / 2.0);
      --to_drop;
    }
  }
  if (profile.map_noise > 0.0)
    for (std::size_t i = 0; i < hw; ++i)
      if (!gt.bits[i])
        map.values[i] = std::min(std::abs(rng.normal(0.0, profile.map_noise)), 1.0);

  // Channel 0 carries the map logit so the frozen unit head reproduces the
  // map; the rest are coordinates and instance-identity cues.
  const double hwd = static_cast<double>(hw);
  std::vector<std::size_t> coverer(hw, 0);  // 1-based, 0 = none
  for (std::size_t j = 0; j < scene.instances.size(); ++j)
    for (std::size_t p = 0; p < hw; ++p)
      if (scene.instances[j].mask.bits[p]) coverer[p] = j + 1;

  std::vector<double> feat(channels * hw, 0.0);
  const std::size_t n = scene.instances.size();
  for (std::size_t p = 0; p < hw; ++p) {
    const double prob = std::min(std::max(map.values[p], 1e-6), 1.0 - 1e-6);
    const std::size_t y = p / w, x = p % w;
    feat[0 * hw + p] = std::log(prob / (1.0 - prob));
    feat[1 * hw + p] = map.values[p];
    feat[2 * hw + p] = 1.0;
    feat[3 * hw + p] = static_cast<double>(x) / w;
    feat[4 * hw + p] = static_cast<double>(y) / h;
    feat[5 * hw + p] =
        coverer[p] ? scene.instances[coverer[p] - 1].area / hwd : 0.0;
    feat[6 * hw + p] = coverer[p] ? static_cast<double>(coverer[p]) / n : 0.0;
  }
  for (std::size_t c = 7; c < channels; ++c)
    for (std::size_t p = 0; p < hw; ++p)
      feat[c * hw + p] = rng.normal(0.0, 0.1);

  PixelEmbeddings pixels(channels, h, w,
                         Tensor::from_data({channels, hw}, std::move(feat)));
  return {std::move(pixels), std::move(map)};
}

inline std::string sample_name(std::size_t index) {
  std::ostringstream os;
  os << "sample-" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

inline Sample make_sample(const SceneSpec& spec, const ErrorProfile& profile,
                          std::uint64_t corpus_seed, std::size_t index) {
  Rng rng = Rng::derived(corpus_seed, index);
  const Scene scene = generate_scene(spec, rng);
  Sample sample;
  sample.id = sample_name(index);
  sample.ground_truth = scene.ground_truth;
  sample.triplet = simulate_topdown(scene, profile, spec.channels, rng);
  auto bu = simulate_bottomup(scene, profile, spec.channels, rng);
  sample.pixels = std::move(bu.first);
  sample.bottom_up = std::move(bu.second);
  sample.validate();
  return sample;
}

/// Per-sample derived rng streams make the corpus a pure function of
/// (spec, profile, seed), independent of generation order.
inline std::vector<Sample> make_corpus(const SceneSpec& spec,
                                       const ErrorProfile& profile,
                                       std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidInputError("corpus must hold at least one sample");
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(make_sample(spec, profile, seed, i));
  return out;
}

}  // namespace segfuse
