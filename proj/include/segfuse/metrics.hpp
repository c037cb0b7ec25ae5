#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "segfuse/mask.hpp"

namespace segfuse {

/// |a ∩ b| / |a ∪ b|, with the empty-∪-empty convention of 1.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("iou: mask shapes disagree");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct CorpusIou {
  double overall = 0.0;  // Σ intersections / Σ unions
  double mean = 0.0;     // average per-sample IoU
};

inline CorpusIou corpus_iou(const std::vector<BinaryMask>& predictions,
                            const std::vector<BinaryMask>& truths) {
  if (predictions.empty())
    throw InvalidInputError("corpus_iou: empty pair list");
  if (predictions.size() != truths.size())
    throw InvalidInputError("corpus_iou: prediction/truth counts differ");
  std::size_t inter_sum = 0, union_sum = 0;
  double mean_acc = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const BinaryMask& a = predictions[k];
    const BinaryMask& b = truths[k];
    if (a.height != b.height || a.width != b.width)
      throw DimensionError("corpus_iou: mask shapes disagree at index " +
                           std::to_string(k));
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
      inter += a.bits[i] & b.bits[i];
      uni += a.bits[i] | b.bits[i];
    }
    inter_sum += inter;
    union_sum += uni;
    mean_acc += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  CorpusIou out;
  out.overall = union_sum == 0
                    ? 1.0
                    : static_cast<double>(inter_sum) / static_cast<double>(union_sum);
  out.mean = mean_acc / static_cast<double>(predictions.size());
  return out;
}

enum class ErrorBin { PolarNegative, OtherNegative, InferiorPositive, HighPositive };

inline const char* error_bin_name(ErrorBin bin) {
  switch (bin) {
    case ErrorBin::PolarNegative: return "PolarNegative";
    case ErrorBin::OtherNegative: return "OtherNegative";
    case ErrorBin::InferiorPositive: return "InferiorPositive";
    case ErrorBin::HighPositive: return "HighPositive";
  }
  return "?";
}

/// Bin edges partitioning [0,1]: PN = [0, 0.1), Other = [0.1, 0.5),
/// IP = [0.5, 0.8], High = (0.8, 1].
inline ErrorBin error_bin_of(double v, double pn_edge = 0.1) {
  if (v < pn_edge) return ErrorBin::PolarNegative;
  if (v < 0.5) return ErrorBin::OtherNegative;
  if (v <= 0.8) return ErrorBin::InferiorPositive;
  return ErrorBin::HighPositive;
}

struct ErrorTaxonomy {
  std::array<std::size_t, 4> counts{};  // indexed by ErrorBin order
  std::array<double, 4> rates{};
  std::size_t positives = 0;  // IoU strictly above 0.5
  std::size_t negatives = 0;
  std::size_t total = 0;
};

inline ErrorTaxonomy classify_errors(const std::vector<double>& ious,
                                     double pn_edge = 0.1) {
  ErrorTaxonomy t;
  t.total = ious.size();
  for (const double v : ious) {
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidInputError("classify_errors: IoU " + std::to_string(v) +
                              " outside [0,1]");
    ++t.counts[static_cast<std::size_t>(error_bin_of(v, pn_edge))];
    if (v > 0.5)
      ++t.positives;
    else
      ++t.negatives;
  }
  for (std::size_t i = 0; i < 4; ++i)
    t.rates[i] = t.total ? static_cast<double>(t.counts[i]) / t.total : 0.0;
  return t;
}

inline std::vector<double> kde_default_grid(std::size_t points = 512) {
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
  return grid;
}

/// Scott's rule N^{-1/5} · std(x) with a 1e-3 floor (sample standard
/// deviation; one observation falls back to the floor). Observations are
/// accumulated in sorted order so the result is exactly permutation
/// invariant.
inline double scott_bandwidth(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n == 0) throw InvalidInputError("bandwidth of an empty observation list");
  double sd = 0.0;
  if (n > 1) {
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (const double x : sorted) mean += x;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (const double x : sorted) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / static_cast<double>(n - 1));
  }
  const double h = std::pow(static_cast<double>(n), -0.2) * sd;
  return std::max(h, 1e-3);
}

/// Gaussian-kernel density estimate evaluated on `grid`; bandwidth ≤ 0 selects
/// Scott's rule. Kernels are summed in sorted-observation order, making the
/// curve exactly permutation invariant.
inline std::vector<double> kde_curve(const std::vector<double>& observations,
                                     double bandwidth,
                                     const std::vector<double>& grid) {
  if (observations.empty())
    throw InvalidInputError("kde_curve: no observations");
  const double h = bandwidth > 0.0 ? bandwidth : scott_bandwidth(observations);
  std::vector<double> sorted = observations;
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (const double x : sorted) {
      const double u = (grid[g] - x) / h;
      acc += std::exp(-0.5 * u * u);
    }
    density[g] = acc * norm;
  }
  return density;
}

/// Fraction of indices where exactly one branch clears IoU 0.5.
inline double mutually_exclusive_rate(const std::vector<double>& ious_a,
                                      const std::vector<double>& ious_b) {
  if (ious_a.size() != ious_b.size())
    throw InvalidInputError("mutually_exclusive_rate: length mismatch " +
                            std::to_string(ious_a.size()) + " vs " +
                            std::to_string(ious_b.size()));
  if (ious_a.empty()) return 0.0;
  std::size_t exclusive = 0;
  for (std::size_t i = 0; i < ious_a.size(); ++i) {
    for (const double v : {ious_a[i], ious_b[i]})
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInputError("mutually_exclusive_rate: IoU outside [0,1]");
    const bool pa = ious_a[i] > 0.5, pb = ious_b[i] > 0.5;
    if (pa != pb) ++exclusive;
  }
  return static_cast<double>(exclusive) / static_cast<double>(ious_a.size());
}

enum class BaselineStrategy { Intersection, Union, Average };

inline BaselineStrategy parse_baseline(const std::string& name) {
  if (name == "intersection") return BaselineStrategy::Intersection;
  if (name == "union") return BaselineStrategy::Union;
  if (name == "average") return BaselineStrategy::Average;
  throw InvalidInputError("unknown integration strategy: " + name);
}

/// Non-learned fusion: binarize both maps then intersect/unite, or binarize
/// the average map once.
inline BinaryMask baseline_integrate(const ProbabilityMap& p_td,
                                     const ProbabilityMap& p_bu,
                                     BaselineStrategy strategy, double tau) {
  if (p_td.height != p_bu.height || p_td.width != p_bu.width)
    throw DimensionError("baseline_integrate: map shapes disagree");
  if (strategy == BaselineStrategy::Average) {
    ProbabilityMap avg(p_td.height, p_td.width);
    for (std::size_t i = 0; i < avg.values.size(); ++i)
      avg.values[i] = (p_td.values[i] + p_bu.values[i]) / 2.0;
    return binarize(avg, tau);
  }
  const BinaryMask a = binarize(p_td, tau);
  const BinaryMask b = binarize(p_bu, tau);
  BinaryMask out(a.height, a.width);
  for (std::size_t i = 0; i < out.bits.size(); ++i)
    out.bits[i] = strategy == BaselineStrategy::Intersection
                      ? (a.bits[i] & b.bits[i])
                      : (a.bits[i] | b.bits[i]);
  return out;
}

}  // namespace segfuse
