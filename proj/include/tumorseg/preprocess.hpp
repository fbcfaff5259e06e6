#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tumorseg/error.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct PreprocessConfig {
  double tail_fraction = 0.01;
  int hist_bins = 256;
  /// Case id of the histogram reference; empty selects the lexicographically
  /// first training case.
  std::string reference_case;

  void validate() const {
    if (!(tail_fraction >= 0.0 && tail_fraction < 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "tail_fraction must lie in [0, 0.5)");
    }
    if (hist_bins < 2) throw Error(ErrorCode::InvalidArgument, "hist_bins must be >= 2");
  }
};

namespace detail {

inline std::vector<float> foreground_values(const Volume3D& vol, const BinaryMask& fg) {
  require_same_dims(vol, fg, "foreground mask");
  std::vector<float> values;
  values.reserve(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) values.push_back(vol[i]);
  }
  return values;
}

/// Linear-interpolated quantile of already sorted values.
inline double interpolated_quantile(const std::vector<float>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - sorted[lo]);
}

}  // namespace detail

/// Winsorizing bounds for a tail fraction: the lower bound is the sorted
/// foreground value at index ceil(p*(n-1)), the upper bound the value at
/// floor((1-p)*(n-1)), i.e. the nearest ranks inside the kept range.
struct ClipBounds {
  float low = 0.0f;
  float high = 0.0f;
};

inline ClipBounds tail_bounds(std::vector<float> values, double tail_fraction) {
  if (values.empty()) throw Error(ErrorCode::EmptyForeground, "no foreground voxels");
  const double last = static_cast<double>(values.size() - 1);
  // The epsilon keeps products such as 0.01 * 99 from landing just above an integer.
  const auto lo = static_cast<std::size_t>(std::ceil(tail_fraction * last - 1e-9));
  const auto hi = static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * last + 1e-9));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const float low = values[lo];
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(hi), values.end());
  return {low, values[hi]};
}

inline Volume3D clip_tails(const Volume3D& vol, const BinaryMask& fg, double tail_fraction) {
  if (!(tail_fraction >= 0.0 && tail_fraction < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "tail_fraction must lie in [0, 0.5)");
  }
  const ClipBounds b = tail_bounds(detail::foreground_values(vol, fg), tail_fraction);
  Volume3D out = vol;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (fg[i]) out[i] = std::clamp(out[i], b.low, b.high);
  }
  return out;
}

/// Winsorizes the nonzero voxels at the given tail fraction.
inline Volume3D clip_tails(const Volume3D& vol, double tail_fraction) {
  return clip_tails(vol, nonzero_mask(vol), tail_fraction);
}

inline Volume3D zscore_normalize(const Volume3D& vol, const BinaryMask& fg) {
  require_same_dims(vol, fg, "foreground mask");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) {
      sum += vol[i];
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyForeground, "no foreground voxels");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) ss += (vol[i] - mean) * (vol[i] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    throw Error(ErrorCode::DegenerateIntensity, "zero standard deviation over foreground");
  }
  Volume3D out(vol.dims(), vol.spacing());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) out[i] = static_cast<float>((vol[i] - mean) / sd);
  }
  return out;
}

/// Zero mean, unit population std over nonzero voxels; background stays 0.
inline Volume3D zscore_normalize(const Volume3D& vol) { return zscore_normalize(vol, nonzero_mask(vol)); }

/// Foreground intensity quantiles at probabilities j / bins, j = 0..bins.
/// Piecewise-linear maps between two such tables give quantile (CDF-inversion)
/// histogram matching.
struct QuantileTable {
  std::vector<float> points;

  int bins() const { return static_cast<int>(points.size()) - 1; }
  friend bool operator==(const QuantileTable&, const QuantileTable&) = default;
};

inline QuantileTable quantile_table(const Volume3D& vol, const BinaryMask& fg, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "histogram needs at least 2 bins");
  auto values = detail::foreground_values(vol, fg);
  if (values.empty()) throw Error(ErrorCode::EmptyForeground, "no foreground voxels");
  std::sort(values.begin(), values.end());
  QuantileTable t;
  t.points.resize(static_cast<std::size_t>(bins) + 1);
  for (int j = 0; j <= bins; ++j) {
    t.points[static_cast<std::size_t>(j)] =
        static_cast<float>(detail::interpolated_quantile(values, static_cast<double>(j) / bins));
  }
  return t;
}

/// Monotone nondecreasing map taking `source` quantiles onto `reference` quantiles.
inline float match_value(float v, const QuantileTable& source, const QuantileTable& reference) {
  const auto& s = source.points;
  const auto& r = reference.points;
  if (v <= s.front()) return r.front();
  if (v >= s.back()) return r.back();
  // Last index j with s[j] <= v; s[j + 1] > v is guaranteed here.
  const auto it = std::upper_bound(s.begin(), s.end(), v);
  const auto j = static_cast<std::size_t>(it - s.begin()) - 1;
  const double t = (static_cast<double>(v) - s[j]) / (static_cast<double>(s[j + 1]) - s[j]);
  return static_cast<float>(r[j] + t * (static_cast<double>(r[j + 1]) - r[j]));
}

inline Volume3D histogram_match(const Volume3D& vol, const BinaryMask& fg, const QuantileTable& reference) {
  const QuantileTable source = quantile_table(vol, fg, reference.bins());
  Volume3D out(vol.dims(), vol.spacing());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) out[i] = match_value(vol[i], source, reference);
  }
  return out;
}

/// Matches the nonzero-voxel histogram of `vol` to that of `reference`.
inline Volume3D histogram_match(const Volume3D& vol, const Volume3D& reference, int bins) {
  const QuantileTable ref = quantile_table(reference, nonzero_mask(reference), bins);
  return histogram_match(vol, nonzero_mask(vol), ref);
}

inline Volume3D rescale_unit(const Volume3D& vol, const BinaryMask& fg) {
  require_same_dims(vol, fg, "foreground mask");
  float lo = 0.0f;
  float hi = 0.0f;
  bool any = false;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (!fg[i]) continue;
    if (!any) {
      lo = hi = vol[i];
      any = true;
    }
    lo = std::min(lo, vol[i]);
    hi = std::max(hi, vol[i]);
  }
  if (!any) throw Error(ErrorCode::EmptyForeground, "no foreground voxels");
  if (!(hi > lo)) throw Error(ErrorCode::DegenerateIntensity, "constant foreground");
  const double scale = 1.0 / (static_cast<double>(hi) - lo);
  Volume3D out(vol.dims(), vol.spacing());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (fg[i]) out[i] = std::clamp(static_cast<float>((vol[i] - static_cast<double>(lo)) * scale), 0.0f, 1.0f);
  }
  return out;
}

inline Volume3D rescale_unit(const Volume3D& vol) { return rescale_unit(vol, nonzero_mask(vol)); }

/// Per-protocol histogram references, one quantile table per modality.
struct ReferenceHistograms {
  std::array<QuantileTable, 3> tables;
  friend bool operator==(const ReferenceHistograms&, const ReferenceHistograms&) = default;
};

/// Reference tables from an already clipped and z-scored case.
inline ReferenceHistograms reference_histograms(const MultimodalVolume& reference, int bins) {
  ReferenceHistograms h;
  for (int m = 0; m < 3; ++m) {
    h.tables[static_cast<std::size_t>(m)] =
        quantile_table(reference.channel(m), nonzero_mask(reference.channel(m)), bins);
  }
  return h;
}

/// Tail clipping and z-scoring of a raw case, the state the reference must be in.
inline MultimodalVolume prepare_reference(const MultimodalVolume& raw, const PreprocessConfig& cfg) {
  cfg.validate();
  std::array<Volume3D, 3> out;
  for (int m = 0; m < 3; ++m) {
    const Volume3D& v = raw.channel(m);
    const BinaryMask fg = nonzero_mask(v);
    out[static_cast<std::size_t>(m)] = zscore_normalize(clip_tails(v, fg, cfg.tail_fraction), fg);
  }
  return MultimodalVolume(std::move(out[0]), std::move(out[1]), std::move(out[2]));
}

/// Full chain per modality: clip, z-score, match to the same-protocol
/// reference, rescale to [0, 1]. The foreground is fixed from the raw input
/// so voxels that land on 0 mid-chain are not lost.
inline MultimodalVolume preprocess_case(const MultimodalVolume& raw, const ReferenceHistograms& reference,
                                        const PreprocessConfig& cfg) {
  cfg.validate();
  std::array<Volume3D, 3> out;
  for (int m = 0; m < 3; ++m) {
    const Volume3D& v = raw.channel(m);
    const BinaryMask fg = nonzero_mask(v);
    const Volume3D normalized = zscore_normalize(clip_tails(v, fg, cfg.tail_fraction), fg);
    const Volume3D matched = histogram_match(normalized, fg, reference.tables[static_cast<std::size_t>(m)]);
    out[static_cast<std::size_t>(m)] = rescale_unit(matched, fg);
  }
  return MultimodalVolume(std::move(out[0]), std::move(out[1]), std::move(out[2]));
}

inline MultimodalVolume preprocess_case(const MultimodalVolume& raw, const MultimodalVolume& reference,
                                        const PreprocessConfig& cfg) {
  cfg.validate();
  return preprocess_case(raw, reference_histograms(reference, cfg.hist_bins), cfg);
}

}  // namespace tumorseg
