#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tumorseg/volume.hpp"

namespace tumorseg {

enum class Region { Complete, Core, Enhancing };

inline constexpr std::array<Region, 3> kRegions{Region::Complete, Region::Core, Region::Enhancing};

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Complete: return "complete";
    case Region::Core: return "core";
    case Region::Enhancing: return "enhancing";
  }
  return "?";
}

/// Complete = {1,2,3,4}, Core = {1,3,4}, Enhancing = {4}.
inline bool in_region(std::uint8_t label, Region r) {
  switch (r) {
    case Region::Complete: return label >= 1 && label <= 4;
    case Region::Core: return label == 1 || label == 3 || label == 4;
    case Region::Enhancing: return label == 4;
  }
  return false;
}

inline BinaryMask region_mask(const LabelVolume& labels, Region r) {
  BinaryMask m(labels.dims(), labels.spacing());
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = in_region(labels[i], r);
  return m;
}

struct Overlap {
  double dice = 0.0;
  double ppv = 0.0;
  double sensitivity = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

/// Dice, PPV and sensitivity from confusion counts. Empty denominators follow
/// fixed conventions: empty vs empty scores 1 everywhere; an empty
/// prediction has PPV 1, an empty truth has sensitivity 1.
inline Overlap overlap_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  Overlap o{0.0, 0.0, 0.0, tp, fp, fn};
  const std::uint64_t pred = tp + fp;
  const std::uint64_t truth = tp + fn;
  o.dice = (pred + truth == 0) ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(pred + truth);
  o.ppv = pred == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pred);
  o.sensitivity = truth == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(truth);
  return o;
}

inline Overlap overlap_metrics(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_dims(pred, truth, "overlap_metrics");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  return overlap_from_counts(tp, fp, fn);
}

struct OverlapReport {
  std::array<Overlap, 3> regions;
  const Overlap& operator[](Region r) const { return regions[static_cast<std::size_t>(r)]; }
};

inline OverlapReport evaluate_case(const LabelVolume& pred, const LabelVolume& truth) {
  require_same_dims(pred, truth, "evaluate_case");
  std::array<std::uint64_t, 3> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t r = 0; r < 3; ++r) {
      const bool p = in_region(pred[i], kRegions[r]);
      const bool t = in_region(truth[i], kRegions[r]);
      tp[r] += p && t;
      fp[r] += p && !t;
      fn[r] += !p && t;
    }
  }
  OverlapReport rep;
  for (std::size_t r = 0; r < 3; ++r) rep.regions[r] = overlap_from_counts(tp[r], fp[r], fn[r]);
  return rep;
}

inline constexpr const char* kReportHeader = "case,region,dice,ppv,sensitivity,tp,fp,fn\n";

inline std::string format_metric(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

/// CSV rows (no header) for one case, one row per region.
inline std::string report_rows(const std::string& case_id, const OverlapReport& rep) {
  std::string out;
  for (auto r : kRegions) {
    const Overlap& o = rep[r];
    out += case_id + "," + region_name(r) + "," + format_metric(o.dice) + "," + format_metric(o.ppv) + "," +
           format_metric(o.sensitivity) + "," + std::to_string(o.tp) + "," + std::to_string(o.fp) + "," +
           std::to_string(o.fn) + "\n";
  }
  return out;
}

inline std::string report_csv(const std::vector<std::pair<std::string, OverlapReport>>& cases) {
  std::string out = kReportHeader;
  for (const auto& [id, rep] : cases) out += report_rows(id, rep);
  return out;
}

}  // namespace tumorseg
