#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tumorseg/config.hpp"
#include "tumorseg/fcn.hpp"
#include "tumorseg/features.hpp"
#include "tumorseg/forest.hpp"
#include "tumorseg/morphology.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/score_map.hpp"
#include "tumorseg/texton.hpp"

namespace tumorseg {

/// One case as the pipeline sees it. Ground truth is required for training;
/// precomputed scores replace the network when present.
struct CaseData {
  std::string id;
  MultimodalVolume image;
  std::optional<LabelVolume> truth;
  std::optional<ScoreMap> scores;
};

struct ModelBundle {
  PipelineConfig config;
  ReferenceHistograms reference;
  std::array<TextonCodebook, 3> codebooks;
  Forest forest;
  std::optional<fcn::FcnWeights> fcn;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct SegmentationResult {
  LabelVolume labels;
  BinaryMask roi;
  std::vector<StageTiming> timings;
};

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>* sink) : sink_(sink), last_(std::chrono::steady_clock::now()) {}

  void mark(const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    if (sink_) sink_->push_back({stage, std::chrono::duration<double>(now - last_).count()});
    last_ = now;
  }

 private:
  std::vector<StageTiming>* sink_;
  std::chrono::steady_clock::time_point last_;
};

/// Removes small 26-connected tumor components: anything with fewer than
/// `min_fraction` times the voxels of the largest component becomes 0.
inline LabelVolume postprocess_components(const LabelVolume& labels, double min_fraction = 0.1) {
  BinaryMask tumor(labels.dims(), labels.spacing());
  for (std::size_t i = 0; i < labels.size(); ++i) tumor[i] = labels[i] != 0;
  const Components comp = connected_components(tumor);
  if (comp.sizes.empty()) return labels;
  const std::size_t largest = *std::max_element(comp.sizes.begin(), comp.sizes.end());
  const double limit = min_fraction * static_cast<double>(largest);
  LabelVolume out = labels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int id = comp.id[i];
    if (id >= 0 && static_cast<double>(comp.sizes[static_cast<std::size_t>(id)]) < limit) out[i] = 0;
  }
  return out;
}

namespace detail {

/// Slices whose texton map is needed to build histograms for `roi`.
inline std::vector<std::uint8_t> needed_slices(const BinaryMask& roi, const TextonConfig& cfg) {
  const Dims& d = roi.dims();
  const std::size_t plane = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
  std::vector<std::uint8_t> needed(static_cast<std::size_t>(d.nz), 0);
  const int reach = cfg.volumetric ? cfg.window / 2 : 0;
  for (int z = 0; z < d.nz; ++z) {
    const auto* p = roi.data().data() + static_cast<std::size_t>(z) * plane;
    if (std::any_of(p, p + plane, [](std::uint8_t v) { return v != 0; })) {
      for (int k = std::max(0, z - reach); k <= std::min(d.nz - 1, z + reach); ++k) needed[static_cast<std::size_t>(k)] = 1;
    }
  }
  return needed;
}

inline TextonMaps texton_maps(const MultimodalVolume& pre, const FilterBank& bank,
                              const std::array<TextonCodebook, 3>& codebooks, const BinaryMask& roi,
                              const TextonConfig& cfg) {
  TextonMaps maps;
  maps.k = cfg.k;
  maps.window = cfg.window;
  maps.volumetric = cfg.volumetric;
  const auto needed = needed_slices(roi, cfg);
  for (int m = 0; m < 3; ++m) {
    maps.maps[static_cast<std::size_t>(m)] =
        compute_texton_map(pre.channel(m), bank, codebooks[static_cast<std::size_t>(m)], needed);
  }
  return maps;
}

inline ScoreMap case_scores(const CaseData& c, const MultimodalVolume& pre, const fcn::FcnWeights* weights) {
  if (c.scores) {
    if (c.scores->dims() != c.image.dims()) throw Error(ErrorCode::DimensionMismatch, c.id + ": score map dims");
    return *c.scores;
  }
  if (!weights) throw Error(ErrorCode::InvalidArgument, c.id + ": no score map and no FCN weights");
  return fcn::score_volume(pre, *weights);
}

inline const CaseData& reference_case(const std::vector<CaseData>& cases, const std::string& wanted) {
  if (!wanted.empty()) {
    for (const auto& c : cases)
      if (c.id == wanted) return c;
    throw Error(ErrorCode::InvalidArgument, "reference case '" + wanted + "' not among training cases");
  }
  return *std::min_element(cases.begin(), cases.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

}  // namespace detail

struct TrainingSummary {
  std::size_t feature_rows = 0;
  std::size_t training_rows = 0;
  std::array<std::size_t, kNumClasses> class_rows{};
  TrainingStats forest;
  std::vector<StageTiming> timings;
};

/// Everything the forest is trained on: the bundle minus its forest, plus
/// the pooled feature rows and their ground-truth labels.
struct TrainingSet {
  ModelBundle bundle;
  FeatureMatrix features;
  std::vector<std::uint8_t> labels;
};

/// Preprocess -> scores -> texton codebooks on pooled brain voxels ->
/// features over each dilated ROI.
inline TrainingSet build_training_set(const std::vector<CaseData>& cases, const PipelineConfig& cfg,
                                      const fcn::FcnWeights* weights = nullptr, StageClock* clock = nullptr) {
  cfg.validate();
  if (cases.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training cases");
  std::array<bool, kNumClasses> present{};
  for (const auto& c : cases) {
    if (!c.truth) throw Error(ErrorCode::InvalidArgument, c.id + ": training case without ground truth");
    require_same_dims(c.image[Modality::Flair], *c.truth, "ground truth");
    for (auto v : c.truth->data()) {
      if (v >= kNumClasses) throw Error(ErrorCode::InvalidArgument, c.id + ": label outside {0..4}");
      present[v] = true;
    }
  }
  if (!present[1] && !present[2] && !present[3] && !present[4]) {
    throw Error(ErrorCode::NoTumorInTraining, "training labels contain no tumor");
  }
  for (int l = 0; l < kNumClasses; ++l) {
    if (!present[static_cast<std::size_t>(l)]) {
      throw Error(ErrorCode::MissingLabels, "label " + std::to_string(l) + " absent from all training cases");
    }
  }
  auto mark = [&](const char* stage) {
    if (clock) clock->mark(stage);
  };

  TrainingSet set;
  ModelBundle& bundle = set.bundle;
  bundle.config = cfg;
  if (weights) bundle.fcn = *weights;
  const CaseData& ref = detail::reference_case(cases, cfg.preprocess.reference_case);
  bundle.reference = reference_histograms(prepare_reference(ref.image, cfg.preprocess), cfg.preprocess.hist_bins);

  std::vector<MultimodalVolume> pre;
  std::vector<BinaryMask> rois;
  for (const auto& c : cases) pre.push_back(preprocess_case(c.image, bundle.reference, cfg.preprocess));
  mark("preprocess");
  std::vector<ScoreMap> scores;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    scores.push_back(detail::case_scores(cases[i], pre[i], weights));
    rois.push_back(classification_region(scores.back(), cfg.roi));
  }
  mark("scores+roi");

  // Codebook samples: brain voxels pooled over cases, uniformly subsampled.
  const FilterBank bank = build_filter_bank(cfg.texton.grid);
  std::vector<std::pair<std::size_t, std::size_t>> pool;  // (case, voxel)
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const BinaryMask brain = brain_mask(cases[i].image);
    for (std::size_t v = 0; v < brain.size(); ++v)
      if (brain[v]) pool.emplace_back(i, v);
  }
  if (pool.size() > cfg.texton.max_samples) {
    Rng rng = make_rng(cfg.texton_seed, 0x74787362ull);
    for (std::size_t i = 0; i < cfg.texton.max_samples; ++i) {
      std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    }
    pool.resize(cfg.texton.max_samples);
    std::sort(pool.begin(), pool.end());
  }
  for (int m = 0; m < 3; ++m) {
    std::vector<float> points;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      std::vector<std::size_t> voxels;
      for (const auto& [ci, v] : pool)
        if (ci == i) voxels.push_back(v);
      const auto rows = sample_responses(pre[i].channel(m), bank, voxels);
      points.insert(points.end(), rows.begin(), rows.end());
    }
    const KMeansOptions opt{cfg.texton.k, derive_seed(cfg.texton_seed, static_cast<std::uint64_t>(m)),
                            cfg.texton.max_iter, cfg.texton.tol};
    bundle.codebooks[static_cast<std::size_t>(m)] =
        make_codebook(kmeans_fit(points, static_cast<int>(bank.size()), opt), static_cast<Modality>(m));
  }
  mark("codebooks");

  set.features.cols = feature_count(cfg.texton.k);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const TextonMaps maps = detail::texton_maps(pre[i], bank, bundle.codebooks, rois[i], cfg.texton);
    const FeatureMatrix fm = assemble_features(scores[i], pre[i], maps, rois[i]);
    set.features.values.insert(set.features.values.end(), fm.values.begin(), fm.values.end());
    set.features.coords.insert(set.features.coords.end(), fm.coords.begin(), fm.coords.end());
    for (const auto& v : fm.coords) set.labels.push_back(cases[i].truth->at(v));
  }
  mark("features");
  return set;
}

/// Training set -> per-class cap -> random forest.
inline ModelBundle train_pipeline(const std::vector<CaseData>& cases, const PipelineConfig& cfg,
                                  const fcn::FcnWeights* weights = nullptr, TrainingSummary* summary = nullptr) {
  StageClock clock(summary ? &summary->timings : nullptr);
  TrainingSet set = build_training_set(cases, cfg, weights, &clock);
  const auto keep = cap_per_class(set.labels, cfg.forest.max_samples_per_class, cfg.forest.seed);
  std::vector<std::uint8_t> kept_labels;
  kept_labels.reserve(keep.size());
  for (auto r : keep) kept_labels.push_back(set.labels[r]);
  const FeatureMatrix training = select_rows(set.features, keep);
  TrainingStats stats;
  set.bundle.forest = train_forest(training, kept_labels, cfg.forest, summary ? &stats : nullptr);
  clock.mark("forest");

  if (summary) {
    summary->feature_rows = set.features.rows();
    summary->training_rows = training.rows();
    summary->class_rows = {};
    for (auto l : kept_labels) ++summary->class_rows[l];
    summary->forest = std::move(stats);
  }
  return std::move(set.bundle);
}

/// Preprocess -> scores -> ROI -> features -> forest labels inside the ROI,
/// then small-component cleanup.
inline SegmentationResult segment_case(const CaseData& c, const ModelBundle& bundle,
                                       const fcn::FcnWeights* weights = nullptr) {
  const PipelineConfig& cfg = bundle.config;
  SegmentationResult result;
  StageClock clock(&result.timings);
  const MultimodalVolume pre = preprocess_case(c.image, bundle.reference, cfg.preprocess);
  clock.mark("preprocess");
  const fcn::FcnWeights* net = weights ? weights : (bundle.fcn ? &*bundle.fcn : nullptr);
  const ScoreMap scores = detail::case_scores(c, pre, net);
  clock.mark("scores");
  result.roi = classification_region(scores, cfg.roi);
  result.roi = BinaryMask(c.image.dims(), c.image.spacing(), std::vector<std::uint8_t>(result.roi.values()));
  result.labels = LabelVolume(c.image.dims(), c.image.spacing());
  clock.mark("roi");
  if (count_true(result.roi) == 0) return result;

  const FilterBank bank = build_filter_bank(cfg.texton.grid);
  const TextonMaps maps = detail::texton_maps(pre, bank, bundle.codebooks, result.roi, cfg.texton);
  clock.mark("textons");
  const FeatureMatrix fm = assemble_features(scores, pre, maps, result.roi);
  clock.mark("features");
  const auto predicted = predict_matrix(bundle.forest, fm);
  for (std::size_t r = 0; r < fm.rows(); ++r) result.labels.at(fm.coords[r]) = predicted[r];
  clock.mark("classify");
  result.labels = postprocess_components(result.labels, cfg.min_component_fraction);
  clock.mark("postprocess");
  return result;
}

// Bundle directory layout.
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kReferenceFile = "reference.rhst";
inline constexpr const char* kForestFile = "forest.rfor";
inline constexpr const char* kWeightsFile = "fcn.fcnw";

inline std::string codebook_file(Modality m) { return std::string("codebook_") + modality_name(m) + ".txcb"; }

// Reference histogram file: "RHST", u32 bins, then 3 x (bins + 1) float32
// quantiles in FLAIR, T1c, T2 order.

inline std::vector<char> encode_reference(const ReferenceHistograms& h) {
  ByteWriter w;
  w.put_bytes("RHST");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.tables[0].bins()));
  for (const auto& t : h.tables) w.put_span<float>(t.points);
  return std::move(w.bytes());
}

inline ReferenceHistograms decode_reference(std::span<const char> bytes, const std::string& context = "reference") {
  ByteReader r(bytes, context);
  if (r.get_string(4) != "RHST") throw Error(ErrorCode::BadMagic, context + ": expected RHST");
  const auto bins = r.get<std::uint32_t>();
  if (bins < 2 || bins > (1u << 24)) throw Error(ErrorCode::BadHeader, context + ": bins");
  ReferenceHistograms h;
  for (auto& t : h.tables) {
    t.points.resize(bins + 1);
    r.get_span<float>(t.points);
  }
  return h;
}

/// Writes every bundle file into a staging directory and renames it into
/// place, replacing any previous bundle at `dir`.
inline void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  auto staging = dir;
  staging += ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    atomic_write_text(staging / kConfigFile, to_config_text(b.config));
    atomic_write_file(staging / kReferenceFile, encode_reference(b.reference));
    for (auto m : kModalities) {
      save_codebook(b.codebooks[static_cast<std::size_t>(m)], staging / codebook_file(m));
    }
    save_forest(b.forest, staging / kForestFile);
    if (b.fcn) fcn::save_weights(*b.fcn, staging / kWeightsFile);
    fs::remove_all(dir);
    fs::rename(staging, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

inline ModelBundle load_bundle(const std::filesystem::path& dir) {
  ModelBundle b;
  const auto text = read_file(dir / kConfigFile);
  b.config = parse_config_text(std::string(text.begin(), text.end()));
  b.config.validate();
  const auto ref = read_file(dir / kReferenceFile);
  b.reference = decode_reference(ref, (dir / kReferenceFile).string());
  for (auto m : kModalities) {
    auto cb = load_codebook(dir / codebook_file(m));
    if (cb.modality != m) throw Error(ErrorCode::BadHeader, codebook_file(m) + ": modality tag");
    b.codebooks[static_cast<std::size_t>(m)] = std::move(cb);
  }
  b.forest = load_forest(dir / kForestFile);
  if (std::filesystem::exists(dir / kWeightsFile)) b.fcn = fcn::load_weights(dir / kWeightsFile);
  return b;
}

}  // namespace tumorseg
