#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tumorseg/phantom.hpp"
#include "tumorseg/evaluate.hpp"
#include "tumorseg/pipeline.hpp"

using namespace tumorseg;

namespace {

constexpr Dims kSmall{40, 40, 20};

CaseData phantom_case(std::uint64_t seed, bool with_scores = true) {
  Phantom p = generate_phantom(random_phantom_spec(kSmall, seed));
  CaseData c{"case" + std::to_string(seed), std::move(p.image), std::move(p.truth), std::nullopt};
  if (with_scores) c.scores = oracle_scores(*c.truth, {2, 0.05, seed});
  return c;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.texton.max_samples = 4000;
  cfg.texton.max_iter = 30;
  cfg.forest.n_trees = 50;
  cfg.set_seed(11);
  return cfg;
}

// Trained once and shared: training is the slow part of this suite.
const ModelBundle& shared_bundle() {
  static const ModelBundle bundle = [] {
    std::vector<CaseData> cases{phantom_case(1), phantom_case(2)};
    return train_pipeline(cases, small_config());
  }();
  return bundle;
}

LabelVolume cube_labels(Dims d, std::initializer_list<std::pair<Voxel, int>> cubes) {
  LabelVolume l(d);
  for (const auto& [c, half] : cubes)
    for (int z = c.z - half; z <= c.z + half; ++z)
      for (int y = c.y - half; y <= c.y + half; ++y)
        for (int x = c.x - half; x <= c.x + half; ++x) l.at(x, y, z) = 2;
  return l;
}

}  // namespace

TEST(Postprocess, SingleComponentUnchanged) {
  const auto l = cube_labels({20, 20, 20}, {{{10, 10, 10}, 3}});
  EXPECT_EQ(postprocess_components(l, 0.1), l);
}

TEST(Postprocess, SmallComponentErased) {
  // 10^3 = 1000 voxels versus a 50-voxel bar, far apart.
  LabelVolume l({30, 30, 30});
  for (int z = 0; z < 10; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) l.at(x, y, z) = 4;
  for (int x = 0; x < 25; ++x)
    for (int y = 0; y < 2; ++y) l.at(x, 20 + y, 25) = 1;
  const auto out = postprocess_components(l, 0.1);
  std::size_t kept = 0;
  for (auto v : out.data()) kept += v != 0;
  EXPECT_EQ(kept, 1000u);
  EXPECT_EQ(out.at(0, 20, 25), 0);
  EXPECT_EQ(out.at(5, 5, 5), 4);
}

TEST(Postprocess, AllZeroAndIdempotent) {
  const LabelVolume zero({5, 5, 5});
  EXPECT_EQ(postprocess_components(zero), zero);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = testsupport::random_mask({12, 12, 12}, 0.1, seed);
    LabelVolume l(m.dims());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = m[i] ? static_cast<std::uint8_t>(1 + i % 4) : 0;
    const auto once = postprocess_components(l, 0.1);
    ASSERT_EQ(postprocess_components(once, 0.1), once);
    for (std::size_t i = 0; i < l.size(); ++i) ASSERT_TRUE(once[i] == 0 || once[i] == l[i]);
  }
}

TEST(TrainPipeline, RejectsTumorFreeTraining) {
  CaseData c = phantom_case(1);
  for (auto& v : c.truth->data()) v = 0;
  try {
    train_pipeline({c}, small_config());
    FAIL() << "expected NoTumorInTraining";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoTumorInTraining);
  }
}

TEST(TrainPipeline, RejectsMissingLabel) {
  CaseData c = phantom_case(1);
  for (auto& v : c.truth->data())
    if (v == 3) v = 2;
  try {
    train_pipeline({c}, small_config());
    FAIL() << "expected MissingLabels";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLabels);
  }
}

TEST(TrainPipeline, RequiresScoresOrWeights) {
  EXPECT_THROW(train_pipeline({phantom_case(1, false)}, small_config()), Error);
}

TEST(TrainPipeline, BundleShape) {
  const ModelBundle& b = shared_bundle();
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(b.codebooks[m].k, 16);
    EXPECT_EQ(b.codebooks[m].dim, 120);
    EXPECT_EQ(b.codebooks[m].modality, static_cast<Modality>(m));
  }
  EXPECT_EQ(b.forest.trees.size(), 50u);
  EXPECT_EQ(b.forest.n_features, 56);
}

TEST(TrainPipeline, SummaryCounts) {
  TrainingSummary summary;
  PipelineConfig cfg = small_config();
  cfg.forest.n_trees = 5;
  cfg.forest.max_samples_per_class = 300;
  train_pipeline({phantom_case(1), phantom_case(2)}, cfg, nullptr, &summary);
  EXPECT_GT(summary.feature_rows, summary.training_rows);
  std::size_t total = 0;
  for (auto n : summary.class_rows) {
    EXPECT_LE(n, 300u);
    total += n;
  }
  EXPECT_EQ(total, summary.training_rows);
  EXPECT_FALSE(summary.timings.empty());
}

TEST(SegmentCase, LabelsOnlyInsideRoi) {
  const CaseData c = phantom_case(21);
  const auto res = segment_case(c, shared_bundle());
  ASSERT_EQ(res.labels.dims(), c.image.dims());
  for (std::size_t i = 0; i < res.labels.size(); ++i)
    if (res.labels[i]) {
      ASSERT_TRUE(res.roi[i]);
    }
  const auto rep = evaluate_case(res.labels, *c.truth);
  EXPECT_GT(rep[Region::Complete].dice, 0.8);
}

TEST(SegmentCase, EmptyRoiGivesZeros) {
  CaseData c = phantom_case(22);
  ScoreMap s(c.image.dims());
  for (std::size_t i = 0; i < c.image.dims().count(); ++i) s.voxel(i)[0] = 1.0f;
  c.scores = s;
  const auto res = segment_case(c, shared_bundle());
  for (auto v : res.labels.data()) ASSERT_EQ(v, 0);
}

TEST(SegmentCase, ThreadCountIndependent) {
  const CaseData c = phantom_case(23);
  set_thread_count(1);
  const auto a = segment_case(c, shared_bundle());
  set_thread_count(3);
  const auto b = segment_case(c, shared_bundle());
  set_thread_count(0);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Bundle, SaveLoadRoundTrip) {
  testsupport::TempDir tmp;
  const ModelBundle& b = shared_bundle();
  save_bundle(b, tmp / "model");
  const ModelBundle loaded = load_bundle(tmp / "model");
  EXPECT_EQ(to_config_text(loaded.config), to_config_text(b.config));
  EXPECT_EQ(loaded.codebooks, b.codebooks);
  EXPECT_EQ(encode_forest(loaded.forest), encode_forest(b.forest));
  EXPECT_EQ(encode_reference(loaded.reference), encode_reference(b.reference));
  EXPECT_FALSE(loaded.fcn.has_value());
  // Saving the loaded bundle reproduces every file byte for byte.
  save_bundle(loaded, tmp / "again");
  for (const auto& entry : std::filesystem::directory_iterator(tmp / "model")) {
    EXPECT_EQ(read_file(entry.path()), read_file(tmp / "again" / entry.path().filename())) << entry.path();
  }
  const CaseData c = phantom_case(24);
  EXPECT_EQ(segment_case(c, b).labels, segment_case(c, loaded).labels);
}

TEST(Bundle, TrainingIsDeterministic) {
  PipelineConfig cfg = small_config();
  cfg.forest.n_trees = 4;
  const std::vector<CaseData> cases{phantom_case(1), phantom_case(2)};
  const auto a = train_pipeline(cases, cfg);
  const auto b = train_pipeline(cases, cfg);
  EXPECT_EQ(a.codebooks, b.codebooks);
  EXPECT_EQ(encode_forest(a.forest), encode_forest(b.forest));
}

TEST(Bundle, MissingFileFails) {
  testsupport::TempDir tmp;
  save_bundle(shared_bundle(), tmp / "model");
  std::filesystem::remove(tmp / "model" / kForestFile);
  EXPECT_THROW(load_bundle(tmp / "model"), Error);
}
