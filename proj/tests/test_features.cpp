#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"
#include "tumorseg/features.hpp"
#include "tumorseg/forest.hpp"

using namespace tumorseg;
using testsupport::TempDir;

namespace {

ScoreMap uniform_scores(Dims d) {
  ScoreMap s(d);
  for (auto& v : s.data()) v = 0.2f;
  return s;
}

TextonMaps random_textons(Dims d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TextonMaps t;
  for (auto& m : t.maps) {
    m = TextonMap(d);
    for (auto& v : m.data()) v = static_cast<std::uint16_t>(rng() % 16);
  }
  return t;
}

MultimodalVolume random_case(Dims d) {
  return stack_modalities(testsupport::random_volume(d, 1), testsupport::random_volume(d, 2),
                          testsupport::random_volume(d, 3));
}

}  // namespace

TEST(FeatureLayout, FiftySixNamedColumns) {
  EXPECT_EQ(feature_count(16), 56);
  const auto names = feature_names();
  ASSERT_EQ(names.size(), 56u);
  EXPECT_EQ(names[0], "score_0");
  EXPECT_EQ(names[4], "score_4");
  EXPECT_EQ(names[5], "intensity_flair");
  EXPECT_EQ(names[7], "intensity_t2");
  EXPECT_EQ(names[8], "texton_flair_0");
  EXPECT_EQ(names[24], "texton_t1c_0");
  EXPECT_EQ(names[55], "texton_t2_15");
}

TEST(TumorRoi, UniformScoresEmpty) {
  EXPECT_EQ(count_true(tumor_roi(uniform_scores({5, 5, 5}))), 0u);
}

TEST(TumorRoi, SingleConfidentVoxel) {
  ScoreMap s = uniform_scores({5, 5, 5});
  auto v = s.voxel(linear_index(s.dims(), 2, 3, 4));
  const float p[5] = {0.025f, 0.025f, 0.9f, 0.025f, 0.025f};
  std::copy(p, p + 5, v.begin());
  const auto roi = tumor_roi(s);
  EXPECT_EQ(count_true(roi), 1u);
  EXPECT_EQ(roi.at(2, 3, 4), 1);
}

TEST(TumorRoi, CardinalityMatchesScan) {
  std::mt19937_64 rng(3);
  ScoreMap s({9, 8, 7});
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < s.voxel_count(); ++i) {
    auto v = s.voxel(i);
    float sum = 0.0f;
    for (auto& x : v) sum += (x = u(rng));
    for (auto& x : v) x /= sum;
    std::size_t best = 0;
    for (std::size_t c = 1; c < 5; ++c)
      if (v[c] > v[best]) best = c;
    expected += best != 0;
  }
  EXPECT_EQ(count_true(tumor_roi(s)), expected);
}

TEST(ClassificationRegion, MarginDilates) {
  ScoreMap s = uniform_scores({21, 21, 21});
  s.voxel(linear_index(s.dims(), 10, 10, 10))[1] = 0.9f;
  EXPECT_EQ(count_true(classification_region(s, {3})), 123u);  // lattice ball of radius 3
}

TEST(AssembleFeatures, SingleVoxelRow) {
  const Dims d{6, 6, 3};
  BinaryMask roi(d);
  roi.at(2, 3, 1) = 1;
  const auto mv = random_case(d);
  const auto fm = assemble_features(uniform_scores(d), mv, random_textons(d, 1), roi);
  ASSERT_EQ(fm.rows(), 1u);
  ASSERT_EQ(fm.cols, 56);
  EXPECT_EQ(fm.coords[0], (Voxel{2, 3, 1}));
  const auto row = fm.row(0);
  EXPECT_EQ(row[5], mv[Modality::Flair].at(2, 3, 1));
  EXPECT_EQ(row[6], mv[Modality::T1c].at(2, 3, 1));
  EXPECT_EQ(row[7], mv[Modality::T2].at(2, 3, 1));
}

TEST(AssembleFeatures, RowInvariantsProperty) {
  const Dims d{9, 8, 4};
  const auto mv = random_case(d);
  const auto tx = random_textons(d, 2);
  ScoreMap s(d);
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < s.voxel_count(); ++i) {
    auto v = s.voxel(i);
    float sum = 0.0f;
    for (auto& x : v) sum += (x = static_cast<float>(rng() % 100 + 1));
    for (auto& x : v) x /= sum;
  }
  const auto roi = testsupport::random_mask(d, 0.4, 3);
  const auto fm = assemble_features(s, mv, tx, roi);
  ASSERT_EQ(fm.rows(), count_true(roi));
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto row = fm.row(r);
    double ss = 0.0;
    for (int c = 0; c < 5; ++c) ss += row[static_cast<std::size_t>(c)];
    ASSERT_NEAR(ss, 1.0, 1e-5);
    for (int c = 5; c < 8; ++c) {
      ASSERT_GE(row[static_cast<std::size_t>(c)], 0.0f);
      ASSERT_LE(row[static_cast<std::size_t>(c)], 1.0f);
    }
    for (int m = 0; m < 3; ++m) {
      double hs = 0.0;
      for (int c = 0; c < 16; ++c) hs += row[static_cast<std::size_t>(8 + 16 * m + c)];
      ASSERT_NEAR(hs, 1.0, 1e-5);
    }
    // x-fastest order.
    if (r > 0) {
      const auto a = fm.coords[r - 1], b = fm.coords[r];
      ASSERT_LT(linear_index(d, a.x, a.y, a.z), linear_index(d, b.x, b.y, b.z));
    }
  }
}

TEST(AssembleFeatures, ShuffledOrderSortsToSameMatrix) {
  const Dims d{7, 7, 3};
  const auto mv = random_case(d);
  const auto tx = random_textons(d, 4);
  const auto roi = testsupport::random_mask(d, 0.3, 5);
  const auto fm = assemble_features(uniform_scores(d), mv, tx, roi);
  std::vector<std::size_t> order(fm.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937(8));
  FeatureMatrix shuffled = select_rows(fm, order);
  std::vector<std::size_t> back(order.size());
  std::iota(back.begin(), back.end(), 0);
  std::sort(back.begin(), back.end(), [&](auto a, auto b) {
    const auto& va = shuffled.coords[a];
    const auto& vb = shuffled.coords[b];
    return linear_index(d, va.x, va.y, va.z) < linear_index(d, vb.x, vb.y, vb.z);
  });
  EXPECT_EQ(select_rows(shuffled, back), fm);
}

TEST(AssembleFeatures, DimsMismatch) {
  const Dims d{4, 4, 4};
  EXPECT_THROW(assemble_features(uniform_scores({4, 4, 5}), random_case(d), random_textons(d, 1), BinaryMask(d)),
               Error);
}

TEST(FeatureDump, RoundTrip) {
  const Dims d{5, 5, 2};
  const auto fm = assemble_features(uniform_scores(d), random_case(d), random_textons(d, 1),
                                    testsupport::random_mask(d, 0.5, 2));
  TempDir dir;
  write_features(fm, dir / "f.bin");
  EXPECT_EQ(read_features(dir / "f.bin"), fm);
}
