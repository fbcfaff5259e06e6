#include <gtest/gtest.h>

#include <queue>
#include <random>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tumorseg/morphology.hpp"

using namespace tumorseg;
using namespace oracle;
using testsupport::random_mask;

namespace {

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

Dims random_dims(std::mt19937& rng, int max_side) {
  std::uniform_int_distribution<int> s(1, max_side);
  return {s(rng), s(rng), s(rng)};
}

// Flood fill with an explicit 26-neighbourhood, independent of the library.
std::vector<int> flood_fill(const BinaryMask& m, int* count) {
  const Dims& d = m.dims();
  std::vector<int> id(m.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m[s] || id[s] >= 0) continue;
    std::queue<Voxel> q;
    q.push(voxel_at(d, s));
    id[s] = next;
    while (!q.empty()) {
      const Voxel v = q.front();
      q.pop();
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = v.x + dx, y = v.y + dy, z = v.z + dz;
            if (!d.contains(x, y, z)) continue;
            const auto j = linear_index(d, x, y, z);
            if (m[j] && id[j] < 0) {
              id[j] = next;
              q.push({x, y, z});
            }
          }
    }
    ++next;
  }
  *count = next;
  return id;
}

}  // namespace

TEST(Dilate, EmptyStaysEmpty) {
  const BinaryMask m({9, 9, 9});
  EXPECT_EQ(dilate3d(m, 4), m);
}

TEST(Dilate, RadiusZeroIdentity) {
  const auto m = random_mask({8, 7, 6}, 0.3, 1);
  EXPECT_EQ(dilate3d(m, 0), m);
}

TEST(Dilate, SingleVoxelBallCount) {
  BinaryMask m({31, 31, 31});
  m.at(15, 15, 15) = 1;
  long expected = 0;
  for (int a = -10; a <= 10; ++a)
    for (int b = -10; b <= 10; ++b)
      for (int c = -10; c <= 10; ++c) expected += a * a + b * b + c * c <= 100;
  EXPECT_EQ(static_cast<long>(count_true(dilate3d(m, 10))), expected);
  EXPECT_EQ(expected, 4169);
}

TEST(Dilate, MatchesBruteForceProperty) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const Dims d = random_dims(rng, 14);
    const auto m = random_mask(d, 0.02 + 0.05 * (trial % 3), static_cast<std::uint64_t>(trial));
    const int r = std::uniform_int_distribution<int>(0, 5)(rng);
    ASSERT_EQ(dilate3d(m, r), naive_dilate(m, r)) << "trial " << trial;
  }
}

TEST(Dilate, ExtensiveMonotoneComposableProperty) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d = random_dims(rng, 20);
    const auto a = random_mask(d, 0.01, static_cast<std::uint64_t>(trial));
    BinaryMask b = a;
    const auto extra = random_mask(d, 0.01, static_cast<std::uint64_t>(trial + 500));
    for (std::size_t i = 0; i < b.size(); ++i) b[i] |= extra[i];
    const int r = std::uniform_int_distribution<int>(0, 4)(rng);
    const int s = std::uniform_int_distribution<int>(0, 3)(rng);
    const auto da = dilate3d(a, r);
    ASSERT_TRUE(subset(a, da));
    ASSERT_TRUE(subset(da, dilate3d(b, r)));
    ASSERT_TRUE(subset(dilate3d(da, s), dilate3d(a, r + s)));
  }
}

TEST(Components, MatchesFloodFillProperty) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d = random_dims(rng, 20);
    const auto m = random_mask(d, 0.1 + 0.03 * (trial % 5), static_cast<std::uint64_t>(trial));
    int count = 0;
    const auto oracle = flood_fill(m, &count);
    const auto c = connected_components(m);
    ASSERT_EQ(static_cast<int>(c.sizes.size()), count);
    // Same partition: a consistent bijection between ids.
    std::vector<int> map(static_cast<std::size_t>(count), -1);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(count), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) {
        ASSERT_EQ(c.id[i], -1);
        continue;
      }
      auto& slot = map[static_cast<std::size_t>(oracle[i])];
      if (slot < 0) slot = c.id[i];
      ASSERT_EQ(slot, c.id[i]);
      ++sizes[static_cast<std::size_t>(c.id[i])];
    }
    ASSERT_EQ(sizes, c.sizes);
  }
}

TEST(Components, DiagonalNeighboursConnect) {
  BinaryMask m({3, 3, 3});
  m.at(0, 0, 0) = 1;
  m.at(1, 1, 1) = 1;
  m.at(2, 2, 2) = 1;
  EXPECT_EQ(connected_components(m).sizes.size(), 1u);
}
