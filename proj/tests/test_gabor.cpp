#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tumorseg/gabor.hpp"

using namespace tumorseg;
using namespace oracle;

namespace {

// Direct evaluation of the Gabor function written out independently.
std::complex<double> gabor_oracle(double theta, double sigma, double lambda, double psi, double gamma, double x,
                                  double y) {
  const double xr = x * std::cos(theta) + y * std::sin(theta);
  const double yr = -x * std::sin(theta) + y * std::cos(theta);
  const double env = std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2 * sigma * sigma));
  const double arg = 2 * std::numbers::pi * xr / lambda + psi;
  return {env * std::cos(arg), env * std::sin(arg)};
}

}  // namespace

TEST(Gabor, OriginIsOne) {
  for (double theta : {0.0, 0.7, 2.0})
    for (double sigma : {0.3, 1.5}) {
      const auto k = gabor_kernel({theta, sigma, 1.2, 0.0, 0.5}, 2);
      EXPECT_NEAR(k.at(0, 0).real(), 1.0, 1e-15);
      EXPECT_NEAR(k.at(0, 0).imag(), 0.0, 1e-15);
    }
}

TEST(Gabor, SpotValue) {
  const auto k = gabor_kernel({0.0, 1.0, 1.0, 0.0, 1.0}, 1);
  EXPECT_NEAR(k.at(1, 0).real(), 0.6065, 1e-4);
  EXPECT_NEAR(k.at(1, 0).real(), std::exp(-0.5), 1e-12);
}

TEST(Gabor, MatchesDirectFormula) {
  const GaborParams p{0.9, 1.1, 1.3, 0.4, 0.7};
  const auto k = gabor_kernel(p, 4);
  for (int y = -4; y <= 4; ++y)
    for (int x = -4; x <= 4; ++x) {
      const auto e = gabor_oracle(p.theta, p.sigma, p.lambda, p.psi, p.gamma, x, y);
      EXPECT_NEAR(std::abs(k.at(x, y) - e), 0.0, 1e-12);
    }
}

TEST(Gabor, NinetyDegreesIsTranspose) {
  const auto k0 = gabor_kernel({0.0, 1.2, 1.5, 0.0, 1.0}, 4);
  const auto k90 = gabor_kernel({std::numbers::pi / 2, 1.2, 1.5, 0.0, 1.0}, 4);
  for (int y = -4; y <= 4; ++y)
    for (int x = -4; x <= 4; ++x) {
      EXPECT_NEAR(std::abs(k0.at(x, y)), std::abs(k90.at(y, x)), 1e-12);
      EXPECT_NEAR(k0.at(x, y).real(), k90.at(y, x).real(), 1e-12);
    }
}

TEST(Gabor, ParityProperty) {
  const auto bank = build_filter_bank();
  for (const auto& k : bank.kernels) {
    const int hw = k.half_width;
    for (int y = -hw; y <= hw; ++y)
      for (int x = -hw; x <= hw; ++x) {
        ASSERT_NEAR(k.at(x, y).real(), k.at(-x, -y).real(), 1e-12);
        ASSERT_NEAR(k.at(x, y).imag(), -k.at(-x, -y).imag(), 1e-12);
      }
  }
}

TEST(FilterBank, DefaultGridHas120Filters) {
  const auto bank = build_filter_bank();
  EXPECT_EQ(bank.size(), 120u);
  for (const auto& k : bank.kernels) EXPECT_EQ(k.side() % 2, 1);
  // Theta outermost, then sigma, then lambda.
  EXPECT_NEAR(bank.kernels[20].params.theta, std::numbers::pi / 6, 1e-12);
  EXPECT_DOUBLE_EQ(bank.kernels[4].params.sigma, 0.6);
  EXPECT_DOUBLE_EQ(bank.kernels[1].params.lambda, 1.0);
}

TEST(FilterBank, SingleEntryAndHalfWidthRule) {
  GaborGrid g;
  g.thetas_deg = {0};
  g.sigmas = {0.3};
  g.lambdas = {1.0};
  const auto bank = build_filter_bank(g);
  ASSERT_EQ(bank.size(), 1u);
  EXPECT_EQ(bank.kernels[0].half_width, 1);
  EXPECT_EQ(bank.kernels[0].side(), 3);
  EXPECT_EQ(gabor_half_width(0.6), 2);
  EXPECT_EQ(gabor_half_width(1.5), 5);
  g.sigmas.clear();
  EXPECT_THROW(build_filter_bank(g), Error);
}

TEST(ConvolveBank, ZeroVolume) {
  const auto rs = convolve_bank(Volume3D({6, 5, 2}), build_filter_bank());
  for (float v : rs.data) ASSERT_EQ(v, 0.0f);
}

TEST(ConvolveBank, DeltaGivesKernelOriginMagnitude) {
  Volume3D v({11, 11, 1});
  v.at(5, 5, 0) = 1.0f;
  const auto bank = build_filter_bank();
  const auto rs = convolve_bank(v, bank);
  const auto center = rs.voxel(linear_index(v.dims(), 5, 5, 0));
  for (std::size_t f = 0; f < bank.size(); ++f) EXPECT_NEAR(center[f], 1.0f, 1e-6);
  // Off-centre the response is the kernel magnitude at the offset.
  const auto off = rs.voxel(linear_index(v.dims(), 6, 5, 0));
  for (std::size_t f = 0; f < bank.size(); ++f) EXPECT_NEAR(off[f], std::abs(bank.kernels[f].at(1, 0)), 1e-6);
}

TEST(ConvolveBank, MatchesDirectSumOracle) {
  const Volume3D v = testsupport::random_volume({16, 16, 2}, 12);
  const auto bank = build_filter_bank();
  const auto rs = convolve_bank(v, bank);
  const auto oracle = naive_bank(v, bank);
  ASSERT_EQ(rs.data.size(), oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) ASSERT_NEAR(rs.data[i], oracle[i], 1e-5);
}

TEST(ConvolveBank, ThreadCountIndependent) {
  const Volume3D v = testsupport::random_volume({9, 7, 5}, 3);
  const auto bank = build_filter_bank();
  set_thread_count(1);
  const auto a = convolve_bank(v, bank);
  set_thread_count(4);
  const auto b = convolve_bank(v, bank);
  set_thread_count(0);
  EXPECT_EQ(a.data, b.data);
}
