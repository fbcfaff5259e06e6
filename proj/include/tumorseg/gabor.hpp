#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "tumorseg/error.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct GaborParams {
  double theta = 0.0;   // orientation, radians
  double sigma = 1.0;   // Gaussian envelope std
  double lambda = 1.0;  // sinusoid wavelength
  double psi = 0.0;     // phase
  double gamma = 0.5;   // spatial aspect ratio

  void validate() const {
    if (!(sigma > 0.0 && lambda > 0.0 && gamma > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "gabor sigma, lambda and gamma must be positive");
    }
  }
  friend bool operator==(const GaborParams&, const GaborParams&) = default;
};

/// Square complex kernel indexed by offsets in [-half_width, half_width].
struct GaborKernel {
  GaborParams params;
  int half_width = 1;
  std::vector<std::complex<double>> values;

  int side() const { return 2 * half_width + 1; }
  std::complex<double> at(int x, int y) const {
    return values[static_cast<std::size_t>((y + half_width) * side() + (x + half_width))];
  }
};

/// Raw (unnormalized) Gabor function
///   exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * exp(i (2 pi x' / lambda + psi))
/// with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta).
inline std::complex<double> gabor_value(const GaborParams& p, double x, double y) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  const double xr = x * c + y * s;
  const double yr = -x * s + y * c;
  const double envelope = std::exp(-(xr * xr + p.gamma * p.gamma * yr * yr) / (2.0 * p.sigma * p.sigma));
  const double phase = 2.0 * std::numbers::pi * xr / p.lambda + p.psi;
  return envelope * std::complex<double>(std::cos(phase), std::sin(phase));
}

inline GaborKernel gabor_kernel(const GaborParams& p, int half_width) {
  p.validate();
  if (half_width < 1) throw Error(ErrorCode::InvalidArgument, "half_width must be >= 1");
  GaborKernel k{p, half_width, {}};
  k.values.resize(static_cast<std::size_t>(k.side() * k.side()));
  for (int y = -half_width; y <= half_width; ++y)
    for (int x = -half_width; x <= half_width; ++x)
      k.values[static_cast<std::size_t>((y + half_width) * k.side() + (x + half_width))] = gabor_value(p, x, y);
  return k;
}

/// Kernel extent covering three envelope standard deviations.
inline int gabor_half_width(double sigma) {
  return std::max(1, static_cast<int>(std::ceil(3.0 * sigma - 1e-9)));
}

struct GaborGrid {
  std::vector<double> thetas_deg{0, 30, 45, 60, 90, 120};
  std::vector<double> sigmas{0.3, 0.6, 0.9, 1.2, 1.5};
  std::vector<double> lambdas{0.8, 1.0, 1.2, 1.5};
  double psi = 0.0;
  double gamma = 0.5;

  friend bool operator==(const GaborGrid&, const GaborGrid&) = default;
};

struct FilterBank {
  std::vector<GaborKernel> kernels;
  std::size_t size() const { return kernels.size(); }
};

/// Cartesian product theta x sigma x lambda (theta outermost).
inline FilterBank build_filter_bank(const GaborGrid& grid = {}) {
  if (grid.thetas_deg.empty() || grid.sigmas.empty() || grid.lambdas.empty()) {
    throw Error(ErrorCode::InvalidArgument, "filter bank grid has an empty parameter list");
  }
  FilterBank bank;
  for (double t : grid.thetas_deg)
    for (double s : grid.sigmas)
      for (double l : grid.lambdas) {
        const GaborParams p{t * std::numbers::pi / 180.0, s, l, grid.psi, grid.gamma};
        bank.kernels.push_back(gabor_kernel(p, gabor_half_width(s)));
      }
  return bank;
}

/// Per-voxel filter responses, bank-size values per voxel, voxel-major.
struct ResponseStack {
  Dims dims{};
  int filters = 0;
  std::vector<float> data;

  std::span<const float> voxel(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(filters), static_cast<std::size_t>(filters)};
  }
};

/// Responses of one axial slice: result[(y * nx + x) * bank + f] is the
/// magnitude of the zero-padded 2D convolution with kernel f.
inline std::vector<float> convolve_slice(const Volume3D& vol, int z, const FilterBank& bank) {
  const Dims& d = vol.dims();
  const int nx = d.nx;
  const int ny = d.ny;
  const std::size_t plane = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  const std::size_t nf = bank.size();
  const float* img = vol.data().data() + static_cast<std::size_t>(z) * plane;
  std::vector<float> out(plane * nf);
  std::vector<double> re(plane);
  std::vector<double> im(plane);
  for (std::size_t f = 0; f < nf; ++f) {
    const GaborKernel& k = bank.kernels[f];
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const int hw = k.half_width;
    for (int v = -hw; v <= hw; ++v) {
      for (int u = -hw; u <= hw; ++u) {
        const std::complex<double> kv = k.at(u, v);
        const double kr = kv.real();
        const double ki = kv.imag();
        // out(x, y) += img(x - u, y - v) * K(u, v)
        const int x0 = std::max(0, u);
        const int x1 = std::min(nx, nx + u);
        for (int y = std::max(0, v); y < std::min(ny, ny + v); ++y) {
          const float* src = img + static_cast<std::size_t>(y - v) * nx;
          double* r = re.data() + static_cast<std::size_t>(y) * nx;
          double* i = im.data() + static_cast<std::size_t>(y) * nx;
          for (int x = x0; x < x1; ++x) {
            const double s = src[x - u];
            r[x] += s * kr;
            i[x] += s * ki;
          }
        }
      }
    }
    for (std::size_t p = 0; p < plane; ++p) {
      out[p * nf + f] = static_cast<float>(std::sqrt(re[p] * re[p] + im[p] * im[p]));
    }
  }
  return out;
}

/// Magnitude responses of every filter on every axial slice.
inline ResponseStack convolve_bank(const Volume3D& vol, const FilterBank& bank) {
  if (bank.kernels.empty()) throw Error(ErrorCode::InvalidArgument, "empty filter bank");
  ResponseStack rs{vol.dims(), static_cast<int>(bank.size()), {}};
  const std::size_t plane = static_cast<std::size_t>(vol.dims().nx) * static_cast<std::size_t>(vol.dims().ny);
  rs.data.resize(vol.size() * bank.size());
  parallel_for(static_cast<std::size_t>(vol.dims().nz), [&](std::size_t b, std::size_t e) {
    for (std::size_t z = b; z < e; ++z) {
      const auto slice = convolve_slice(vol, static_cast<int>(z), bank);
      std::copy(slice.begin(), slice.end(), rs.data.begin() + static_cast<std::ptrdiff_t>(z * plane * bank.size()));
    }
  });
  return rs;
}

}  // namespace tumorseg
