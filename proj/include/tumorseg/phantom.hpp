#pragma once

// Synthetic multimodal brain phantoms: a brain ellipsoid holding an
// ellipsoidal tumor made of nested shells (necrotic core, enhancing rim,
// non-enhancing rim, oedema), with BRATS-like contrasts per protocol.

#include <array>
#include <cmath>
#include <cstdint>

#include "tumorseg/morphology.hpp"
#include "tumorseg/random.hpp"
#include "tumorseg/score_map.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct PhantomSpec {
  Dims dims{64, 64, 32};
  std::uint64_t seed = 0;
  std::array<double, 3> tumor_center{32, 32, 16};
  /// Semi-axes of the outer (oedema) boundary.
  std::array<double, 3> tumor_radii{12, 10, 7};
  /// Outer boundary of each inner shell as a fraction of the tumor radii:
  /// necrosis, enhancing, non-enhancing.
  std::array<double, 3> shell_fractions{0.3, 0.5, 0.72};
  /// Mean intensity per tissue label (rows) and modality FLAIR, T1c, T2.
  std::array<std::array<double, 3>, kNumClasses> means{{
      {300.0, 420.0, 350.0},  // normal
      {380.0, 140.0, 640.0},  // necrosis
      {720.0, 480.0, 680.0},  // oedema
      {560.0, 260.0, 560.0},  // non-enhancing
      {470.0, 880.0, 470.0},  // enhancing
  }};
  double noise_std = 18.0;

  /// Brain ellipsoid semi-axes derived from the dims.
  std::array<double, 3> brain_radii() const {
    return {0.44 * dims.nx, 0.44 * dims.ny, 0.44 * dims.nz};
  }
  std::array<double, 3> brain_center() const {
    return {(dims.nx - 1) / 2.0, (dims.ny - 1) / 2.0, (dims.nz - 1) / 2.0};
  }

  void validate() const {
    if (!dims.valid()) throw Error(ErrorCode::BadDimension, "phantom dims");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise std must be >= 0");
    const auto bc = brain_center();
    const auto br = brain_radii();
    // The tumor bounding box must sit inside the brain ellipsoid: every
    // box corner has normalized brain radius < 1.
    for (int i = 0; i < 3; ++i) {
      if (tumor_radii[static_cast<std::size_t>(i)] < 0.0) throw Error(ErrorCode::InvalidArgument, "tumor radius < 0");
    }
    for (int cx = -1; cx <= 1; cx += 2)
      for (int cy = -1; cy <= 1; cy += 2)
        for (int cz = -1; cz <= 1; cz += 2) {
          const double px = tumor_center[0] + cx * tumor_radii[0];
          const double py = tumor_center[1] + cy * tumor_radii[1];
          const double pz = tumor_center[2] + cz * tumor_radii[2];
          const double rho = (px - bc[0]) * (px - bc[0]) / (br[0] * br[0]) +
                             (py - bc[1]) * (py - bc[1]) / (br[1] * br[1]) +
                             (pz - bc[2]) * (pz - bc[2]) / (br[2] * br[2]);
          if (rho >= 1.0) throw Error(ErrorCode::InvalidArgument, "tumor exceeds brain");
        }
    for (int i = 0; i < 3; ++i) {
      const double f = shell_fractions[static_cast<std::size_t>(i)];
      if (!(f > 0.0 && f < 1.0) || (i > 0 && f <= shell_fractions[static_cast<std::size_t>(i) - 1])) {
        throw Error(ErrorCode::InvalidArgument, "shell fractions must increase within (0, 1)");
      }
    }
  }
};

/// Ground-truth label at a voxel centre.
inline std::uint8_t phantom_label(const PhantomSpec& s, int x, int y, int z) {
  const auto bc = s.brain_center();
  const auto br = s.brain_radii();
  const double b = (x - bc[0]) * (x - bc[0]) / (br[0] * br[0]) + (y - bc[1]) * (y - bc[1]) / (br[1] * br[1]) +
                   (z - bc[2]) * (z - bc[2]) / (br[2] * br[2]);
  if (b > 1.0) return 0;
  const auto& c = s.tumor_center;
  const auto& r = s.tumor_radii;
  if (r[0] <= 0.0 || r[1] <= 0.0 || r[2] <= 0.0) return 0;
  // Squared normalized radius compared against squared shell fractions.
  const double t = (x - c[0]) * (x - c[0]) / (r[0] * r[0]) + (y - c[1]) * (y - c[1]) / (r[1] * r[1]) +
                   (z - c[2]) * (z - c[2]) / (r[2] * r[2]);
  const auto& f = s.shell_fractions;
  if (t <= f[0] * f[0]) return static_cast<std::uint8_t>(Tissue::Necrosis);
  if (t <= f[1] * f[1]) return static_cast<std::uint8_t>(Tissue::Enhancing);
  if (t <= f[2] * f[2]) return static_cast<std::uint8_t>(Tissue::NonEnhancing);
  if (t <= 1.0) return static_cast<std::uint8_t>(Tissue::Oedema);
  return static_cast<std::uint8_t>(Tissue::Normal);
}

inline bool phantom_in_brain(const PhantomSpec& s, int x, int y, int z) {
  const auto bc = s.brain_center();
  const auto br = s.brain_radii();
  return (x - bc[0]) * (x - bc[0]) / (br[0] * br[0]) + (y - bc[1]) * (y - bc[1]) / (br[1] * br[1]) +
             (z - bc[2]) * (z - bc[2]) / (br[2] * br[2]) <=
         1.0;
}

struct Phantom {
  MultimodalVolume image;
  LabelVolume truth;
};

inline Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;
  std::array<Volume3D, 3> vol{Volume3D(d), Volume3D(d), Volume3D(d)};
  LabelVolume truth(d);
  Rng rng = make_rng(spec.seed, 0x7068616eull);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!phantom_in_brain(spec, x, y, z)) continue;
        const std::uint8_t label = phantom_label(spec, x, y, z);
        truth.at(x, y, z) = label;
        for (std::size_t m = 0; m < 3; ++m) {
          const double noise = spec.noise_std > 0.0 ? spec.noise_std * standard_normal(rng) : 0.0;
          // Brain voxels stay strictly positive so zero keeps meaning background.
          vol[m].at(x, y, z) = static_cast<float>(std::max(1.0, spec.means[label][m] + noise));
        }
      }
  return {MultimodalVolume(std::move(vol[0]), std::move(vol[1]), std::move(vol[2])), std::move(truth)};
}

/// Per-case variation of the default geometry: tumor position, size and
/// shell proportions jittered by seed.
inline PhantomSpec random_phantom_spec(Dims dims, std::uint64_t seed) {
  PhantomSpec s;
  s.dims = dims;
  s.seed = seed;
  Rng rng = make_rng(seed, 0x73706563ull);
  auto jitter = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  const auto bc = s.brain_center();
  const auto br = s.brain_radii();
  for (std::size_t i = 0; i < 3; ++i) {
    s.tumor_radii[i] = br[i] * jitter(0.34, 0.46);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double room = br[i] * 0.25;
    s.tumor_center[i] = bc[i] + jitter(-room, room);
  }
  s.shell_fractions = {jitter(0.26, 0.34), jitter(0.46, 0.54), jitter(0.68, 0.76)};
  // Shrink until the tumor fits; the jitter ranges make this rare.
  for (int attempt = 0; attempt < 20; ++attempt) {
    try {
      s.validate();
      return s;
    } catch (const Error&) {
      for (auto& r : s.tumor_radii) r *= 0.9;
    }
  }
  s.validate();
  return s;
}

struct OracleScoreOptions {
  int blur_radius = 0;
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Ground-truth derived stand-in for network scores. The tumor is grown by
/// `blur_radius` (grown voxels read as oedema), a `flip_rate` fraction of
/// voxels is relabeled to a different random class, and the resulting
/// one-hot field is softened with its 3x3x3 neighbourhood mean
/// (0.7 one-hot + 0.3 local mean), which keeps every voxel's argmax.
inline ScoreMap oracle_scores(const LabelVolume& truth, const OracleScoreOptions& opt) {
  if (!(opt.flip_rate >= 0.0 && opt.flip_rate < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "flip_rate must lie in [0, 0.5)");
  }
  if (opt.blur_radius < 0) throw Error(ErrorCode::InvalidArgument, "blur radius must be >= 0");
  const Dims& d = truth.dims();
  LabelVolume label = truth;
  if (opt.blur_radius > 0) {
    BinaryMask tumor(d, truth.spacing());
    for (std::size_t i = 0; i < truth.size(); ++i) tumor[i] = truth[i] != 0;
    const BinaryMask grown = dilate3d(tumor, opt.blur_radius);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (grown[i] && !tumor[i]) label[i] = static_cast<std::uint8_t>(Tissue::Oedema);
    }
  }
  if (opt.flip_rate > 0.0) {
    Rng rng = make_rng(opt.seed, 0x666c6970ull);
    for (std::size_t i = 0; i < label.size(); ++i) {
      if (uniform01(rng) < opt.flip_rate) {
        const auto shift = 1 + uniform_index(rng, kNumClasses - 1);
        label[i] = static_cast<std::uint8_t>((label[i] + shift) % kNumClasses);
      }
    }
  }
  ScoreMap scores(d);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        std::array<double, kNumClasses> local{};
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (!d.contains(x + dx, y + dy, z + dz)) continue;
              ++local[label.at(x + dx, y + dy, z + dz)];
              ++n;
            }
        auto out = scores.voxel(linear_index(d, x, y, z));
        const auto own = label.at(x, y, z);
        double sum = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
          const double v = 0.7 * (c == own ? 1.0 : 0.0) + 0.3 * local[static_cast<std::size_t>(c)] / n;
          out[static_cast<std::size_t>(c)] = static_cast<float>(v);
          sum += out[static_cast<std::size_t>(c)];
        }
        for (auto& v : out) v = static_cast<float>(v / sum);
      }
  return scores;
}

}  // namespace tumorseg
