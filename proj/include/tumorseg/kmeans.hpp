#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tumorseg/error.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/random.hpp"

namespace tumorseg {

struct KMeansOptions {
  int k = 16;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-4;
};

struct KMeansResult {
  int k = 0;
  int dim = 0;
  std::vector<double> centroids;  // k x dim, row-major
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective;
  int iterations = 0;
};

namespace detail {

inline double squared_distance(const float* a, const double* b, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double d = static_cast<double>(a[j]) - b[j];
    s += d * d;
  }
  return s;
}

/// Nearest centroid; ties go to the lowest index.
inline int nearest_centroid(const float* p, const std::vector<double>& centroids, int k, int dim, double* best_d) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const double d = squared_distance(p, centroids.data() + static_cast<std::size_t>(c) * dim, dim);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  if (best_d) *best_d = bd;
  return best;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeding. `points` holds n rows of `dim`.
inline KMeansResult kmeans_fit(std::span<const float> points, int dim, const KMeansOptions& opt) {
  if (dim <= 0 || points.size() % static_cast<std::size_t>(dim) != 0) {
    throw Error(ErrorCode::InvalidArgument, "point buffer is not a whole number of rows");
  }
  if (opt.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::size_t n = points.size() / static_cast<std::size_t>(dim);
  if (n < static_cast<std::size_t>(opt.k)) {
    throw Error(ErrorCode::NotEnoughPoints,
                std::to_string(n) + " points for k = " + std::to_string(opt.k));
  }
  const int k = opt.k;
  const auto row = [&](std::size_t i) { return points.data() + i * static_cast<std::size_t>(dim); };

  KMeansResult res;
  res.k = k;
  res.dim = dim;
  res.centroids.assign(static_cast<std::size_t>(k) * dim, 0.0);
  auto set_centroid = [&](int c, std::size_t i) {
    for (int j = 0; j < dim; ++j) res.centroids[static_cast<std::size_t>(c) * dim + j] = row(i)[j];
  };

  // k-means++ seeding.
  Rng rng = make_rng(opt.seed, 0x6b6d);
  set_centroid(0, uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = detail::squared_distance(row(i), res.centroids.data(), dim);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    set_centroid(c, pick);
    const double* cc = res.centroids.data() + static_cast<std::size_t>(c) * dim;
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], detail::squared_distance(row(i), cc, dim));
  }

  std::vector<int> label(n);
  std::vector<double> dist(n);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    parallel_for(
        n,
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) label[i] = detail::nearest_centroid(row(i), res.centroids, k, dim, &dist[i]);
        },
        1024);
    double obj = 0.0;
    for (double v : dist) obj += v;
    res.objective.push_back(obj);
    res.iterations = iter + 1;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(label[i]);
      ++counts[c];
      double* s = sums.data() + c * dim;
      for (int j = 0; j < dim; ++j) s[j] += row(i)[j];
    }
    double max_shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;  // empty cluster keeps its centroid
      double shift = 0.0;
      for (int j = 0; j < dim; ++j) {
        const auto idx = static_cast<std::size_t>(c) * dim + j;
        const double updated = sums[idx] / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        shift += (updated - res.centroids[idx]) * (updated - res.centroids[idx]);
        res.centroids[idx] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    if (max_shift < opt.tol) break;
  }
  return res;
}

}  // namespace tumorseg
