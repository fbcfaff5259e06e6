#pragma once

// Bagged CART classification forest: Gini splits at midpoints between
// consecutive distinct values, a fresh random attribute subset at every
// node, majority vote across trees. All tie-breaks go to the lowest index.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/features.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/random.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

using ClassCounts = std::array<std::uint32_t, kNumClasses>;

struct ForestConfig {
  int n_trees = 50;
  int max_depth = 15;
  /// 0 selects floor(sqrt(n_features)).
  int k_attributes = 0;
  int min_leaf = 1;
  std::uint64_t seed = 0;
  /// Per-class training cap applied by seeded subsampling; 0 disables it.
  std::size_t max_samples_per_class = 100000;

  int resolved_k_attributes(int n_features) const {
    if (k_attributes > 0) return k_attributes;
    return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)) + 1e-9)));
  }

  void validate(int n_features) const {
    if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be >= 1");
    if (max_depth < 0) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 0");
    if (min_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
    const int k = resolved_k_attributes(n_features);
    if (k < 1 || k > n_features) throw Error(ErrorCode::InvalidArgument, "k_attributes must lie in [1, n_features]");
  }

  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

inline double gini_impurity(std::span<const std::uint32_t> counts) {
  double n = 0.0;
  for (auto c : counts) n += c;
  if (n <= 0.0) throw Error(ErrorCode::InvalidArgument, "gini of an empty node");
  double sq = 0.0;
  for (auto c : counts) sq += (c / n) * (c / n);
  return 1.0 - sq;
}

/// Most frequent class; ties go to the lowest label.
inline int majority_class(std::span<const std::uint32_t> counts) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(counts.size()); ++c) {
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;
  int left = -1;
  int right = -1;
  ClassCounts counts{};

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in pre-order; the root is nodes[0] and a split's left child follows it.
struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const float> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)];
  }

  int predict(std::span<const float> x) const { return majority_class(leaf_for(x).counts); }

  int depth() const { return depth_from(0); }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  int depth_from(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct Forest {
  ForestConfig config;
  int n_features = 0;
  std::vector<Tree> trees;

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Diagnostics gathered while growing a forest.
struct TrainingStats {
  double oob_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::size_t oob_evaluated = 0;
  /// Number of candidate attributes examined at every split node.
  std::vector<int> candidates_per_split;
  int max_depth_reached = 0;
};

struct Prediction {
  int label = 0;
  std::array<double, kNumClasses> vote_fractions{};
};

namespace detail {

struct TreeBuilder {
  const FeatureMatrix& x;
  std::span<const std::uint8_t> y;
  const ForestConfig& cfg;
  int k_attr;
  Rng rng;
  Tree tree;
  std::vector<int> candidates;
  std::vector<int> feature_pool;
  std::vector<std::pair<float, std::uint8_t>> sorted;

  ClassCounts count(std::span<const std::uint32_t> idx) const {
    ClassCounts c{};
    for (auto i : idx) ++c[y[i]];
    return c;
  }

  int build(std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t end, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::span<const std::uint32_t> here(idx.data() + begin, end - begin);
    const ClassCounts counts = count(here);
    tree.nodes[static_cast<std::size_t>(node_id)].counts = counts;
    const std::size_t n = end - begin;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (depth >= cfg.max_depth || pure || n < 2 * static_cast<std::size_t>(cfg.min_leaf)) return node_id;

    // Sample k attributes without replacement (partial Fisher-Yates).
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (int i = 0; i < k_attr; ++i) {
      const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(x.cols - i)));
      std::swap(feature_pool[static_cast<std::size_t>(i)], feature_pool[static_cast<std::size_t>(j)]);
    }
    std::vector<int> chosen(feature_pool.begin(), feature_pool.begin() + k_attr);
    std::sort(chosen.begin(), chosen.end());

    // Maximizing sum(c^2)/n over both sides minimizes weighted Gini impurity.
    double best_score = -1.0;
    int best_feature = -1;
    float best_threshold = 0.0f;
    for (int f : chosen) {
      sorted.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = here[r];
        sorted[r] = {x.values[static_cast<std::size_t>(row) * x.cols + static_cast<std::size_t>(f)], y[row]};
      }
      std::sort(sorted.begin(), sorted.end());
      ClassCounts left{};
      for (std::size_t r = 0; r + 1 < n; ++r) {
        ++left[sorted[r].second];
        if (!(sorted[r].first < sorted[r + 1].first)) continue;
        const std::size_t nl = r + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(cfg.min_leaf) || nr < static_cast<std::size_t>(cfg.min_leaf)) continue;
        double sl = 0.0;
        double sr = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
          const double cl = left[static_cast<std::size_t>(c)];
          const double cr = static_cast<double>(counts[static_cast<std::size_t>(c)]) - cl;
          sl += cl * cl;
          sr += cr * cr;
        }
        const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          const double lo = sorted[r].first;
          const double hi = sorted[r + 1].first;
          float t = static_cast<float>(lo + (hi - lo) / 2.0);
          if (!(t >= sorted[r].first && t < sorted[r + 1].first)) t = sorted[r].first;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return node_id;
    candidates.push_back(static_cast<int>(chosen.size()));

    auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                     idx.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t row) {
                                       return x.values[static_cast<std::size_t>(row) * x.cols +
                                                       static_cast<std::size_t>(best_feature)] <= best_threshold;
                                     });
    const auto split = static_cast<std::size_t>(mid - idx.begin());
    tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
    const int l = build(idx, begin, split, depth + 1);
    const int r = build(idx, split, end, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = l;
    tree.nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }
};

inline void check_training_data(const FeatureMatrix& x, std::span<const std::uint8_t> y) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (y.size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "label count != row count");
  for (auto label : y) {
    if (label >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "label outside {0..4}");
  }
}

}  // namespace detail

/// Grows cfg.n_trees trees, each on its own bootstrap sample drawn from a
/// per-tree seed, so the result depends only on (x, y, cfg).
inline Forest train_forest(const FeatureMatrix& x, std::span<const std::uint8_t> y, const ForestConfig& cfg,
                           TrainingStats* stats = nullptr) {
  detail::check_training_data(x, y);
  cfg.validate(x.cols);
  const std::size_t n = x.rows();
  const int k_attr = cfg.resolved_k_attributes(x.cols);

  Forest forest;
  forest.config = cfg;
  forest.config.k_attributes = k_attr;
  forest.n_features = x.cols;
  forest.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  std::vector<std::vector<std::uint8_t>> in_bag(static_cast<std::size_t>(cfg.n_trees));
  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(cfg.n_trees));

  parallel_for(static_cast<std::size_t>(cfg.n_trees), [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      detail::TreeBuilder builder{x, y, cfg, k_attr, make_rng(cfg.seed, t), {}, {}, {}, {}};
      builder.feature_pool.resize(static_cast<std::size_t>(x.cols));
      std::vector<std::uint32_t> idx(n);
      auto& bag = in_bag[t];
      bag.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<std::uint32_t>(uniform_index(builder.rng, n));
        bag[idx[i]] = 1;
      }
      std::sort(idx.begin(), idx.end());
      builder.build(idx, 0, n, 0);
      forest.trees[t] = std::move(builder.tree);
      candidates[t] = std::move(builder.candidates);
    }
  });

  if (stats) {
    stats->candidates_per_split.clear();
    stats->max_depth_reached = 0;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      stats->candidates_per_split.insert(stats->candidates_per_split.end(), candidates[t].begin(), candidates[t].end());
      stats->max_depth_reached = std::max(stats->max_depth_reached, forest.trees[t].depth());
    }
    std::size_t correct = 0;
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::array<std::uint32_t, kNumClasses> votes{};
      bool any = false;
      for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        if (in_bag[t][i]) continue;
        ++votes[static_cast<std::size_t>(forest.trees[t].predict(x.row(i)))];
        any = true;
      }
      if (!any) continue;
      ++evaluated;
      correct += majority_class(votes) == y[i];
    }
    stats->oob_evaluated = evaluated;
    stats->oob_accuracy = evaluated ? static_cast<double>(correct) / static_cast<double>(evaluated)
                                    : std::numeric_limits<double>::quiet_NaN();
  }
  return forest;
}

/// Plurality of the trees' leaf-majority votes.
inline Prediction predict_one(const Forest& f, std::span<const float> x) {
  if (f.trees.empty()) throw Error(ErrorCode::UntrainedForest, "forest has no trees");
  if (x.size() != static_cast<std::size_t>(f.n_features)) {
    throw Error(ErrorCode::FeatureCountMismatch,
                std::to_string(x.size()) + " features, forest expects " + std::to_string(f.n_features));
  }
  std::array<std::uint32_t, kNumClasses> votes{};
  for (const auto& t : f.trees) ++votes[static_cast<std::size_t>(t.predict(x))];
  Prediction p;
  p.label = majority_class(votes);
  for (int c = 0; c < kNumClasses; ++c) {
    p.vote_fractions[static_cast<std::size_t>(c)] =
        static_cast<double>(votes[static_cast<std::size_t>(c)]) / static_cast<double>(f.trees.size());
  }
  return p;
}

inline std::vector<std::uint8_t> predict_matrix(const Forest& f, const FeatureMatrix& x) {
  if (f.trees.empty()) throw Error(ErrorCode::UntrainedForest, "forest has no trees");
  if (x.cols != f.n_features) {
    throw Error(ErrorCode::FeatureCountMismatch,
                std::to_string(x.cols) + " columns, forest expects " + std::to_string(f.n_features));
  }
  std::vector<std::uint8_t> labels(x.rows());
  parallel_for(
      x.rows(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) labels[i] = static_cast<std::uint8_t>(predict_one(f, x.row(i)).label);
      },
      256);
  return labels;
}

/// Seeded subsample keeping at most `cap` rows of each class; returns sorted row indices.
inline std::vector<std::size_t> cap_per_class(std::span<const std::uint8_t> y, std::size_t cap, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  std::vector<std::size_t> keep;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& rows = by_class[static_cast<std::size_t>(c)];
    if (cap > 0 && rows.size() > cap) {
      Rng rng = make_rng(seed, 0x636170ull + static_cast<std::uint64_t>(c));
      for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + uniform_index(rng, rows.size() - i);
        std::swap(rows[i], rows[j]);
      }
      rows.resize(cap);
    }
    keep.insert(keep.end(), rows.begin(), rows.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.cols = x.cols;
  out.values.reserve(rows.size() * static_cast<std::size_t>(x.cols));
  out.coords.reserve(rows.size());
  for (auto r : rows) {
    const auto row = x.row(r);
    out.values.insert(out.values.end(), row.begin(), row.end());
    if (!x.coords.empty()) out.coords.push_back(x.coords[r]);
  }
  return out;
}

struct CrossValidation {
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

/// Stratified k-fold: each class is shuffled by seed and dealt round-robin
/// into folds, continuing the rotation across classes.
inline std::vector<int> stratified_folds(std::span<const std::uint8_t> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  if (static_cast<std::size_t>(folds) > y.size()) {
    throw Error(ErrorCode::InvalidArgument, "more folds than samples");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  std::vector<int> fold(y.size(), 0);
  Rng rng = make_rng(seed, 0x666f6c64ull);
  std::size_t dealt = 0;
  for (auto& rows : by_class) {
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[uniform_index(rng, i)]);
    for (auto r : rows) fold[r] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

inline CrossValidation cross_validate(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                                      const ForestConfig& cfg, int folds, std::uint64_t seed) {
  detail::check_training_data(x, y);
  const auto fold = stratified_folds(y, folds, seed);
  CrossValidation cv;
  for (int k = 0; k < folds; ++k) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == k ? test_rows : train_rows).push_back(i);
    std::vector<std::uint8_t> train_y;
    for (auto r : train_rows) train_y.push_back(y[r]);
    const Forest f = train_forest(select_rows(x, train_rows), train_y, cfg);
    const auto pred = predict_matrix(f, select_rows(x, test_rows));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_rows.size(); ++i) correct += pred[i] == y[test_rows[i]];
    cv.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(test_rows.size()));
  }
  cv.mean_accuracy = std::accumulate(cv.fold_accuracy.begin(), cv.fold_accuracy.end(), 0.0) / folds;
  return cv;
}

// Forest file: "RFOR", u32 version = 1, config block (u32 n_trees,
// u32 max_depth, u32 k_attributes, u32 min_leaf, u64 seed,
// u64 max_samples_per_class, u32 n_features, u32 n_classes), then each tree
// in pre-order: u8 tag (0 split, 1 leaf); a split carries u16 feature and
// f32 threshold followed by its left and right subtrees, a leaf carries
// 5 x u32 class counts.

namespace detail {

inline void encode_node(ByteWriter& w, const Tree& t, int i) {
  const auto& n = t.nodes[static_cast<std::size_t>(i)];
  if (n.is_leaf()) {
    w.put<std::uint8_t>(1);
    for (auto c : n.counts) w.put<std::uint32_t>(c);
    return;
  }
  w.put<std::uint8_t>(0);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(n.feature));
  w.put<float>(n.threshold);
  encode_node(w, t, n.left);
  encode_node(w, t, n.right);
}

inline int decode_node(ByteReader& r, Tree& t, int n_features, int depth) {
  if (depth > 4096) throw Error(ErrorCode::BadHeader, "tree too deep");
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  const auto tag = r.get<std::uint8_t>();
  if (tag == 1) {
    for (auto& c : t.nodes.back().counts) c = r.get<std::uint32_t>();
    return id;
  }
  if (tag != 0) throw Error(ErrorCode::BadHeader, "unknown node tag");
  const int feature = r.get<std::uint16_t>();
  if (feature >= n_features) throw Error(ErrorCode::BadHeader, "split feature out of range");
  const float threshold = r.get<float>();
  const int l = decode_node(r, t, n_features, depth + 1);
  const int rr = decode_node(r, t, n_features, depth + 1);
  auto& n = t.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = l;
  n.right = rr;
  // Split nodes carry the class counts of their subtree.
  for (int c = 0; c < kNumClasses; ++c) {
    n.counts[static_cast<std::size_t>(c)] = t.nodes[static_cast<std::size_t>(l)].counts[static_cast<std::size_t>(c)] +
                                            t.nodes[static_cast<std::size_t>(rr)].counts[static_cast<std::size_t>(c)];
  }
  return id;
}

}  // namespace detail

inline std::vector<char> encode_forest(const Forest& f) {
  ByteWriter w;
  w.put_bytes("RFOR");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.config.n_trees));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.config.max_depth));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.config.resolved_k_attributes(f.n_features)));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.config.min_leaf));
  w.put<std::uint64_t>(f.config.seed);
  w.put<std::uint64_t>(f.config.max_samples_per_class);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.n_features));
  w.put<std::uint32_t>(kNumClasses);
  for (const auto& t : f.trees) detail::encode_node(w, t, 0);
  return std::move(w.bytes());
}

inline Forest decode_forest(std::span<const char> bytes, const std::string& context = "forest") {
  ByteReader r(bytes, context);
  if (r.get_string(4) != "RFOR") throw Error(ErrorCode::BadMagic, context + ": expected RFOR");
  if (r.get<std::uint32_t>() != 1) throw Error(ErrorCode::BadHeader, context + ": unsupported version");
  Forest f;
  f.config.n_trees = static_cast<int>(r.get<std::uint32_t>());
  f.config.max_depth = static_cast<int>(r.get<std::uint32_t>());
  f.config.k_attributes = static_cast<int>(r.get<std::uint32_t>());
  f.config.min_leaf = static_cast<int>(r.get<std::uint32_t>());
  f.config.seed = r.get<std::uint64_t>();
  f.config.max_samples_per_class = r.get<std::uint64_t>();
  f.n_features = static_cast<int>(r.get<std::uint32_t>());
  if (r.get<std::uint32_t>() != kNumClasses) throw Error(ErrorCode::BadHeader, context + ": class count");
  if (f.config.n_trees < 1 || f.n_features < 1 || f.n_features > 65535) {
    throw Error(ErrorCode::BadHeader, context + ": config block");
  }
  f.trees.resize(static_cast<std::size_t>(f.config.n_trees));
  for (auto& t : f.trees) detail::decode_node(r, t, f.n_features, 0);
  if (r.remaining() != 0) throw Error(ErrorCode::BadHeader, context + ": trailing bytes");
  return f;
}

inline void save_forest(const Forest& f, const std::filesystem::path& path) {
  atomic_write_file(path, encode_forest(f));
}

inline Forest load_forest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_forest(bytes, path.string());
}

}  // namespace tumorseg
