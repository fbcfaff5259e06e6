// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tumorseg/tumorseg.hpp"

namespace fs = std::filesystem;
using namespace tumorseg;

namespace {

// Thrown by `check` to end a criterion with a reason.
struct Failure {
  std::string why;
};

void check(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool run_criterion(int id, const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const Failure& f) {
    ok = false;
    detail = f.why;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << detail << " ["
            << fmt(seconds_since(t0), 1) << " s]" << std::endl;
  return ok;
}

// 2 -----------------------------------------------------------------------
std::string metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dims d{8, 8, 8};
  for (std::uint64_t pair = 0; pair < 60; ++pair) {
    // Densities sweep from empty to full so the empty-set conventions are hit.
    const double da = static_cast<double>(pair % 6) / 5.0, db = static_cast<double>((pair / 6) % 6) / 5.0;
    const auto a = testsupport::random_mask(d, da, 2 * pair);
    const auto b = testsupport::random_mask(d, db, 2 * pair + 1);
    const Overlap got = overlap_metrics(a, b), want = oracle::overlap(a, b);
    check(std::abs(got.dice - want.dice) <= 1e-12 && std::abs(got.ppv - want.ppv) <= 1e-12 &&
              std::abs(got.sensitivity - want.sensitivity) <= 1e-12,
          "metric mismatch on pair " + std::to_string(pair));
    check(overlap_metrics(a, a).dice == 1.0, "dice(a,a) != 1 on pair " + std::to_string(pair));
    check(std::abs(got.ppv - overlap_metrics(b, a).sensitivity) <= 1e-12,
          "ppv(a,b) != sensitivity(b,a) on pair " + std::to_string(pair));
  }
  const double t = seconds_since(t0);
  check(t < 5.0, "took " + fmt(t, 2) + " s");
  return "60 pairs exact, identities hold, " + fmt(t, 3) + " s";
}

// 3 -----------------------------------------------------------------------
std::string feature_contract() {
  std::vector<std::string> expected;
  for (const char* s : {"score_0", "score_1", "score_2", "score_3", "score_4", "intensity_flair", "intensity_t1c",
                        "intensity_t2"})
    expected.emplace_back(s);
  for (const char* m : {"flair", "t1c", "t2"})
    for (int t = 0; t < 16; ++t) expected.push_back(std::string("texton_") + m + "_" + std::to_string(t));
  check(feature_names() == expected, "column names out of order");

  const Phantom p = generate_phantom(random_phantom_spec({32, 32, 16}, 4));
  const ScoreMap scores = oracle_scores(p.truth, {2, 0.05, 4});
  TextonMaps maps;
  std::mt19937_64 rng(4);
  for (auto& m : maps.maps) {
    m = TextonMap(p.truth.dims());
    for (auto& v : m.data()) v = static_cast<std::uint16_t>(rng() % 16);
  }
  const BinaryMask roi = classification_region(scores, {});
  const FeatureMatrix fm = assemble_features(scores, p.image, maps, roi);
  check(fm.cols == 56, "cols = " + std::to_string(fm.cols));
  check(fm.rows() == count_true(roi) && fm.rows() > 0, "row count differs from ROI size");
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto row = fm.row(r);
    const std::size_t li = linear_index(p.truth.dims(), fm.coords[r].x, fm.coords[r].y, fm.coords[r].z);
    for (int c = 0; c < 5; ++c) check(row[static_cast<std::size_t>(c)] == scores.voxel(li)[static_cast<std::size_t>(c)], "score column");
    for (int m = 0; m < 3; ++m) check(row[5 + static_cast<std::size_t>(m)] == p.image.channel(m)[li], "intensity column");
    for (int b = 0; b < 3; ++b) {
      double s = 0.0;
      for (int t = 0; t < 16; ++t) s += row[8 + static_cast<std::size_t>(b * 16 + t)];
      check(std::abs(s - 1.0) < 1e-5, "texton block " + std::to_string(b) + " sums to " + fmt(s, 6));
    }
  }
  const int k = ForestConfig{}.resolved_k_attributes(56);
  check(k == 7, "k_attributes resolves to " + std::to_string(k));
  return "56 ordered columns over " + std::to_string(fm.rows()) + " rows, texton blocks sum to 1, k_attributes = 7";
}

// 4 -----------------------------------------------------------------------
std::string convolution_oracles() {
  const FilterBank bank = build_filter_bank();
  double worst_bank = 0.0;
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    const Dims d{static_cast<int>(8 + 4 * trial), static_cast<int>(16 - 3 * trial), static_cast<int>(1 + trial)};
    const Volume3D v = testsupport::random_volume(d, 100 + trial, -1.0f, 1.0f);
    const ResponseStack got = convolve_bank(v, bank);
    const auto want = oracle::naive_bank(v, bank);
    for (std::size_t i = 0; i < want.size(); ++i) worst_bank = std::max(worst_bank, std::abs(got.data[i] - want[i]));
  }
  check(worst_bank <= 1e-5, "convolve_bank deviates by " + sci(worst_bank));

  std::mt19937 rng(17);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  double worst_conv = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int k = pick(1, 5), s = pick(1, 3), p = pick(0, 3);
    const auto l = oracle::random_layer(fcn::LayerKind::Conv, k, k, pick(1, 4), pick(1, 6), s, p,
                                        trial % 2 ? fcn::Activation::Relu : fcn::Activation::None,
                                        static_cast<std::uint64_t>(trial));
    const auto in = oracle::random_map(pick(k, 16), pick(k, 16), l.in_channels, static_cast<std::uint64_t>(trial + 1000));
    worst_conv = std::max(worst_conv, oracle::max_abs_diff(fcn::conv2d(in, l), oracle::naive_conv(in, l)));
  }
  check(worst_conv <= 1e-5, "conv2d deviates by " + sci(worst_conv));

  int instances = 0;
  double worst_adj = 0.0;
  while (instances < 100) {
    const int k = pick(1, 5), s = pick(1, 3), p = pick(0, k - 1);
    const int cin = pick(1, 4), cout = pick(1, 4), oh = pick(1, 6), ow = pick(1, 6);
    const int h = (oh - 1) * s + k - 2 * p, w = (ow - 1) * s + k - 2 * p;
    if (h <= 0 || w <= 0) continue;
    const auto seed = static_cast<std::uint64_t>(instances);
    auto conv = oracle::random_layer(fcn::LayerKind::Conv, k, k, cin, cout, s, p, fcn::Activation::None, seed);
    std::fill(conv.bias.begin(), conv.bias.end(), 0.0f);
    auto tconv = fcn::make_layer("t", fcn::LayerKind::TransposedConv, k, k, cout, cin, s, p, fcn::Activation::None);
    for (int o = 0; o < cout; ++o)
      for (int i = 0; i < cin; ++i)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) tconv.weight(i, o, ky, kx) = conv.weight(o, i, ky, kx);
    const auto x = oracle::random_map(h, w, cin, seed + 300);
    const auto y = oracle::random_map(oh, ow, cout, seed + 600);
    const double lhs = oracle::dot(fcn::conv2d(x, conv), y);
    const double rhs = oracle::dot(x, fcn::transposed_conv2d(y, tconv));
    worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    ++instances;
  }
  check(worst_adj <= 1e-4, "adjoint identity off by " + sci(worst_adj));
  return "bank max err " + sci(worst_bank) + ", conv2d max err " + sci(worst_conv) + ", adjoint max rel err " +
         sci(worst_adj) + " over 100 instances";
}

// 5 -----------------------------------------------------------------------
std::string fcn_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto weights = fcn::random_weights(fcn::FcnWidths::vgg16(), 5);
  for (auto [h, w] : {std::pair{32, 32}, std::pair{48, 40}, std::pair{64, 64}}) {
    const auto out = fcn::fcn8s_forward_slice(oracle::random_map(h, w, 3, static_cast<std::uint64_t>(h * w)), weights);
    check(out.height == h && out.width == w && out.channels == 5,
          "output shape for " + std::to_string(h) + "x" + std::to_string(w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int c = 0; c < 5; ++c) {
          check(out.at(y, x, c) >= 0.0f, "negative probability");
          s += out.at(y, x, c);
        }
        check(std::abs(s - 1.0) <= 1e-5, "pixel sum " + fmt(s, 8));
      }
  }
  const auto zero = fcn::fcn8s_forward_slice(oracle::random_map(32, 32, 3, 9), fcn::zero_weights(fcn::FcnWidths::vgg16()));
  for (float v : zero.data) check(std::abs(v - 0.2f) <= 1e-6f, "zero weights give " + std::to_string(v));
  const double t = seconds_since(t0);
  check(t < 60.0, "took " + fmt(t, 1) + " s");
  return "full-width FCN-8s on 32x32, 48x40, 64x64: shapes and simplex hold; zero weights give 0.2; " + fmt(t, 1) + " s";
}

// 6 -----------------------------------------------------------------------
std::vector<float> blobs(std::size_t per_blob, int dim, const std::vector<std::vector<double>>& means, double sd,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  std::vector<float> pts;
  for (const auto& m : means)
    for (std::size_t i = 0; i < per_blob; ++i)
      for (int j = 0; j < dim; ++j) pts.push_back(static_cast<float>(m[static_cast<std::size_t>(j)] + n(rng)));
  return pts;
}

std::string kmeans_checks() {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = blobs(100, 4, {{0, 0, 0, 0}, {2, 1, 0, 1}, {0, 3, 1, 0}, {1, 1, 1, 3}}, 0.9, seed);
    const auto res = kmeans_fit(pts, 4, {6, seed, 100, 1e-7});
    for (std::size_t i = 1; i < res.objective.size(); ++i) {
      check(res.objective[i] <= res.objective[i - 1] * (1 + 1e-12),
            "objective rose at seed " + std::to_string(seed) + " iteration " + std::to_string(i));
    }
  }
  const auto one = blobs(200, 3, {{1, -2, 3}}, 1.0, 3);
  const auto single = kmeans_fit(one, 3, {1, 1, 100, 1e-9});
  for (int j = 0; j < 3; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < 200; ++i) m += one[i * 3 + static_cast<std::size_t>(j)];
    check(std::abs(single.centroids[static_cast<std::size_t>(j)] - m / 200.0) <= 1e-6, "k=1 centroid is not the mean");
  }
  const std::vector<std::vector<double>> means{{0, 0}, {10, 10}};
  const auto two = kmeans_fit(blobs(500, 2, means, 1.0, 8), 2, {2, 8, 100, 1e-7});
  double worst = 0.0;
  for (const auto& m : means) {
    double best = 1e9;
    for (std::size_t c = 0; c < 2; ++c)
      best = std::min(best, std::hypot(two.centroids[c * 2] - m[0], two.centroids[c * 2 + 1] - m[1]));
    worst = std::max(worst, best);
  }
  check(worst < 0.1, "two-blob centroid error " + fmt(worst));
  return "objective monotone over 20 runs, k=1 gives the mean, two-blob error " + fmt(worst);
}

// 7 -----------------------------------------------------------------------
std::string forest_checks() {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMatrix x;
  x.cols = 56;
  std::vector<std::uint8_t> y;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) {
      for (int j = 0; j < 56; ++j) x.values.push_back(static_cast<float>(4.0 * c + n(rng)));
      x.coords.push_back({i, c, 0});
      y.push_back(static_cast<std::uint8_t>(2 * c + 1));
    }
  ForestConfig cfg;
  cfg.seed = 3;
  TrainingStats stats;
  const Forest f = train_forest(x, y, cfg, &stats);
  check(stats.oob_accuracy >= 0.95, "OOB accuracy " + fmt(stats.oob_accuracy));
  int deepest = 0;
  for (const auto& t : f.trees) {
    // Depth of every node by walking parents to children.
    std::vector<int> depth(t.nodes.size(), 0);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      check(depth[i] <= 15, "node deeper than 15");
      deepest = std::max(deepest, depth[i]);
      const auto& node = t.nodes[i];
      if (node.feature >= 0) {
        depth[static_cast<std::size_t>(node.left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(node.right)] = depth[i] + 1;
      }
    }
  }
  FeatureMatrix shifted = x;
  for (auto& v : shifted.values) v = 2.0f * v + 1.0f;
  check(predict_matrix(f, x) == predict_matrix(train_forest(shifted, y, cfg), shifted),
        "monotone transform changed predictions");
  check(encode_forest(train_forest(x, y, cfg)) == encode_forest(f), "same seed gave different serialized forest");
  return "OOB accuracy " + fmt(stats.oob_accuracy) + ", max depth " + std::to_string(deepest) +
         ", monotone invariance and bitwise reproduction hold";
}

// 8 -----------------------------------------------------------------------
std::string dilation_checks() {
  BinaryMask single({25, 25, 25});
  single.at(12, 12, 12) = 1;
  std::size_t lattice = 0;
  for (int z = -10; z <= 10; ++z)
    for (int y = -10; y <= 10; ++y)
      for (int x = -10; x <= 10; ++x) lattice += x * x + y * y + z * z <= 100;
  const std::size_t got = count_true(dilate3d(single, 10));
  check(got == lattice, "ball has " + std::to_string(got) + " voxels, lattice count " + std::to_string(lattice));
  std::mt19937 rng(5);
  auto side = [&] { return std::uniform_int_distribution<int>(1, 20)(rng); };
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d{side(), side(), side()};
    const int r = std::uniform_int_distribution<int>(0, 4)(rng);
    const auto a = testsupport::random_mask(d, 0.03, static_cast<std::uint64_t>(trial));
    BinaryMask b = a;
    const auto extra = testsupport::random_mask(d, 0.03, static_cast<std::uint64_t>(trial + 500));
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = b[i] || extra[i];
    const auto da = dilate3d(a, r), db = dilate3d(b, r);
    for (std::size_t i = 0; i < a.size(); ++i) {
      check(!a[i] || da[i], "not extensive on trial " + std::to_string(trial));
      check(!da[i] || db[i], "not monotone on trial " + std::to_string(trial));
    }
    if (trial < 20) check(da == oracle::naive_dilate(a, r), "differs from brute force on trial " + std::to_string(trial));
  }
  return "radius-10 ball = " + std::to_string(lattice) + " voxels; extensive and monotone on 100 masks";
}

// 9 -----------------------------------------------------------------------
CaseData phantom_case(std::uint64_t seed, Dims dims) {
  Phantom p = generate_phantom(random_phantom_spec(dims, seed));
  CaseData c{"phantom_" + std::to_string(seed), std::move(p.image), std::move(p.truth), std::nullopt};
  c.scores = oracle_scores(*c.truth, {2, 0.05, seed});
  return c;
}

std::string end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dims dims{64, 64, 32};
  std::vector<CaseData> train;
  for (std::uint64_t s = 1; s <= 3; ++s) train.push_back(phantom_case(s, dims));
  PipelineConfig cfg;
  cfg.set_seed(1);
  const ModelBundle bundle = train_pipeline(train, cfg);
  std::array<double, 3> mean{}, worst{1, 1, 1};
  for (std::uint64_t s = 101; s <= 105; ++s) {
    const CaseData c = phantom_case(s, dims);
    const auto rep = evaluate_case(segment_case(c, bundle).labels, *c.truth);
    for (auto r : kRegions) {
      mean[static_cast<std::size_t>(r)] += rep[r].dice / 5.0;
      worst[static_cast<std::size_t>(r)] = std::min(worst[static_cast<std::size_t>(r)], rep[r].dice);
    }
  }
  const double t = seconds_since(t0);
  const std::string detail = "mean dice complete " + fmt(mean[0]) + " core " + fmt(mean[1]) + " enhancing " +
                             fmt(mean[2]) + " (worst case " + fmt(worst[0]) + "/" + fmt(worst[1]) + "/" +
                             fmt(worst[2]) + "), " + fmt(t, 1) + " s";
  check(mean[0] >= 0.90 && mean[1] >= 0.85 && mean[2] >= 0.80, detail);
  check(t < 600.0, detail);
  return detail;
}

// 10 ----------------------------------------------------------------------
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + TUMORSEG_CLI + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::vector<char>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<char>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[e.path().lexically_relative(root).generic_string()] = read_file(e.path());
  return files;
}

std::string determinism() {
  testsupport::TempDir tmp;
  const fs::path log = tmp / "cli.log";
  const std::string dims = " --dims 40x40x20";
  check(cli("--seed 5 phantom --cases 3 --out " + (tmp / "train").string() + dims, log) == 0, "phantom (train) failed");
  check(cli("--seed 6 phantom --cases 2 --out " + (tmp / "test").string() + dims, log) == 0, "phantom (test) failed");
  const std::string train_m = (tmp / "train" / "manifest.tsv").string();
  const std::string test_m = (tmp / "test" / "manifest.tsv").string();
  auto flow = [&](const std::string& name, int threads) {
    const fs::path run = tmp / name;
    fs::create_directories(run);
    const std::string t = " --threads " + std::to_string(threads) + " ";
    check(cli("--seed 42" + t + "train --manifest " + train_m + " --out " + (run / "model").string(), log) == 0,
          name + ": train failed (see log)");
    check(cli(t + "segment --bundle " + (run / "model").string() + " --manifest " + test_m + " --out " +
                  (run / "seg").string(),
              log) == 0,
          name + ": segment failed");
    check(cli(t + "evaluate --manifest " + test_m + " --pred-dir " + (run / "seg").string() + " --out " +
                  (run / "report.csv").string(),
              log) == 0,
          name + ": evaluate failed");
    return tree_bytes(run);
  };
  const auto a = flow("run_a", 1);
  const auto b = flow("run_b", 1);
  const auto c = flow("run_c", 4);
  check(a.size() >= 9, "expected bundle, labels and report files, found " + std::to_string(a.size()));
  for (const auto& [file, bytes] : a) {
    check(b.count(file) && b.at(file) == bytes, file + " differs between repeated runs");
    check(c.count(file) && c.at(file) == bytes, file + " differs between 1 and 4 threads");
  }
  check(a.size() == b.size() && a.size() == c.size(), "file sets differ");
  return std::to_string(a.size()) + " output files bitwise identical across 2 runs and threads {1, 4}";
}

}  // namespace

int main() {
  bool ok = true;
  ok &= run_criterion(2, "metric oracle", metric_oracle);
  ok &= run_criterion(3, "feature contract", feature_contract);
  ok &= run_criterion(4, "convolution oracles", convolution_oracles);
  ok &= run_criterion(5, "FCN shape suite", fcn_suite);
  ok &= run_criterion(6, "k-means", kmeans_checks);
  ok &= run_criterion(7, "random forest", forest_checks);
  ok &= run_criterion(8, "dilation", dilation_checks);
  ok &= run_criterion(9, "end-to-end phantoms", end_to_end);
  ok &= run_criterion(10, "CLI determinism", determinism);
  return ok ? 0 : 1;
}
