// Command-line front end: phantom generation, preprocessing, scoring,
// training, segmentation, evaluation, cross-validation and overlays.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "tumorseg/tumorseg.hpp"

namespace fs = std::filesystem;
using namespace tumorseg;

namespace {

// ---- manifest -------------------------------------------------------------

// Tab-separated, header `id flair t1c t2 labels scores`; labels and scores
// columns are optional and a cell of "" or "-" means absent. Relative paths
// resolve against the manifest's directory.
struct ManifestEntry {
  std::string id;
  fs::path flair, t1c, t2;
  std::optional<fs::path> labels, scores;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ConfigParse, path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  auto column = [&](const std::string& name, bool required) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    if (required) throw Error(ErrorCode::ConfigParse, path.string() + ": manifest lacks column '" + name + "'");
    return -1;
  };
  const int c_id = column("id", true), c_flair = column("flair", true), c_t1c = column("t1c", true),
            c_t2 = column("t2", true), c_labels = column("labels", false), c_scores = column("scores", false);
  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_tabs(line);
    auto cell = [&](int c) -> std::string { return c >= 0 && c < static_cast<int>(cells.size()) ? cells[static_cast<std::size_t>(c)] : ""; };
    auto resolve = [&](const std::string& p) { return fs::absolute(fs::path(p).is_absolute() ? fs::path(p) : base / p).lexically_normal(); };
    auto optional_path = [&](int c) -> std::optional<fs::path> {
      const auto v = cell(c);
      if (v.empty() || v == "-") return std::nullopt;
      return resolve(v);
    };
    ManifestEntry e;
    e.id = cell(c_id);
    if (e.id.empty()) throw Error(ErrorCode::ConfigParse, path.string() + ":" + std::to_string(lineno) + ": empty id");
    if (!ids.insert(e.id).second) throw Error(ErrorCode::ConfigParse, path.string() + ": duplicate id " + e.id);
    for (int c : {c_flair, c_t1c, c_t2})
      if (cell(c).empty()) throw Error(ErrorCode::ConfigParse, path.string() + ": " + e.id + " lacks an image path");
    e.flair = resolve(cell(c_flair));
    e.t1c = resolve(cell(c_t1c));
    e.t2 = resolve(cell(c_t2));
    e.labels = optional_path(c_labels);
    e.scores = optional_path(c_scores);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::ConfigParse, path.string() + ": manifest lists no cases");
  return out;
}

std::string manifest_text(const std::vector<ManifestEntry>& entries, const fs::path& base) {
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  std::string out = "id\tflair\tt1c\tt2\tlabels\tscores\n";
  for (const auto& e : entries) {
    out += e.id + "\t" + rel(e.flair) + "\t" + rel(e.t1c) + "\t" + rel(e.t2) + "\t" +
           (e.labels ? rel(*e.labels) : "-") + "\t" + (e.scores ? rel(*e.scores) : "-") + "\n";
  }
  return out;
}

CaseData load_case(const ManifestEntry& e, bool need_labels) {
  CaseData c{e.id, MultimodalVolume(nifti::read_nifti(e.flair), nifti::read_nifti(e.t1c), nifti::read_nifti(e.t2)),
             std::nullopt, std::nullopt};
  if (e.labels) c.truth = nifti::read_labels(*e.labels);
  else if (need_labels) throw Error(ErrorCode::InvalidArgument, e.id + ": manifest gives no labels");
  if (e.scores) c.scores = read_score_map(*e.scores);
  return c;
}

std::vector<CaseData> load_cases(const std::vector<ManifestEntry>& entries, bool need_labels) {
  std::vector<CaseData> cases;
  for (const auto& e : entries) cases.push_back(load_case(e, need_labels));
  return cases;
}

// ---- output staging -------------------------------------------------------

// Output directory built under a sibling staging name and renamed into place
// on commit; abandoned staging directories are removed.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    staging_ = target_;
    staging_ += ".staging";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }

  fs::path path() const { return staging_; }
  fs::path operator/(const fs::path& p) const { return staging_ / p; }
  const fs::path& target() const { return target_; }

  void commit() {
    fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_, staging_;
  bool committed_ = false;
};

// ---- shared options -------------------------------------------------------

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  std::string config_path;
  std::vector<std::string> overrides;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) {
    const auto bytes = read_file(g.config_path);
    cfg = parse_config_text(std::string(bytes.begin(), bytes.end()), cfg);
  }
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigParse, "--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_given) cfg.set_seed(g.seed);
  cfg.validate();
  return cfg;
}

Dims parse_dims(const std::string& text) {
  Dims d;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> d.nx >> x1 >> d.ny >> x2 >> d.nz) || x1 != 'x' || x2 != 'x' || !in.eof() || !d.valid()) {
    throw Error(ErrorCode::InvalidArgument, "dims must look like 64x64x32, got '" + text + "'");
  }
  return d;
}

fcn::FcnWidths parse_widths(const std::string& text) {
  std::vector<int> v;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) v.push_back(std::stoi(item));
  if (v.size() != 6 || std::any_of(v.begin(), v.end(), [](int w) { return w < 1; })) {
    throw Error(ErrorCode::InvalidArgument, "widths must be 6 positive integers: 5 conv blocks then fc");
  }
  return {{v[0], v[1], v[2], v[3], v[4]}, v[5]};
}

void print_timings(const std::string& id, const std::vector<StageTiming>& timings) {
  for (const auto& t : timings) std::cerr << "  " << id << " " << t.stage << " " << t.seconds << " s\n";
}

// ---- subcommands ----------------------------------------------------------

struct PhantomArgs {
  fs::path out;
  int cases = 3;
  std::string dims = "64x64x32";
  int blur = 2;
  double flip = 0.05;
  bool scores = true;
};

void run_phantom(const Globals& g, const PhantomArgs& a) {
  if (a.cases < 1) throw Error(ErrorCode::InvalidArgument, "--cases must be >= 1");
  const Dims dims = parse_dims(a.dims);
  StagedDir out(a.out);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < a.cases; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "case_%03d", i);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    const std::uint64_t case_seed = derive_seed(g.seed, static_cast<std::uint64_t>(i));
    const Phantom p = generate_phantom(random_phantom_spec(dims, case_seed));
    ManifestEntry e{name, dir / "flair.nii", dir / "t1c.nii", dir / "t2.nii", dir / "labels.nii", std::nullopt};
    nifti::write_nifti(p.image[Modality::Flair], e.flair);
    nifti::write_nifti(p.image[Modality::T1c], e.t1c);
    nifti::write_nifti(p.image[Modality::T2], e.t2);
    nifti::write_labels(p.truth, *e.labels);
    if (a.scores) {
      e.scores = dir / "scores.scmp";
      write_score_map(oracle_scores(p.truth, {a.blur, a.flip, case_seed}), *e.scores);
    }
    entries.push_back(std::move(e));
  }
  atomic_write_text(out / "manifest.tsv", manifest_text(entries, out.path()));
  out.commit();
}

struct ManifestArgs {
  fs::path manifest;
  fs::path out;
};

ReferenceHistograms manifest_reference(const std::vector<CaseData>& cases, const PipelineConfig& cfg) {
  const CaseData& ref = detail::reference_case(cases, cfg.preprocess.reference_case);
  return reference_histograms(prepare_reference(ref.image, cfg.preprocess), cfg.preprocess.hist_bins);
}

void run_preprocess(const Globals& g, const ManifestArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto cases = load_cases(read_manifest(a.manifest), false);
  const ReferenceHistograms ref = manifest_reference(cases, cfg);
  StagedDir out(a.out);
  atomic_write_file(out / kReferenceFile, encode_reference(ref));
  for (const auto& c : cases) {
    const MultimodalVolume pre = preprocess_case(c.image, ref, cfg.preprocess);
    fs::create_directories(out / c.id);
    for (auto m : kModalities) {
      nifti::write_nifti(pre[m], out / c.id / (std::string(modality_name(m)) + ".nii"));
    }
  }
  out.commit();
}

struct ScoreArgs {
  fs::path manifest;
  fs::path out;
  std::string weights;
  bool oracle = false;
  int blur = 2;
  double flip = 0.05;
};

void run_score(const Globals& g, const ScoreArgs& a) {
  if (a.oracle == !a.weights.empty()) throw Error(ErrorCode::InvalidArgument, "give exactly one of --oracle, --weights");
  const PipelineConfig cfg = load_config(g);
  auto entries = read_manifest(a.manifest);
  auto cases = load_cases(entries, a.oracle);
  std::optional<fcn::FcnWeights> weights;
  std::optional<ReferenceHistograms> ref;
  if (!a.oracle) {
    weights = fcn::load_weights(a.weights);
    ref = manifest_reference(cases, cfg);
  }
  StagedDir out(a.out);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ScoreMap s = a.oracle ? oracle_scores(*cases[i].truth, {a.blur, a.flip, derive_seed(g.seed, i)})
                          : fcn::score_volume(preprocess_case(cases[i].image, *ref, cfg.preprocess), *weights);
    const fs::path path = out / (cases[i].id + ".scmp");
    write_score_map(s, path);
    entries[i].scores = fs::absolute(out.target()) / (cases[i].id + ".scmp");
  }
  // The rewritten manifest lives next to the scores and points back at the images.
  atomic_write_text(out / "manifest.tsv", manifest_text(entries, fs::absolute(out.target())));
  out.commit();
}

struct TrainArgs {
  fs::path manifest;
  fs::path out;
  std::string weights;
};

void run_train(const Globals& g, const TrainArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto cases = load_cases(read_manifest(a.manifest), true);
  std::optional<fcn::FcnWeights> weights;
  if (!a.weights.empty()) weights = fcn::load_weights(a.weights);
  TrainingSummary summary;
  const ModelBundle bundle = train_pipeline(cases, cfg, weights ? &*weights : nullptr, &summary);
  save_bundle(bundle, a.out);
  std::cerr << "trained on " << summary.training_rows << " of " << summary.feature_rows << " feature rows; oob accuracy "
            << summary.forest.oob_accuracy << "\n";
  print_timings("train", summary.timings);
}

struct SegmentArgs {
  fs::path bundle;
  fs::path manifest;
  fs::path out;
  std::string weights;
};

void run_segment(const Globals&, const SegmentArgs& a) {
  const ModelBundle bundle = load_bundle(a.bundle);
  const auto entries = read_manifest(a.manifest);
  std::optional<fcn::FcnWeights> weights;
  if (!a.weights.empty()) weights = fcn::load_weights(a.weights);
  StagedDir out(a.out);
  for (const auto& e : entries) {
    const CaseData c = load_case(e, false);
    const auto result = segment_case(c, bundle, weights ? &*weights : nullptr);
    nifti::write_labels(result.labels, out / (c.id + ".nii"));
    print_timings(c.id, result.timings);
  }
  out.commit();
}

struct EvaluateArgs {
  std::string pred, truth, id = "case";
  std::string manifest, pred_dir;
  std::string out;
};

void run_evaluate(const Globals&, const EvaluateArgs& a) {
  std::vector<std::pair<std::string, OverlapReport>> rows;
  if (!a.manifest.empty()) {
    if (a.pred_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--manifest needs --pred-dir");
    for (const auto& e : read_manifest(a.manifest)) {
      if (!e.labels) throw Error(ErrorCode::InvalidArgument, e.id + ": manifest gives no labels");
      rows.emplace_back(e.id, evaluate_case(nifti::read_labels(fs::path(a.pred_dir) / (e.id + ".nii")),
                                            nifti::read_labels(*e.labels)));
    }
  } else {
    if (a.pred.empty() || a.truth.empty()) throw Error(ErrorCode::InvalidArgument, "give --pred and --truth");
    rows.emplace_back(a.id, evaluate_case(nifti::read_labels(a.pred), nifti::read_labels(a.truth)));
  }
  const std::string csv = report_csv(rows);
  if (a.out.empty()) std::cout << csv;
  else atomic_write_text(a.out, csv);
}

struct CrossvalArgs {
  fs::path manifest;
  int folds = 4;
  std::string weights;
  std::string out;
};

void run_crossval(const Globals& g, const CrossvalArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto cases = load_cases(read_manifest(a.manifest), true);
  std::optional<fcn::FcnWeights> weights;
  if (!a.weights.empty()) weights = fcn::load_weights(a.weights);
  const TrainingSet set = build_training_set(cases, cfg, weights ? &*weights : nullptr);
  const auto keep = cap_per_class(set.labels, cfg.forest.max_samples_per_class, cfg.forest.seed);
  std::vector<std::uint8_t> labels;
  for (auto r : keep) labels.push_back(set.labels[r]);
  const auto cv = cross_validate(select_rows(set.features, keep), labels, cfg.forest, a.folds, cfg.forest.seed);
  std::string csv = "fold,accuracy\n";
  for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
    csv += std::to_string(f) + "," + format_metric(cv.fold_accuracy[f]) + "\n";
  }
  csv += "mean," + format_metric(cv.mean_accuracy) + "\n";
  if (a.out.empty()) std::cout << csv;
  else atomic_write_text(a.out, csv);
}

struct InitWeightsArgs {
  fs::path out;
  std::string widths = "64,128,256,512,512,4096";
  bool zero = false;
};

void run_init_weights(const Globals& g, const InitWeightsArgs& a) {
  const auto widths = parse_widths(a.widths);
  fcn::save_weights(a.zero ? fcn::zero_weights(widths) : fcn::random_weights(widths, g.seed), a.out);
}

struct OverlayArgs {
  fs::path image, labels, out;
  int slice = -1;
};

// Binary PPM of one axial slice: grey image with label colours blended at 50%.
void run_overlay(const Globals&, const OverlayArgs& a) {
  const Volume3D img = nifti::read_nifti(a.image);
  const LabelVolume lab = nifti::read_labels(a.labels);
  require_same_dims(img, lab, "overlay labels");
  const Dims& d = img.dims();
  const int z = a.slice < 0 ? d.nz / 2 : a.slice;
  if (z >= d.nz) throw Error(ErrorCode::OutOfBounds, "slice " + std::to_string(z) + " outside volume");
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (int y = 0; y < d.ny; ++y)
    for (int x = 0; x < d.nx; ++x) {
      lo = std::min(lo, img.at(x, y, z));
      hi = std::max(hi, img.at(x, y, z));
    }
  static constexpr std::array<std::array<int, 3>, kNumClasses> kColours{
      {{0, 0, 0}, {0, 0, 255}, {0, 200, 0}, {255, 220, 0}, {255, 0, 0}}};
  std::string ppm = "P6\n" + std::to_string(d.nx) + " " + std::to_string(d.ny) + "\n255\n";
  for (int y = d.ny - 1; y >= 0; --y)
    for (int x = 0; x < d.nx; ++x) {
      const int grey = hi > lo ? static_cast<int>(std::lround(255.0 * (img.at(x, y, z) - lo) / (hi - lo))) : 0;
      const auto label = lab.at(x, y, z);
      for (int c = 0; c < 3; ++c) {
        const int v = label ? (grey + kColours[label][static_cast<std::size_t>(c)] + 1) / 2 : grey;
        ppm.push_back(static_cast<char>(static_cast<unsigned char>(v)));
      }
    }
  atomic_write_text(a.out, ppm);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain tumor segmentation with FCN score maps, Gabor textons and a random forest."};
  app.name("tumorseg");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random component")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = machine parallelism)");
  app.add_option("--config", g.config_path, "Pipeline config file (key=value lines)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");

  PhantomArgs phantom;
  auto* c_phantom = app.add_subcommand("phantom", "Generate synthetic phantom cases and a manifest");
  c_phantom->add_option("--out", phantom.out, "Output directory")->required();
  c_phantom->add_option("--cases", phantom.cases, "Number of cases")->capture_default_str();
  c_phantom->add_option("--dims", phantom.dims, "Volume size NXxNYxNZ")->capture_default_str();
  c_phantom->add_option("--blur", phantom.blur, "Oracle score dilation radius")->capture_default_str();
  c_phantom->add_option("--flip", phantom.flip, "Oracle score label flip rate")->capture_default_str();
  c_phantom->add_flag("!--no-scores", phantom.scores, "Skip oracle score maps");

  ManifestArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Normalize the cases of a manifest");
  c_pre->add_option("--manifest", pre.manifest, "Case manifest (TSV)")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "Output directory")->required();

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Write score maps from FCN weights or ground-truth oracle");
  c_score->add_option("--manifest", score.manifest, "Case manifest (TSV)")->required()->check(CLI::ExistingFile);
  c_score->add_option("--out", score.out, "Output directory")->required();
  c_score->add_option("--weights", score.weights, "FCN weight file")->check(CLI::ExistingFile);
  c_score->add_flag("--oracle", score.oracle, "Derive scores from ground-truth labels");
  c_score->add_option("--blur", score.blur, "Oracle dilation radius")->capture_default_str();
  c_score->add_option("--flip", score.flip, "Oracle label flip rate")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model bundle");
  c_train->add_option("--manifest", train.manifest, "Training manifest (TSV)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Bundle directory")->required();
  c_train->add_option("--weights", train.weights, "FCN weights for cases without score maps")->check(CLI::ExistingFile);

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "Segment the cases of a manifest");
  c_seg->add_option("--bundle", seg.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  c_seg->add_option("--manifest", seg.manifest, "Case manifest (TSV)")->required()->check(CLI::ExistingFile);
  c_seg->add_option("--out", seg.out, "Output directory of label volumes")->required();
  c_seg->add_option("--weights", seg.weights, "FCN weights overriding the bundle's")->check(CLI::ExistingFile);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Dice / PPV / sensitivity report as CSV");
  c_eval->add_option("--pred", ev.pred, "Predicted label volume")->check(CLI::ExistingFile);
  c_eval->add_option("--truth", ev.truth, "Ground-truth label volume")->check(CLI::ExistingFile);
  c_eval->add_option("--id", ev.id, "Case id for --pred/--truth")->capture_default_str();
  c_eval->add_option("--manifest", ev.manifest, "Manifest with labels")->check(CLI::ExistingFile);
  c_eval->add_option("--pred-dir", ev.pred_dir, "Directory of <id>.nii predictions")->check(CLI::ExistingDirectory);
  c_eval->add_option("--out", ev.out, "CSV output file (default stdout)");

  CrossvalArgs cv;
  auto* c_cv = app.add_subcommand("crossval", "Stratified k-fold accuracy of the voxel classifier");
  c_cv->add_option("--manifest", cv.manifest, "Training manifest (TSV)")->required()->check(CLI::ExistingFile);
  c_cv->add_option("--folds", cv.folds, "Number of folds")->capture_default_str();
  c_cv->add_option("--weights", cv.weights, "FCN weights for cases without score maps")->check(CLI::ExistingFile);
  c_cv->add_option("--out", cv.out, "CSV output file (default stdout)");

  InitWeightsArgs iw;
  auto* c_iw = app.add_subcommand("init-weights", "Write seeded FCN-8s weights");
  c_iw->add_option("--out", iw.out, "Weight file")->required();
  c_iw->add_option("--widths", iw.widths, "Channel widths: conv1..conv5,fc")->capture_default_str();
  c_iw->add_flag("--zero", iw.zero, "All-zero weights");

  OverlayArgs ov;
  auto* c_ov = app.add_subcommand("overlay", "Export one axial slice with labels as PPM");
  c_ov->add_option("--image", ov.image, "Intensity volume")->required()->check(CLI::ExistingFile);
  c_ov->add_option("--labels", ov.labels, "Label volume")->required()->check(CLI::ExistingFile);
  c_ov->add_option("--slice", ov.slice, "Axial slice (default middle)");
  c_ov->add_option("--out", ov.out, "PPM output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;
  set_thread_count(g.threads);

  try {
    if (c_phantom->parsed()) run_phantom(g, phantom);
    else if (c_pre->parsed()) run_preprocess(g, pre);
    else if (c_score->parsed()) run_score(g, score);
    else if (c_train->parsed()) run_train(g, train);
    else if (c_seg->parsed()) run_segment(g, seg);
    else if (c_eval->parsed()) run_evaluate(g, ev);
    else if (c_cv->parsed()) run_crossval(g, cv);
    else if (c_iw->parsed()) run_init_weights(g, iw);
    else if (c_ov->parsed()) run_overlay(g, ov);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
