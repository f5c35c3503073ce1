#include "cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "invbag/classifiers.hpp"
#include "invbag/engine.hpp"
#include "invbag/evaluation.hpp"
#include "invbag/io.hpp"
#include "json.hpp"

#ifndef INVBAG_VERSION
#define INVBAG_VERSION "unknown"
#endif

namespace invbag::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Bad flag values detected after parsing; exits with the usage code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Short form for labels such as grid efficiencies.
std::string fmt_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

void open_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

std::ofstream open_file(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// -- shared option groups -------------------------------------------------------

struct SchemaOptions {
  std::string label_column = "label";
  double background_value = 0.0;
  double signal_value = 1.0;
  std::string features;
  std::string delimiter = ",";
  bool hepmass = false;

  void add(CLI::App* app) {
    app->add_option("--label-column", label_column, "Name of the label column")
        ->capture_default_str();
    app->add_option("--background-value", background_value, "Label value of background events")
        ->capture_default_str();
    app->add_option("--signal-value", signal_value, "Label value of signal events")
        ->capture_default_str();
    app->add_option("--features", features,
                    "Comma-separated feature columns (default: every non-label column)");
    app->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();
    app->add_flag("--hepmass", hepmass, "Select the eight low-level HEPMASS columns f0..f7");
  }

  CsvSchema schema() const {
    if (delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    CsvSchema s;
    if (hepmass) s = CsvSchema::hepmass();
    s.label_column = label_column;
    s.background_value = background_value;
    s.signal_value = signal_value;
    if (!features.empty()) s.features = split_list(features);
    s.delimiter = delimiter.front();
    try {
      s.validate();
    } catch (const SchemaError& e) {
      throw UsageError(e.what());
    }
    return s;
  }

  void args(std::vector<std::string>& a) const {
    a.insert(a.end(), {"--label-column", label_column, "--background-value", fmt(background_value),
                       "--signal-value", fmt(signal_value), "--delimiter", delimiter});
    const auto s = schema();
    if (!s.features.empty()) a.insert(a.end(), {"--features", join(s.features)});
  }

  void record(json& m) const {
    const auto s = schema();
    m["schema.label_column"] = s.label_column;
    m["schema.background_value"] = s.background_value;
    m["schema.signal_value"] = s.signal_value;
    m["schema.features"] = s.features.empty() ? "all non-label columns" : join(s.features);
    m["schema.delimiter"] = std::string(1, s.delimiter);
  }
};

struct EngineOptions {
  std::int64_t subsets = 10000;
  Index subset_size = 100;
  std::string stat = "nnratio";
  std::string combine = "max";
  std::string ordering = "mean-stat";
  double null_quantile = 0.5;
  std::int64_t calib_subsets = 2000;
  Index calib_pool = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double energy_epsilon = kDefaultEnergyEpsilon;
  double gaussian_sigma = kDefaultGaussianSigma;
  double nn_epsilon = kDefaultNNEpsilon;

  void add(CLI::App* app) {
    app->add_option("--subsets", subsets, "Number of bootstrap subsets K")->capture_default_str();
    app->add_option("--subset-size", subset_size, "Events per subset M")->capture_default_str();
    app->add_option("--stat", stat, "Subset statistic")
        ->check(CLI::IsMember({"ks", "ad", "energy-log", "energy-inv", "energy-gauss", "nnratio"}))
        ->capture_default_str();
    app->add_option("--combine", combine, "Per-feature combination for ks/ad")
        ->check(CLI::IsMember({"max", "mean"}))
        ->capture_default_str();
    app->add_option("--ordering", ordering, "Event ordering principle")
        ->check(CLI::IsMember({"ratio", "mean-stat"}))
        ->capture_default_str();
    app->add_option("--null-quantile", null_quantile, "Null quantile q of the subset cut")
        ->capture_default_str();
    app->add_option("--calib-subsets", calib_subsets, "Background-only calibration subsets")
        ->capture_default_str();
    app->add_option("--calib-pool", calib_pool,
                    "Distinct training events per calibration subset pool (0: test sample size)")
        ->capture_default_str();
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (0: all cores); never changes results")
        ->capture_default_str();
    app->add_option("--energy-epsilon", energy_epsilon, "Energy-test distance regularizer")
        ->capture_default_str();
    app->add_option("--gaussian-sigma", gaussian_sigma, "Gaussian energy weight width")
        ->capture_default_str();
    app->add_option("--nn-epsilon", nn_epsilon, "NN-ratio distance regularizer")
        ->capture_default_str();
  }

  EngineConfig config() const {
    EngineConfig cfg;
    cfg.subset_size = subset_size;
    cfg.n_subsets = subsets;
    cfg.statistic.kind = parse_statistic_kind(stat);
    cfg.statistic.combine = parse_combine(combine);
    cfg.statistic.energy_epsilon = energy_epsilon;
    cfg.statistic.gaussian_sigma = gaussian_sigma;
    cfg.statistic.nn_epsilon = nn_epsilon;
    cfg.ordering = parse_ordering(ordering);
    cfg.null_quantile = null_quantile;
    cfg.n_calibration_subsets = calib_subsets;
    cfg.calibration_pool = calib_pool;
    cfg.master_seed = seed;
    cfg.threads = threads;
    return cfg;
  }

  /// Threads are left out: they never affect outputs.
  void args(std::vector<std::string>& a) const {
    a.insert(a.end(), {"--subsets", std::to_string(subsets), "--subset-size",
                       std::to_string(subset_size), "--stat", stat, "--combine", combine,
                       "--ordering", ordering, "--null-quantile", fmt(null_quantile),
                       "--calib-subsets", std::to_string(calib_subsets), "--calib-pool",
                       std::to_string(calib_pool), "--seed", std::to_string(seed),
                       "--energy-epsilon", fmt(energy_epsilon), "--gaussian-sigma",
                       fmt(gaussian_sigma), "--nn-epsilon", fmt(nn_epsilon)});
  }

  void record(json& m, const EngineConfig& cfg) const {
    m["engine.subset_size"] = cfg.subset_size;
    m["engine.n_subsets"] = cfg.n_subsets;
    m["engine.statistic"] = to_string(cfg.statistic.kind);
    m["engine.combine"] = to_string(cfg.statistic.combine);
    m["engine.ordering"] = to_string(cfg.ordering);
    m["engine.null_quantile"] = cfg.null_quantile;
    m["engine.n_calibration_subsets"] = cfg.n_calibration_subsets;
    m["engine.calibration_pool"] = cfg.calibration_pool;
    m["engine.energy_epsilon"] = cfg.statistic.energy_epsilon;
    m["engine.gaussian_sigma"] = cfg.statistic.gaussian_sigma;
    m["engine.nn_epsilon"] = cfg.statistic.nn_epsilon;
    m["engine.threads_requested"] = threads;
    m["seed"] = cfg.master_seed;
    m["seed.calibration"] = derive_seed(cfg.master_seed, SeedStage::calibration);
    m["seed.bagging"] = derive_seed(cfg.master_seed, SeedStage::bagging);
  }
};

json base_manifest(const std::string& command, const std::vector<std::string>& invocation,
                   const std::string& started) {
  json m = json::object();
  m["command"] = command;
  m["tool.name"] = "invbag";
  m["tool.version"] = INVBAG_VERSION;
  m["invocation.args"] = invocation;
  m["run.started_utc"] = started;
  return m;
}

void record_input(json& m, const std::string& name, const fs::path& path, Index rows) {
  m["input." + name + ".path"] = absolute_path(path);
  m["input." + name + ".sha256"] = sha256_file(path);
  m["input." + name + ".rows"] = rows;
}

void record_output(json& m, const fs::path& dir, const std::vector<std::string>& files) {
  m["output.dir"] = absolute_path(dir);
  m["output.files"] = files;
  for (const auto& f : files) m["output.sha256." + f] = sha256_file(dir / f);
}

void write_manifest(json m, const fs::path& dir,
                    std::chrono::steady_clock::time_point t0) {
  m["run.finished_utc"] = utc_now();
  m["run.wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto out = open_file(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

// -- tabular outputs --------------------------------------------------------------

void write_scores(const fs::path& path, const ScoreVector& s, const BaggingTallies& t,
                  const std::vector<Label>& labels) {
  auto out = open_file(path);
  out << "event_index,score,tried,ok,label\n";
  for (Index i = 0; i < s.size(); ++i) {
    out << i << ',' << fmt(s.score(i)) << ',' << t.tried(i) << ',' << t.ok(i) << ','
        << (labels[static_cast<std::size_t>(i)] == Label::signal ? 1 : 0) << '\n';
  }
}

void write_curve(const fs::path& path, const PurityEfficiencyCurve* c) {
  auto out = open_file(path);
  out << "threshold,efficiency,purity\n";
  if (c == nullptr) return;
  for (const auto& p : c->points) {
    out << fmt(p.threshold) << ',' << fmt(p.efficiency) << ',' << fmt(p.purity) << '\n';
  }
}

void write_null(const fs::path& path, const NullDistribution& null) {
  auto out = open_file(path);
  out << "value\n";
  for (double v : null.values) out << fmt(v) << '\n';
}

bool has_both_classes(const LabeledDataset& d) {
  return d.count(Label::signal) > 0 && d.count(Label::background) > 0;
}

// -- run / compare ------------------------------------------------------------------

struct RunOptions {
  fs::path train, test, out_dir;
  SchemaOptions schema;
  EngineOptions engine;
  // compare only
  Index knn_k = kDefaultKnnK;
  Index bins = kDefaultBins;
  double pseudo_count = kDefaultPseudoCount;

  void add(CLI::App* app, bool compare) {
    app->add_option("--train", train, "Background-only training CSV")->required();
    app->add_option("--test", test, "Labeled test CSV")->required();
    app->add_option("--out-dir", out_dir, "Output directory")->required();
    schema.add(app);
    engine.add(app);
    if (compare) {
      app->add_option("--knn-k", knn_k, "Neighbours for the kNN reference")->capture_default_str();
      app->add_option("--bins", bins, "Histogram bins for the likelihood reference")
          ->capture_default_str();
      app->add_option("--pseudo-count", pseudo_count, "Histogram pseudo-count")
          ->capture_default_str();
    }
  }

  std::vector<std::string> args(const std::string& command) const {
    std::vector<std::string> a{command, "--train", absolute_path(train), "--test", absolute_path(test)};
    schema.args(a);
    engine.args(a);
    if (command == "compare") {
      a.insert(a.end(), {"--knn-k", std::to_string(knn_k), "--bins", std::to_string(bins),
                         "--pseudo-count", fmt(pseudo_count)});
    }
    return a;
  }
};

struct Prepared {
  LoadedCsv train, test;
  FeatureMatrix train_z, test_z;
  ScalingParams<double> scaling;
};

Prepared load_inputs(const RunOptions& o, const CsvSchema& schema) {
  Prepared p;
  p.train = load_csv(o.train, schema);
  p.test = load_csv(o.test, schema);
  if (p.train.feature_names != p.test.feature_names) {
    throw InvalidInput("training and test files select different feature columns");
  }
  if (const Index n = p.train.data.count(Label::signal); n > 0) {
    throw InvalidInput("training sample must be background-only but holds " + std::to_string(n) +
                       " signal-labelled events");
  }
  p.scaling = fit_scaling(p.train.data.features);
  p.train_z = apply_scaling(p.train.data.features, p.scaling);
  p.test_z = apply_scaling(p.test.data.features, p.scaling);
  return p;
}

int cmd_run(const RunOptions& o, bool compare, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_now();
  const CsvSchema schema = o.schema.schema();
  EngineConfig cfg = o.engine.config();
  validate(cfg, -1);
  if (compare) {
    if (o.knn_k < 1) throw UsageError("--knn-k must be positive");
    if (o.bins < 2) throw UsageError("--bins must be at least 2");
    if (!(o.pseudo_count >= 0.0)) throw UsageError("--pseudo-count must be non-negative");
  }

  const Prepared in = load_inputs(o, schema);
  if (cfg.calibration_pool == 0) cfg.calibration_pool = in.test_z.rows();
  const auto warnings = validate(cfg, in.test_z.rows());
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  const auto result = inverse_bagging(in.test_z, in.train_z, cfg);
  const auto& tallies = result.run.tallies;
  const ScoreVector scores = score_events(tallies, cfg.ordering);
  const auto& labels = in.test.data.labels;
  const double separation =
      subset_separation(result.null.values, result.run.subset_statistics);

  std::optional<PurityEfficiencyCurve> curve;
  if (has_both_classes(in.test.data)) {
    curve = purity_efficiency_curve(scores, labels);
  } else if (compare) {
    throw InvalidInput("compare needs a test sample with both signal and background events");
  } else {
    err << "warning: test sample has a single class; roc.csv holds only its header\n";
  }

  open_out_dir(o.out_dir);
  std::vector<std::string> files{"scores.csv", "null.csv"};
  write_scores(o.out_dir / "scores.csv", scores, tallies, labels);
  write_null(o.out_dir / "null.csv", result.null);

  json m = base_manifest(compare ? "compare" : "run", o.args(compare ? "compare" : "run"), started);
  o.schema.record(m);
  o.engine.record(m, cfg);
  record_input(m, "train", o.train, in.train.data.n_events());
  record_input(m, "test", o.test, in.test.data.n_events());
  m["preprocessing.scaling"] = "z-score fitted on the training sample";
  m["input.features"] = in.train.feature_names;
  m["input.test.background_fraction"] = in.test.data.background_fraction();
  m["metrics.sum_tried"] = tallies.total_tried();
  m["metrics.expected_sum_tried"] = cfg.n_subsets * cfg.subset_size;
  m["metrics.n_untried"] = scores.n_untried();
  m["metrics.null_threshold"] = result.null.threshold;
  m["metrics.subset_separation"] = separation;
  m["warnings"] = warnings;

  if (!compare) {
    files.push_back("roc.csv");
    write_curve(o.out_dir / "roc.csv", curve ? &*curve : nullptr);
    m["metrics.curve_area"] = curve ? json(curve->area) : json(nullptr);
    m["metrics.keep_all_purity"] = curve ? json(curve->points.back().purity) : json(nullptr);
    m["metrics.mean_grid_purity"] = curve ? json(mean_grid_purity(*curve)) : json(nullptr);
  } else {
    const auto likelihood = purity_efficiency_curve(
        relative_likelihood_scores(in.test_z, in.train_z, o.bins, o.pseudo_count), labels);
    const auto knn = purity_efficiency_curve(knn_scores(in.test_z, in.train_z, o.knn_k), labels);
    const std::vector<NamedCurve> named{{"invbag", *curve}, {"likelihood", likelihood}, {"knn", knn}};
    const auto table = curve_dominance_report(named);
    for (const auto& [name, c] : named) {
      const std::string file = "roc_" + name + ".csv";
      write_curve(o.out_dir / file, &c);
      files.push_back(file);
      m["metrics.curve_area." + name] = c.area;
      m["metrics.mean_grid_purity." + name] = mean_grid_purity(c);
      m["metrics.keep_all_purity." + name] = c.points.back().purity;
    }
    {
      auto cmp = open_file(o.out_dir / "compare.csv");
      cmp << "metric";
      for (const auto& n : table.names) cmp << ',' << n;
      cmp << '\n';
      for (std::size_t g = 0; g < table.efficiency_grid.size(); ++g) {
        cmp << "purity_at_" << fmt_label(table.efficiency_grid[g]);
        for (const auto& col : table.purity) cmp << ',' << fmt(col[g]);
        cmp << '\n';
      }
      cmp << "area";
      for (double a : table.areas) cmp << ',' << fmt(a);
      cmp << '\n';
    }
    {
      auto sep = open_file(o.out_dir / "separation.txt");
      sep << fmt(separation) << '\n';
    }
    files.insert(files.end(), {"compare.csv", "separation.txt"});
    m["classifiers.knn_k"] = o.knn_k;
    m["classifiers.bins"] = o.bins;
    m["classifiers.pseudo_count"] = o.pseudo_count;
    m["evaluation.efficiency_grid"] = table.efficiency_grid;
  }
  record_output(m, o.out_dir, files);
  write_manifest(std::move(m), o.out_dir, t0);

  out << "sum_tried " << tallies.total_tried() << " (K*M = " << cfg.n_subsets * cfg.subset_size
      << ")\nsubset_separation " << fmt(separation) << '\n';
  if (curve) out << "curve_area " << fmt(curve->area) << '\n';
  out << "wrote " << absolute_path(o.out_dir) << '\n';
  return kExitOk;
}

// -- synth / prepare ------------------------------------------------------------------

struct SampleOptions {
  Index n_train = 5000;
  Index n_test = 1000;
  double bg_fraction = 0.96;
  std::uint64_t seed = 0;
  fs::path out_dir;

  void add(CLI::App* app) {
    app->add_option("--n-train", n_train, "Training (background-only) events")->capture_default_str();
    app->add_option("--n-test", n_test, "Test events")->capture_default_str();
    app->add_option("--bg-fraction", bg_fraction, "Background fraction of the test sample")
        ->capture_default_str();
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    app->add_option("--out-dir", out_dir, "Output directory")->required();
  }

  void check() const {
    if (n_train < 1) throw UsageError("--n-train must be positive");
    if (n_test < 1) throw UsageError("--n-test must be positive");
    if (!(bg_fraction >= 0.0 && bg_fraction <= 1.0)) {
      throw UsageError("--bg-fraction must lie in [0, 1]");
    }
  }

  void args(std::vector<std::string>& a) const {
    a.insert(a.end(), {"--n-train", std::to_string(n_train), "--n-test", std::to_string(n_test),
                       "--bg-fraction", fmt(bg_fraction), "--seed", std::to_string(seed)});
  }

  void record(json& m) const {
    m["sample.n_train"] = n_train;
    m["sample.n_test"] = n_test;
    m["sample.bg_fraction"] = bg_fraction;
    m["sample.n_test_background"] = background_count(n_test, bg_fraction);
    m["seed"] = seed;
  }
};

struct SynthOptions {
  Index d = 8;
  std::string shift = "1";
  SampleOptions sample;

  void add(CLI::App* app) {
    app->add_option("--d", d, "Number of features")->capture_default_str();
    app->add_option("--shift", shift, "Signal mean shift: one value or one per feature")
        ->capture_default_str();
    sample.add(app);
  }

  Eigen::VectorXd shift_vector() const {
    const auto parts = split_list(shift);
    if (parts.size() != 1 && static_cast<Index>(parts.size()) != d) {
      throw UsageError("--shift needs one value or " + std::to_string(d) + " values");
    }
    Eigen::VectorXd v(d);
    for (Index k = 0; k < d; ++k) {
      const auto& s = parts.size() == 1 ? parts[0] : parts[static_cast<std::size_t>(k)];
      try {
        std::size_t used = 0;
        v(k) = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v(k))) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw UsageError("--shift value '" + s + "' is not a finite number");
      }
    }
    return v;
  }
};

void save_pair(const fs::path& dir, const LabeledDataset& train, const LabeledDataset& test,
               const std::vector<std::string>& names, const CsvSchema& schema) {
  open_out_dir(dir);
  save_csv(dir / "train.csv", train, names, schema);
  save_csv(dir / "test.csv", test, names, schema);
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_now();
  if (o.d < 1) throw UsageError("--d must be positive");
  o.sample.check();
  const Eigen::VectorXd shift = o.shift_vector();
  const Index n_bg = background_count(o.sample.n_test, o.sample.bg_fraction);
  const Index n_sig = o.sample.n_test - n_bg;

  const SyntheticSpec spec{shift, derive_seed(o.sample.seed, SeedStage::generation)};
  const auto pools = generate_synthetic(spec, o.sample.n_train + n_bg, n_sig);
  LabeledDataset train;
  train.features = pools.background.topRows(o.sample.n_train);
  train.labels.assign(static_cast<std::size_t>(o.sample.n_train), Label::background);
  const FeatureMatrix bg_pool = pools.background.bottomRows(n_bg);
  const auto test = compose_test_sample(bg_pool, pools.signal, o.sample.n_test,
                                        o.sample.bg_fraction,
                                        derive_seed(o.sample.seed, SeedStage::composition));
  const auto names = default_feature_names(o.d);
  const CsvSchema schema;
  save_pair(o.sample.out_dir, train, test, names, schema);

  std::vector<std::string> args{"synth", "--d", std::to_string(o.d), "--shift", o.shift};
  o.sample.args(args);
  json m = base_manifest("synth", args, started);
  o.sample.record(m);
  m["synth.d"] = o.d;
  m["synth.shift"] = std::vector<double>(shift.data(), shift.data() + shift.size());
  m["synth.background"] = "N(0, I)";
  m["synth.signal"] = "N(shift, I)";
  m["seed.generation"] = spec.seed;
  m["seed.composition"] = derive_seed(o.sample.seed, SeedStage::composition);
  m["sample.n_test_signal"] = test.count(Label::signal);
  record_output(m, o.sample.out_dir, {"train.csv", "test.csv"});
  write_manifest(std::move(m), o.sample.out_dir, t0);
  out << "wrote train.csv (" << train.n_events() << " events) and test.csv ("
      << test.n_events() << " events, " << test.count(Label::signal) << " signal) to "
      << absolute_path(o.sample.out_dir) << '\n';
  return kExitOk;
}

struct PrepareOptions {
  std::vector<fs::path> inputs;
  SchemaOptions schema;
  SampleOptions sample;

  void add(CLI::App* app) {
    app->add_option("--input", inputs, "Labeled CSV file(s) pooled as the event source")
        ->required();
    schema.add(app);
    sample.add(app);
  }
};

int cmd_prepare(const PrepareOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_now();
  const CsvSchema schema = o.schema.schema();
  o.sample.check();

  std::vector<LoadedCsv> loaded;
  Index n_total = 0;
  for (const auto& path : o.inputs) {
    loaded.push_back(load_csv(path, schema));
    if (loaded.back().feature_names != loaded.front().feature_names) {
      throw InvalidInput("input files select different feature columns");
    }
    n_total += loaded.back().data.n_events();
  }
  const Index d = loaded.front().data.n_features();
  FeatureMatrix all(n_total, d);
  std::vector<Label> labels;
  Index r = 0;
  for (const auto& l : loaded) {
    all.middleRows(r, l.data.n_events()) = l.data.features;
    labels.insert(labels.end(), l.data.labels.begin(), l.data.labels.end());
    r += l.data.n_events();
  }
  SubsetIndex bg_rows, sig_rows;
  for (Index i = 0; i < n_total; ++i) {
    (labels[static_cast<std::size_t>(i)] == Label::signal ? sig_rows : bg_rows).push_back(i);
  }
  const auto n_bg = static_cast<Index>(bg_rows.size());
  if (n_bg < o.sample.n_train) {
    throw InvalidInput("only " + std::to_string(n_bg) + " background events for a training sample of " +
                       std::to_string(o.sample.n_train));
  }
  // Training events come out of the background pool first, so the test
  // sample never reuses them.
  const auto order = sample_without_replacement(n_bg, n_bg, derive_seed(o.sample.seed, SeedStage::training));
  SubsetIndex train_rows, rest_rows;
  for (Index i = 0; i < n_bg; ++i) {
    const Index row = bg_rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    (i < o.sample.n_train ? train_rows : rest_rows).push_back(row);
  }
  std::sort(rest_rows.begin(), rest_rows.end());
  LabeledDataset train;
  train.features = gather(all, train_rows);
  train.labels.assign(train_rows.size(), Label::background);
  const auto test = compose_test_sample(gather(all, rest_rows), gather(all, sig_rows),
                                        o.sample.n_test, o.sample.bg_fraction,
                                        derive_seed(o.sample.seed, SeedStage::composition));
  save_pair(o.sample.out_dir, train, test, loaded.front().feature_names, schema);

  std::vector<std::string> args{"prepare"};
  for (const auto& p : o.inputs) args.insert(args.end(), {"--input", absolute_path(p)});
  o.schema.args(args);
  o.sample.args(args);
  json m = base_manifest("prepare", args, started);
  o.schema.record(m);
  o.sample.record(m);
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    record_input(m, "source" + std::to_string(i), o.inputs[i], loaded[i].data.n_events());
  }
  m["input.features"] = loaded.front().feature_names;
  m["seed.training"] = derive_seed(o.sample.seed, SeedStage::training);
  m["seed.composition"] = derive_seed(o.sample.seed, SeedStage::composition);
  m["sample.n_test_signal"] = test.count(Label::signal);
  record_output(m, o.sample.out_dir, {"train.csv", "test.csv"});
  write_manifest(std::move(m), o.sample.out_dir, t0);
  out << "wrote train.csv (" << train.n_events() << " events) and test.csv ("
      << test.n_events() << " events) with " << d << " features to "
      << absolute_path(o.sample.out_dir) << '\n';
  return kExitOk;
}

// -- replay ---------------------------------------------------------------------------

int cmd_replay(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& out,
               std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open '" + manifest_path.string() + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest: " + std::string(e.what()));
  }
  if (!m.is_object() || !m.contains("invocation.args")) {
    throw std::runtime_error("manifest has no recorded invocation");
  }
  for (const auto& [key, value] : m.items()) {
    const std::string suffix = ".sha256";
    if (key.rfind("input.", 0) != 0 || key.size() <= suffix.size() ||
        key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    const std::string stem = key.substr(0, key.size() - suffix.size());
    const fs::path path = m.at(stem + ".path").get<std::string>();
    if (sha256_file(path) != value.get<std::string>()) {
      throw std::runtime_error("input '" + path.string() + "' changed since the manifest was written");
    }
  }
  auto args = m.at("invocation.args").get<std::vector<std::string>>();
  if (args.empty() || args.front() == "replay") throw std::runtime_error("manifest invocation is not replayable");
  args.insert(args.end(), {"--out-dir", out_dir.string()});
  return run(args, out, err);
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inverse bagging anomaly scoring"};
  app.set_version_flag("--version", INVBAG_VERSION);
  app.require_subcommand(1);

  SynthOptions synth;
  synth.add(app.add_subcommand("synth", "Write a synthetic Gaussian training/test pair"));
  PrepareOptions prepare;
  prepare.add(app.add_subcommand("prepare", "Split labeled CSV files into training and test samples"));
  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Score a test sample by inverse bagging");
  run_opts.add(run_cmd, false);
  RunOptions compare_opts;
  auto* compare_cmd =
      app.add_subcommand("compare", "Inverse bagging against the likelihood and kNN references");
  compare_opts.add(compare_cmd, true);
  fs::path manifest, replay_out;
  auto* replay = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  replay->add_option("--manifest", manifest, "manifest.json to replay")->required();
  replay->add_option("--out-dir", replay_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("synth")) return cmd_synth(synth, out);
    if (app.got_subcommand("prepare")) return cmd_prepare(prepare, out);
    if (app.got_subcommand("run")) return cmd_run(run_opts, false, out, err);
    if (app.got_subcommand("compare")) return cmd_run(compare_opts, true, out, err);
    if (app.got_subcommand("replay")) return cmd_replay(manifest, replay_out, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace invbag::cli
