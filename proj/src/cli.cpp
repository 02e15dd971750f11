// Copyright 2026 The xaiens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xaiens/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "xaiens/bundle.hpp"
#include "xaiens/ensemble_autoweighted.hpp"
#include "xaiens/ensemble_basic.hpp"
#include "xaiens/ensemble_supervised.hpp"
#include "xaiens/metrics.hpp"
#include "xaiens/normalization.hpp"
#include "xaiens/npy.hpp"
#include "xaiens/parallel.hpp"
#include "xaiens/synthetic.hpp"

namespace xaiens::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct Common {
  std::string manifest;
  std::string out;
  int threads = 0;
};

struct NormalizeConfig {
  std::string normalization = "standard";
  std::string dtype = "float64";
};

struct EnsembleConfig {
  std::string strategy = "norm";
  std::string normalization = "standard";
  std::string aggregator = "avg";
  std::string kernel = "rbf";
  double gamma = 0.0;
  int degree = 2;
  double coef0 = 1.0;
  double ridge = 1.0;
  int folds = 5;
  double holdout = 0.0;
  bool no_mask_weights = false;
  bool center_bias = false;
  double byte_budget = 0.0;
};

struct EvaluateConfig {
  std::string metrics = "fa,ra,ro,co,lo";
  std::vector<std::string> methods;
  std::string attributions;
  std::string weights;
  std::string model_command;
  std::string explainer_command;
  std::string builtin_explainer = "input_x_gradient";
  Index occlusion_patch = 4;
  double timeout = 0.0;
  Index num_classes = 0;
  std::uint64_t seed = 0;
  int flip_steps = 10;
  int lipschitz_samples = 10;
  double lipschitz_radius = 0.0;
};

struct BenchConfig {
  Index synthetic = 100;
  int repetitions = 5;
  std::vector<Index> sizes{50, 100, 200};
  bool no_growth = false;
  std::uint64_t seed = 0;
};

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

std::vector<std::size_t> dims4(const Shape& s, Index n) {
  return {static_cast<std::size_t>(n), static_cast<std::size_t>(s.channels), static_cast<std::size_t>(s.height),
          static_cast<std::size_t>(s.width)};
}

json stats_json(const StatSummary& s) {
  json per_channel = json::array();
  for (Index c = 0; c < s.per_channel_std.size(); ++c) per_channel.push_back(s.per_channel_std(c));
  return {{"mean", s.mean},
          {"std", s.std},
          {"median", s.median},
          {"iqr", s.iqr},
          {"per_channel_std", per_channel},
          {"channel_avg_std", s.channel_avg_std()}};
}

std::string join_command(const std::vector<std::string>& args) {
  std::string line = "xaiens";
  for (const auto& a : args) {
    const bool plain = !a.empty() && a.find_first_of(" \t\"'\\$`") == std::string::npos;
    line += ' ';
    if (plain) {
      line += a;
    } else {
      line += '\'';
      for (char c : a) line += c == '\'' ? std::string("'\\''") : std::string(1, c);
      line += '\'';
    }
  }
  return line;
}

json provenance_base(const std::vector<std::string>& args, std::string_view subcommand, const Common& common) {
  json p;
  p["tool"] = "xaiens";
  p["version"] = kVersion;
  p["subcommand"] = subcommand;
  p["command"] = join_command(args);
  p["argv"] = args;
  if (!common.manifest.empty()) p["manifest"] = fs::absolute(common.manifest).lexically_normal().string();
  p["working_directory"] = fs::current_path().string();
  return p;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
  os << doc.dump(2) << '\n';
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw Error(Errc::ConfigError, "an output directory (--out) is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out + ": " + ec.message());
  return fs::path(out);
}

Bundle load(const Common& common) {
  if (common.manifest.empty()) throw Error(Errc::ConfigError, "a manifest (--manifest) is required");
  return load_bundle(common.manifest);
}

// normalize

int cmd_normalize(const std::vector<std::string>& args, const Common& common, const NormalizeConfig& cfg,
                  std::ostream& out) {
  const NormalizationKind kind = parse_normalization(cfg.normalization);
  if (cfg.dtype != "float64" && cfg.dtype != "float32") {
    throw Error(Errc::ConfigError, "unknown dtype '" + cfg.dtype + "' (expected float64 or float32)");
  }
  const bool single = cfg.dtype == "float32";
  const Bundle bundle = load(common);
  const fs::path dir = prepare_out(common.out);
  const ExplanationSet& expl = bundle.explanations;

  NormalizeOptions nopts;
  nopts.precision = single ? Precision::Float32 : Precision::Float64;
  nopts.threads = common.threads;
  Normalized result;
  if (kind != NormalizationKind::None) result = normalize_with_records(expl, kind, nopts);

  json stats = json::object();
  json files = json::object();
  for (std::size_t e = 0; e < expl.methods.size(); ++e) {
    const std::string& name = expl.methods[e];
    const std::string file = sanitize(name) + ".npy";
    json entry;
    entry["file"] = file;
    entry["kind"] = to_string(kind);
    if (kind == NormalizationKind::None) {
      // Passing through means the source bytes, not a re-encoding.
      std::error_code ec;
      fs::copy_file(bundle.explanation_files[e], dir / file, fs::copy_options::overwrite_existing, ec);
      if (ec) throw Error(Errc::IoFailure, "cannot copy " + bundle.explanation_files[e].string() + ": " + ec.message());
      entry["center"] = 0.0;
      entry["scale"] = 1.0;
      entry["stats"] = stats_json(compute_stats(expl, name));
    } else {
      const NormalizationRecord& rec = result.records[e];
      write_npy(dir / file, NpyArray::from_matrix(dims4(expl.shape, expl.num_instances()), result.set.data[e],
                                                  single ? DType::Float32 : DType::Float64));
      entry["center"] = rec.center;
      entry["scale"] = rec.scale;
      entry["stats"] = stats_json(rec.stats);
    }
    stats[name] = entry;
    files[name] = file;
  }
  write_json(dir / "stats.json", json{{"normalization", to_string(kind)}, {"dtype", cfg.dtype}, {"methods", stats}});

  json prov = provenance_base(args, "normalize", common);
  prov["config"] = {{"normalization", to_string(kind)}, {"dtype", cfg.dtype}, {"threads", common.threads}};
  prov["outputs"] = files;
  write_json(dir / "provenance.json", prov);
  out << "normalized " << expl.num_methods() << " methods (" << to_string(kind) << ") into " << dir.string() << '\n';
  return kExitOk;
}

// ensemble

krr::Kernel make_kernel(const EnsembleConfig& cfg) {
  if (cfg.kernel == "rbf") return krr::Kernel::rbf(cfg.gamma);
  if (cfg.kernel == "linear") return krr::Kernel::linear();
  if (cfg.kernel == "poly" || cfg.kernel == "polynomial") return krr::Kernel::polynomial(cfg.degree, cfg.coef0);
  throw Error(Errc::ConfigError, "unknown kernel '" + cfg.kernel + "' (expected rbf, linear or poly)");
}

json scores_json(const EnsembleScores& scores) {
  json arr = json::array();
  for (const auto& s : scores) {
    arr.push_back({{"method", s.method},
                   {"stability", s.stability},
                   {"consistency", s.consistency},
                   {"es", s.es},
                   {"weight", s.normalized_weight}});
  }
  return arr;
}

int cmd_ensemble(const std::vector<std::string>& args, const Common& common, const EnsembleConfig& cfg,
                 std::ostream& out) {
  const Strategy strategy = parse_strategy(cfg.strategy);
  const Bundle bundle = load(common);
  const ExplanationSet& expl = bundle.explanations;

  json prov = provenance_base(args, "ensemble", common);
  json config{{"strategy", to_string(strategy)}, {"threads", common.threads}};
  json details = json::object();
  EnsembleResult result;

  switch (strategy) {
    case Strategy::NormEnsemble: {
      const NormalizationKind norm = parse_normalization(cfg.normalization);
      const AggregationKind agg = parse_aggregation(cfg.aggregator);
      config["normalization"] = to_string(norm);
      config["aggregator"] = to_string(agg);
      NormEnsembleOptions opts;
      opts.threads = common.threads;
      opts.normalize.threads = common.threads;
      result = norm_ensemble_xai(expl, norm, agg, opts);
      break;
    }
    case Strategy::Autoweighted: {
      if (!bundle.evidence) {
        throw Error(Errc::MissingEvidence, "autoweighted needs perturbation evidence (\"perturbed\", \"alt_models\") in the manifest");
      }
      const EnsembleScores scores = ensemble_scores(*bundle.evidence, expl.methods);
      AutoweightedOptions opts;
      opts.threads = common.threads;
      result = autoweighted_ensemble(expl, scores, opts);
      config["normalization"] = to_string(result.normalization);
      details["scores"] = scores_json(scores);
      break;
    }
    case Strategy::Supervised: {
      if (!bundle.masks) throw Error(Errc::MissingMasks, "supervised ensembling needs \"masks\" in the manifest");
      SupervisedOptions opts;
      opts.kernel = make_kernel(cfg);
      opts.ridge = cfg.ridge;
      opts.mask_area_weights = !cfg.no_mask_weights;
      opts.center_bias_audit = cfg.center_bias;
      opts.threads = common.threads;
      if (cfg.byte_budget > 0.0) opts.fit.byte_budget = static_cast<std::size_t>(cfg.byte_budget);
      if (cfg.holdout > 0.0) {
        opts.split = Holdout{cfg.holdout, bundle.labels.value_or(std::vector<long>{})};
        config["split"] = {{"type", "holdout"}, {"test_fraction", cfg.holdout}, {"stratified", bundle.labels.has_value()}};
      } else {
        opts.split = KFold{cfg.folds};
        config["split"] = {{"type", "kfold"}, {"folds", cfg.folds}};
      }
      config["kernel"] = opts.kernel.resolved(expl.shape.size() * expl.num_methods()).str();
      config["ridge"] = cfg.ridge;
      config["mask_area_weights"] = opts.mask_area_weights;
      config["byte_budget"] = opts.fit.byte_budget;
      SupervisedOutput sup = supervised_xai(expl, &*bundle.masks, opts);
      json folds = json::array();
      for (const auto& f : sup.folds) folds.push_back({{"train", f.train}, {"predict", f.predict}});
      details["folds"] = folds;
      details["fold_of"] = sup.fold_of;
      details["in_sample"] = sup.in_sample;
      details["out_of_range_fraction"] = sup.out_of_range_fraction;
      if (cfg.center_bias) details["radial_profile"] = sup.radial_profile;
      result = std::move(sup.ensemble);
      break;
    }
  }

  const fs::path dir = prepare_out(common.out);
  write_npy(dir / "ensemble.npy", NpyArray::from_matrix(dims4(result.shape, result.num_instances()), result.tensors));

  if (result.weights) {
    json w = json::object();
    for (std::size_t e = 0; e < expl.methods.size() && e < result.weights->size(); ++e) {
      w[expl.methods[e]] = (*result.weights)[e];
    }
    details["weights"] = w;
  }
  prov["config"] = config;
  prov["methods"] = expl.methods;
  prov["instance_ids"] = result.instance_ids;
  prov["output"] = {{"file", "ensemble.npy"},
                    {"shape", dims4(result.shape, result.num_instances())},
                    {"strategy", to_string(result.strategy)},
                    {"normalization", to_string(result.normalization)}};
  if (result.aggregator) prov["output"]["aggregator"] = to_string(*result.aggregator);
  prov["details"] = details;
  prov["warnings"] = result.warnings;
  write_json(dir / "provenance.json", prov);

  out << "ensembled " << result.num_instances() << " instances with " << to_string(strategy) << " into "
      << dir.string() << '\n';
  for (const auto& w : result.warnings) out << "warning: " << w << '\n';
  return kExitOk;
}

// evaluate

struct Oracles {
  std::unique_ptr<LinearModel> linear;
  std::unique_ptr<ExternalModel> external_model;
  std::unique_ptr<ExplainerOracle> explainer;
  ModelOracle* model = nullptr;
  json description = json::object();
};

Oracles make_oracles(const Bundle& bundle, const EvaluateConfig& cfg) {
  OracleConfig oc = bundle.oracle;
  if (!cfg.weights.empty()) oc.builtin_weights = fs::path(cfg.weights);
  if (!cfg.model_command.empty()) oc.model_command = cfg.model_command;
  if (!cfg.explainer_command.empty()) oc.explainer_command = cfg.explainer_command;
  if (cfg.timeout > 0.0) oc.timeout_seconds = cfg.timeout;
  if (cfg.num_classes > 0) oc.num_classes = cfg.num_classes;

  Oracles o;
  if (oc.builtin_weights) {
    o.linear = std::make_unique<LinearModel>(LinearModel::from_npy(*oc.builtin_weights));
    if (!(o.linear->shape() == bundle.explanations.shape)) {
      throw Error(Errc::ShapeMismatch, "builtin weights shaped " + o.linear->shape().str() + ", bundle is " +
                                           bundle.explanations.shape.str());
    }
    o.description["builtin_weights"] = fs::absolute(*oc.builtin_weights).lexically_normal().string();
  }
  if (oc.model_command) {
    o.external_model = std::make_unique<ExternalModel>(CommandSpec{*oc.model_command, oc.timeout_seconds, oc.num_classes});
    o.model = o.external_model.get();
    o.description["model_command"] = *oc.model_command;
  } else if (o.linear) {
    o.model = o.linear.get();
  }
  if (oc.explainer_command) {
    const Index classes = oc.num_classes ? oc.num_classes : (o.model ? o.model->num_classes() : 0);
    o.explainer = std::make_unique<ExternalExplainer>(CommandSpec{*oc.explainer_command, oc.timeout_seconds, classes});
    o.description["explainer_command"] = *oc.explainer_command;
  } else if (o.linear) {
    if (cfg.builtin_explainer == "input_x_gradient") {
      // The linear model itself answers with input x gradient.
    } else if (cfg.builtin_explainer == "saliency") {
      o.explainer = std::make_unique<GradientExplainer>(*o.linear);
    } else if (cfg.builtin_explainer == "occlusion") {
      o.explainer = std::make_unique<OcclusionExplainer>(*o.linear, cfg.occlusion_patch);
    } else {
      throw Error(Errc::ConfigError, "unknown builtin explainer '" + cfg.builtin_explainer +
                                         "' (expected input_x_gradient, saliency or occlusion)");
    }
    o.description["builtin_explainer"] = cfg.builtin_explainer;
  }
  if (oc.explainer_command || o.linear) o.description["timeout"] = oc.timeout_seconds;
  return o;
}

ExplainerOracle* explainer_of(Oracles& o) {
  if (o.explainer) return o.explainer.get();
  return o.linear.get();  // input x gradient
}

json series_json(const MetricSeries& s) {
  json values = json::array();
  for (const auto& v : s.per_instance) values.push_back(v ? json(*v) : json(nullptr));
  return {{"mean", s.mean}, {"std", s.std}, {"evaluated", s.evaluated}, {"skipped", s.skipped}, {"per_instance", values}};
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

int cmd_evaluate(const std::vector<std::string>& args, const Common& common, const EvaluateConfig& cfg,
                 std::ostream& out) {
  std::vector<Metric> selection;
  {
    std::stringstream ss(cfg.metrics);
    std::string key;
    while (std::getline(ss, key, ',')) {
      if (key.empty()) continue;
      const Metric m = parse_metric(key);
      if (std::find(selection.begin(), selection.end(), m) == selection.end()) selection.push_back(m);
    }
  }
  if (selection.empty()) throw Error(Errc::ConfigError, "no metrics selected");

  const Bundle bundle = load(common);
  const ExplanationSet& expl = bundle.explanations;
  Oracles oracles = make_oracles(bundle, cfg);

  struct Target {
    std::string name;
    std::string source;
    RowMatrixXd values;
  };
  std::vector<Target> targets;
  if (!cfg.attributions.empty()) {
    const NpyArray arr = read_npy(cfg.attributions);
    const Shape s = expl.shape;
    const bool full = arr.shape.size() == 4 && arr.shape[1] == static_cast<std::size_t>(s.channels);
    const bool single = arr.shape.size() == 4 && arr.shape[1] == 1;
    if (arr.shape.size() != 4 || arr.shape[0] != static_cast<std::size_t>(expl.num_instances()) ||
        arr.shape[2] != static_cast<std::size_t>(s.height) || arr.shape[3] != static_cast<std::size_t>(s.width) ||
        !(full || single)) {
      throw Error(Errc::ShapeMismatch, "attributions in " + cfg.attributions + " do not match the bundle shape " +
                                           s.str() + " with " + std::to_string(expl.num_instances()) + " instances");
    }
    RowMatrixXd values = arr.to_matrix();
    if (!full) {
      // One map per pixel: every channel gets the same value.
      values = values.replicate(1, s.channels).eval();
    }
    if (!values.allFinite()) throw Error(Errc::NonFiniteInput, "non-finite attribution in " + cfg.attributions);
    targets.push_back({fs::path(cfg.attributions).stem().string(), fs::absolute(cfg.attributions).string(), values});
  } else {
    const std::vector<std::string> names = cfg.methods.empty() ? expl.methods : cfg.methods;
    for (const auto& name : names) targets.push_back({name, "method", expl.method(name)});
  }

  EvaluationData data;
  if (bundle.inputs) data.inputs = &*bundle.inputs;
  if (bundle.labels) data.labels = &*bundle.labels;
  if (bundle.masks) data.masks = &*bundle.masks;
  OracleSet set{oracles.model, explainer_of(oracles)};
  EvaluateOptions opts;
  opts.pixel_flipping.steps = cfg.flip_steps;
  opts.lipschitz.samples = cfg.lipschitz_samples;
  opts.lipschitz.radius = cfg.lipschitz_radius;
  opts.seed = cfg.seed;
  opts.threads = common.threads;

  json results = json::array();
  std::ostringstream csv;
  csv << "name,metric,mean,std,evaluated,skipped\n";
  for (const auto& t : targets) {
    const MetricReport report = evaluate_all(expl.shape, t.values, expl.instance_ids, data, set, selection, opts);
    json metrics = json::object();
    for (const auto& s : report.series) {
      metrics[std::string(metric_key(s.metric))] = series_json(s);
      csv << t.name << ',' << metric_key(s.metric) << ',' << csv_number(s.mean) << ',' << csv_number(s.std) << ','
          << s.evaluated << ',' << s.skipped << '\n';
      out << t.name << ' ' << metric_key(s.metric) << ' ' << s.mean << " +- " << s.std << '\n';
    }
    results.push_back({{"name", t.name}, {"source", t.source}, {"metrics", metrics}, {"warnings", report.warnings}});
  }

  const fs::path dir = prepare_out(common.out);
  json metric_keys = json::array();
  for (Metric m : selection) metric_keys.push_back(metric_key(m));
  write_json(dir / "report.json", json{{"instance_ids", expl.instance_ids}, {"metrics", metric_keys}, {"results", results}});
  {
    std::ofstream os(dir / "report.csv");
    os << csv.str();
    if (!os) throw Error(Errc::IoFailure, "cannot write " + (dir / "report.csv").string());
  }
  json prov = provenance_base(args, "evaluate", common);
  prov["config"] = {{"metrics", metric_keys},
                    {"seed", cfg.seed},
                    {"flip_steps", cfg.flip_steps},
                    {"lipschitz_samples", cfg.lipschitz_samples},
                    {"lipschitz_radius", cfg.lipschitz_radius},
                    {"threads", common.threads}};
  prov["oracles"] = oracles.description;
  prov["outputs"] = {"report.json", "report.csv"};
  write_json(dir / "provenance.json", prov);
  return kExitOk;
}

// bench

using Clock = std::chrono::steady_clock;

template <typename F>
double seconds(F&& f) {
  const auto t0 = Clock::now();
  f();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Timing {
  std::vector<double> runs;
  double mean() const {
    double s = 0.0;
    for (double r : runs) s += r;
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  }
  double std() const {
    const double m = mean();
    double s = 0.0;
    for (double r : runs) s += (r - m) * (r - m);
    return runs.empty() ? 0.0 : std::sqrt(s / static_cast<double>(runs.size()));
  }
};

json timing_json(const Timing& t) { return {{"mean", t.mean()}, {"std", t.std()}, {"runs", t.runs}}; }

SyntheticConfig synthetic_config(Index n, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.instances = n;
  sc.seed = seed;
  return sc;
}

int cmd_bench(const std::vector<std::string>& args, const Common& common, const BenchConfig& cfg, std::ostream& out) {
  if (cfg.repetitions < 1) throw Error(Errc::ConfigError, "--repetitions must be at least 1");
  const int threads = common.threads;

  std::unique_ptr<SyntheticWorld> world;
  Bundle bundle;
  if (common.manifest.empty()) {
    world = std::make_unique<SyntheticWorld>(synthetic_config(cfg.synthetic, cfg.seed));
    bundle = world->bundle(false, threads);
  } else {
    bundle = load(common);
  }
  const ExplanationSet& expl = bundle.explanations;

  NormEnsembleOptions nopts;
  nopts.threads = threads;
  nopts.normalize.threads = threads;
  SupervisedOptions sopts;
  sopts.threads = threads;
  AutoweightedOptions aopts;
  aopts.threads = threads;

  Timing norm, supervised, autoweighted;
  json notes = json::array();
  for (int r = 0; r < cfg.repetitions; ++r) {
    norm.runs.push_back(seconds([&] {
      norm_ensemble_xai(expl, NormalizationKind::Standard, AggregationKind::Avg, nopts);
    }));
    if (bundle.masks) {
      supervised.runs.push_back(seconds([&] { supervised_xai(expl, &*bundle.masks, sopts); }));
    }
    if (world) {
      autoweighted.runs.push_back(seconds([&] {
        const PerturbationEvidence ev = world->compute_evidence(threads);
        autoweighted_ensemble(expl, ev, aopts);
      }));
    } else if (bundle.evidence) {
      autoweighted.runs.push_back(seconds([&] { autoweighted_ensemble(expl, *bundle.evidence, aopts); }));
    }
  }
  if (!bundle.masks) notes.push_back("supervised skipped: no masks");
  if (!world && !bundle.evidence) notes.push_back("autoweighted skipped: no evidence");
  if (!world && bundle.evidence) notes.push_back("autoweighted timed on stored evidence; no recomputation");

  std::vector<std::pair<std::string, const Timing*>> timed;
  timed.emplace_back("norm", &norm);
  if (!supervised.runs.empty()) timed.emplace_back("supervised", &supervised);
  if (!autoweighted.runs.empty()) timed.emplace_back("autoweighted", &autoweighted);
  std::stable_sort(timed.begin(), timed.end(), [](const auto& a, const auto& b) { return a.second->mean() < b.second->mean(); });

  json report;
  report["instances"] = expl.num_instances();
  report["methods"] = expl.methods;
  report["repetitions"] = cfg.repetitions;
  report["source"] = world ? "synthetic" : "manifest";
  report["evidence_recomputed"] = static_cast<bool>(world);
  json strategies = json::object();
  strategies["norm"] = timing_json(norm);
  if (!supervised.runs.empty()) strategies["supervised"] = timing_json(supervised);
  if (!autoweighted.runs.empty()) strategies["autoweighted"] = timing_json(autoweighted);
  report["strategies"] = strategies;
  json ordering = json::array();
  for (const auto& [name, t] : timed) ordering.push_back(name);
  report["ordering"] = ordering;

  out << std::fixed << std::setprecision(4);
  for (const auto& [name, t] : timed) out << name << ' ' << t->mean() << " +- " << t->std() << " s\n";

  if (world && !cfg.no_growth && cfg.sizes.size() >= 2) {
    json growth = json::array();
    std::vector<std::pair<double, double>> points;
    for (Index n : cfg.sizes) {
      const SyntheticWorld w(synthetic_config(n, cfg.seed));
      const ExplanationSet e = w.explanations(threads);
      const MaskSet m = w.masks();
      Timing t;
      for (int r = 0; r < cfg.repetitions; ++r) t.runs.push_back(seconds([&] { supervised_xai(e, &m, sopts); }));
      growth.push_back({{"instances", n}, {"mean", t.mean()}, {"std", t.std()}});
      points.emplace_back(std::log(static_cast<double>(n)), std::log(t.mean()));
      out << "supervised n=" << n << ' ' << t.mean() << " +- " << t.std() << " s\n";
    }
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) mx += x, my += y;
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : points) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
    const double exponent = sxx > 0.0 ? sxy / sxx : 0.0;
    report["supervised_growth"] = {{"points", growth}, {"exponent", exponent}};
    out << "supervised growth exponent " << exponent << '\n';
  }
  report["notes"] = notes;
  for (const auto& n : notes) out << "note: " << n.get<std::string>() << '\n';

  if (!common.out.empty()) {
    const fs::path dir = prepare_out(common.out);
    write_json(dir / "bench.json", report);
    json prov = provenance_base(args, "bench", common);
    prov["config"] = {{"synthetic", cfg.synthetic},
                      {"repetitions", cfg.repetitions},
                      {"sizes", cfg.sizes},
                      {"seed", cfg.seed},
                      {"threads", threads}};
    prov["outputs"] = {"bench.json"};
    write_json(dir / "provenance.json", prov);
  }
  return kExitOk;
}

struct SynthConfig {
  Index instances = 20;
  Index channels = 3;
  Index height = 16;
  Index width = 16;
  Index classes = 4;
  bool evidence = false;
  std::uint64_t seed = 0;
};

int cmd_synthesize(const std::vector<std::string>& args, const Common& common, const SynthConfig& cfg,
                   std::ostream& out) {
  SyntheticConfig sc;
  sc.instances = cfg.instances;
  sc.shape = Shape{cfg.channels, cfg.height, cfg.width};
  sc.classes = cfg.classes;
  sc.seed = cfg.seed;
  if (!sc.shape.valid() || sc.instances < 1 || sc.classes < 2) {
    throw Error(Errc::ConfigError, "synthetic bundles need positive extents and at least two classes");
  }
  const SyntheticWorld world(sc);
  const fs::path dir = prepare_out(common.out);
  const Bundle b = world.bundle(cfg.evidence, common.threads);
  const fs::path manifest = write_bundle(dir, b, &world.model().weights(), sc.classes);
  json prov = provenance_base(args, "synthesize", common);
  prov["config"] = {{"instances", cfg.instances},
                    {"shape", {cfg.channels, cfg.height, cfg.width}},
                    {"classes", cfg.classes},
                    {"evidence", cfg.evidence},
                    {"seed", cfg.seed}};
  prov["outputs"] = {manifest.filename().string()};
  write_json(dir / "provenance.json", prov);
  out << manifest.string() << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Common& common, bool manifest_required) {
  auto* m = sub->add_option("--manifest,-m", common.manifest, "Bundle manifest (JSON)");
  if (manifest_required) m->required();
  sub->add_option("--out,-o", common.out, "Output directory");
  sub->add_option("--threads,-j", common.threads, std::string("Worker threads (0: ") + kThreadsEnv + " or hardware)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::DegenerateSpread:
    case Errc::SingularSystem:
    case Errc::BudgetExceeded:
    case Errc::PreconditionViolation:
    case Errc::MissingEvidence:
    case Errc::MissingMasks:
    case Errc::TooFewInstances:
    case Errc::AllZeroAttribution:
    case Errc::NonPositiveInitialScore:
    case Errc::SingleClassModel:
      return kExitPrecondition;
    case Errc::OracleFailure:
      return kExitOracle;
    default:
      return kExitInput;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble and evaluate precomputed attribution maps", "xaiens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  NormalizeConfig ncfg;
  EnsembleConfig ecfg;
  EvaluateConfig vcfg;
  BenchConfig bcfg;

  auto* normalize = app.add_subcommand("normalize", "Normalize every method of a bundle");
  add_common(normalize, common, true);
  normalize->add_option("--normalization,-n", ncfg.normalization, "standard, robust, second-moment or none")
      ->capture_default_str();
  normalize->add_option("--dtype", ncfg.dtype, "Output dtype: float64 or float32")->capture_default_str();

  auto* ensemble = app.add_subcommand("ensemble", "Combine the methods of a bundle into one map per instance");
  add_common(ensemble, common, true);
  ensemble->add_option("--strategy,-s", ecfg.strategy, "norm, autoweighted or supervised")->capture_default_str();
  ensemble->add_option("--normalization,-n", ecfg.normalization, "norm: standard, robust, second-moment or none")
      ->capture_default_str();
  ensemble->add_option("--aggregator,-a", ecfg.aggregator, "norm: max, min, avg or max-abs")->capture_default_str();
  ensemble->add_option("--kernel", ecfg.kernel, "supervised: rbf, linear or poly")->capture_default_str();
  ensemble->add_option("--gamma", ecfg.gamma, "supervised: RBF gamma (0: 1/d)")->capture_default_str();
  ensemble->add_option("--degree", ecfg.degree, "supervised: polynomial degree")->capture_default_str();
  ensemble->add_option("--coef0", ecfg.coef0, "supervised: polynomial offset")->capture_default_str();
  ensemble->add_option("--ridge", ecfg.ridge, "supervised: ridge penalty")->capture_default_str();
  auto* folds = ensemble->add_option("--folds", ecfg.folds, "supervised: k-fold cross-fitting")->capture_default_str();
  ensemble->add_option("--holdout", ecfg.holdout, "supervised: held-out fraction instead of k-fold")
      ->excludes(folds)
      ->check(CLI::Range(0.0, 1.0));
  ensemble->add_flag("--no-mask-weights", ecfg.no_mask_weights, "supervised: uniform sample weights");
  ensemble->add_flag("--center-bias", ecfg.center_bias, "supervised: record a radial attribution profile");
  ensemble->add_option("--byte-budget", ecfg.byte_budget, "supervised: solver memory limit in bytes");

  auto* evaluate = app.add_subcommand("evaluate", "Score attributions with the metric battery");
  add_common(evaluate, common, true);
  evaluate->add_option("--metrics", vcfg.metrics, "Comma-separated subset of fa,ra,ro,co,lo")->capture_default_str();
  evaluate->add_option("--method", vcfg.methods, "Evaluate only these bundle methods");
  evaluate->add_option("--attributions", vcfg.attributions, "Evaluate an (N,C,H,W) or (N,1,H,W) NPY file instead");
  evaluate->add_option("--weights", vcfg.weights, "Builtin linear model weights, (K,C,H,W) NPY");
  evaluate->add_option("--model-command", vcfg.model_command, "External model command template");
  evaluate->add_option("--explainer-command", vcfg.explainer_command, "External explainer command template");
  evaluate->add_option("--builtin-explainer", vcfg.builtin_explainer, "input_x_gradient, saliency or occlusion")
      ->capture_default_str();
  evaluate->add_option("--occlusion-patch", vcfg.occlusion_patch, "Window size of the occlusion explainer")
      ->capture_default_str();
  evaluate->add_option("--timeout", vcfg.timeout, "External oracle timeout in seconds");
  evaluate->add_option("--num-classes", vcfg.num_classes, "Class count of external oracles");
  evaluate->add_option("--seed", vcfg.seed, "Seed for the randomized metrics")->capture_default_str();
  evaluate->add_option("--flip-steps", vcfg.flip_steps, "Pixel flipping steps")->capture_default_str();
  evaluate->add_option("--lipschitz-samples", vcfg.lipschitz_samples, "Lipschitz perturbation samples")
      ->capture_default_str();
  evaluate->add_option("--lipschitz-radius", vcfg.lipschitz_radius, "Lipschitz ball radius (0: auto)")
      ->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Time the ensembling strategies");
  add_common(bench, common, false);
  bench->add_option("--synthetic", bcfg.synthetic, "Instances of the synthetic bundle when no manifest is given")
      ->capture_default_str();
  bench->add_option("--repetitions,-r", bcfg.repetitions, "Timed repetitions")->capture_default_str();
  bench->add_option("--sizes", bcfg.sizes, "Synthetic sizes for the supervised growth fit")->delimiter(',');
  bench->add_flag("--no-growth", bcfg.no_growth, "Skip the supervised growth fit");
  bench->add_option("--seed", bcfg.seed, "Synthetic bundle seed")->capture_default_str();

  SynthConfig scfg;
  auto* synthesize = app.add_subcommand("synthesize", "Write a synthetic bundle with masks, inputs and oracle weights");
  synthesize->add_option("--out,-o", common.out, "Output directory")->required();
  synthesize->add_option("--threads,-j", common.threads, "Worker threads")->check(CLI::NonNegativeNumber);
  synthesize->add_option("--instances", scfg.instances, "Instances")->capture_default_str();
  synthesize->add_option("--channels", scfg.channels, "Channels")->capture_default_str();
  synthesize->add_option("--height", scfg.height, "Height")->capture_default_str();
  synthesize->add_option("--width", scfg.width, "Width")->capture_default_str();
  synthesize->add_option("--classes", scfg.classes, "Classes")->capture_default_str();
  synthesize->add_flag("--evidence", scfg.evidence, "Include perturbation evidence for autoweighted");
  synthesize->add_option("--seed", scfg.seed, "Seed")->capture_default_str();

  std::vector<const char*> argv{"xaiens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*normalize) return cmd_normalize(args, common, ncfg, out);
    if (*ensemble) return cmd_ensemble(args, common, ecfg, out);
    if (*evaluate) return cmd_evaluate(args, common, vcfg, out);
    if (*synthesize) return cmd_synthesize(args, common, scfg, out);
    return cmd_bench(args, common, bcfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace xaiens::cli
