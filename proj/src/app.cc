// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/app.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uno/errors.h"
#include "uno/flow.h"
#include "uno/metrics.h"

namespace uno::app {

namespace {

constexpr std::size_t kSummarySamples = 512;

Json ParseValue(const std::string& text) {
  Json v = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return Json(text);
  return v;
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Json TensorToJson(const Tensor& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.dim(1); ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> SafePearson(std::span<const double> a, std::span<const double> b) {
  try {
    return metrics::Pearson(a, b);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

// Lets the caller split sub-objects off a config before the flat parser.
Json TakeObject(Json& config, const std::string& key) {
  if (!config.contains(key)) return Json::object();
  Json sub = config[key];
  config.erase(key);
  if (!sub.is_object()) throw ConfigError("config key '" + key + "' must be an object");
  return sub;
}

std::size_t ReadSize(const Json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::pair<double, double> ScoreRange(score::ScoreKind kind) {
  switch (kind) {
    case score::ScoreKind::kUno: return {-1.0, 1.0};
    case score::ScoreKind::kUnc: return {-1.0, 0.0};
    case score::ScoreKind::kNo: return {0.0, 1.0};
  }
  return {0.0, 1.0};
}

// Scores for a closed K-way model: -max softmax over K, no negative class.
std::vector<score::ScoreTriple> ClosedScores(const net::OpenSetModel& model,
                                             const Tensor& x) {
  const Tensor p = model.Posterior(x);
  std::vector<score::ScoreTriple> out(p.dim(0));
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    double best = 0.0;
    for (std::size_t c = 0; c < p.dim(1); ++c) best = std::max(best, p.at(r, c));
    out[r].s_unc = -best;
  }
  return out;
}

Curves MakeCurves(const std::vector<double>& pos, const std::vector<double>& neg,
                  score::ScoreKind kind) {
  const metrics::ScoredSet set = metrics::MakeScoredSet(pos, neg);
  return Curves{metrics::RocCsv(metrics::RocCurve(set)),
                metrics::PrCsv(metrics::PrCurve(set)),
                ScoreHistogramCsv(neg, pos, kind)};
}

Json SummarizeFlow(const net::OpenSetModel& model, const flow::FlowModel& flow,
                   std::uint64_t seed) {
  Rng rng = Rng(seed).Substream("summary.samples");
  const Tensor samples = flow.Sample(kSummarySamples, rng);
  Json j;
  j["flow_samples"] = kSummarySamples;
  j["dispersion"] = train::MeanPairwiseDistance(model.Features(samples));
  if (model.head.has_negative()) {
    j["collapse_fraction"] = train::CollapseFraction(model, samples);
  }
  return j;
}

Json TrainImageWide(const TrainRequest& req) {
  Json config = req.config;
  const Json features_json = TakeObject(config, "features");
  const Json flow_json = TakeObject(config, "flow");
  const train::TrainConfig cfg = train::TrainConfigFromJson(config);
  const synth::DatasetBundle bundle = synth::LoadBundle(req.data);
  const train::MixedDataset data = train::MixedDataset::FromBundle(bundle);
  const std::size_t dim = bundle.train.x.dim(1);
  const net::FeatureConfig features = FeatureConfigFromJson(features_json, dim);
  const flow::FlowConfig flow_cfg = FlowConfigFromJson(flow_json, dim);

  Json resolved = train::ToJson(cfg);
  resolved["features"] = ToJson(features);
  if (req.mode == TrainMode::kTwoStep || req.mode == TrainMode::kNaiveJoint) {
    resolved["flow"] = ToJson(flow_cfg);
  }

  Json summary;
  summary["mode"] = TrainModeName(req.mode);
  summary["seed"] = cfg.seed;
  train::TrainLog log;
  std::optional<net::OpenSetModel> model;
  std::optional<flow::FlowModel> flow;
  switch (req.mode) {
    case TrainMode::kClosed: {
      Rng init = Rng(cfg.seed).Substream("init");
      model = net::MakeOpenSetModel(features, data.k, net::HeadLayout::kClosed, init);
      train::TrainClosed(*model, data.inlier_x, data.inlier_y, cfg, &log);
      break;
    }
    case TrainMode::kFinetuneReal: {
      if (!req.init) throw ConfigError("finetune-real needs --init <checkpoint>");
      const net::OpenSetModel pretrained = net::LoadModel(*req.init);
      resolved.erase("features");
      model = train::FinetuneReal(pretrained, data, cfg, &log);
      break;
    }
    case TrainMode::kTwoStep: {
      train::TrainResult r = train::TwoStepTrain(data, cfg, features, flow_cfg);
      model = std::move(r.model);
      flow = std::move(r.flow);
      log = std::move(r.log);
      break;
    }
    case TrainMode::kNaiveJoint: {
      train::TrainResult r = train::NaiveJointTrain(data, cfg, features, flow_cfg);
      model = std::move(r.model);
      flow = std::move(r.flow);
      log = std::move(r.log);
      break;
    }
    case TrainMode::kDense:
      break;
  }
  summary["val_accuracy"] = train::BatchAccuracy(model->Logits(bundle.val.x),
                                                 bundle.val.y, data.k);
  summary["layout"] = net::HeadLayoutName(model->head.layout());
  if (flow) summary["flow_summary"] = SummarizeFlow(*model, *flow, cfg.seed);

  fs::create_directories(req.out);
  net::SaveModel(req.out / "model", *model);
  if (flow) flow::SaveFlow(req.out / "flow", *flow);
  WriteTextFile(req.out / "log.csv", log.Csv());
  WriteJsonFile(req.out / "config.json", resolved);
  return summary;
}

Json TrainDenseMode(const TrainRequest& req) {
  const seg::DenseTrainConfig cfg = seg::DenseTrainConfigFromJson(req.config);
  const synth::DenseBundle bundle = synth::LoadDenseBundle(req.data);
  seg::DenseTrainResult r = seg::TrainDense(bundle, cfg);
  const seg::DenseEvaluation e = seg::EvaluateDense(r.model, bundle.test);
  Json summary;
  summary["mode"] = TrainModeName(req.mode);
  summary["seed"] = cfg.seed;
  summary["layout"] = net::HeadLayoutName(r.model.head.layout());
  summary["test_pixel_accuracy"] = e.pixel_accuracy;
  summary["test_miou"] = e.miou;
  fs::create_directories(req.out);
  seg::SaveDenseModel(req.out / "model", r.model);
  WriteTextFile(req.out / "log.csv", r.log.Csv());
  WriteJsonFile(req.out / "config.json", seg::ToJson(cfg));
  return summary;
}

EvalResult EvaluateImageWide(const fs::path& model_dir, const fs::path& data_dir,
                             score::ScoreKind kind) {
  const net::OpenSetModel model = net::LoadModel(model_dir);
  const synth::DatasetBundle bundle = synth::LoadBundle(data_dir);
  const bool closed = !model.head.has_negative();
  if (closed && kind != score::ScoreKind::kUnc) {
    throw ConfigError("a closed K-way model only supports --score unc");
  }
  auto scores_of = [&](const Tensor& x) {
    return closed ? ClosedScores(model, x) : score::ScoreInputs(model, x);
  };
  const std::size_t k = model.head.num_inlier();
  const double accuracy =
      train::BatchAccuracy(model.Logits(bundle.test.x), bundle.test.y, k);
  const std::vector<score::ScoreTriple> inlier = scores_of(bundle.test.x);
  const std::vector<double> neg = score::Column(inlier, kind);

  std::vector<std::pair<std::string, std::vector<score::ScoreTriple>>> sets;
  std::vector<score::ScoreTriple> all;
  for (const auto& [name, x] : bundle.outliers) {
    sets.emplace_back(name, scores_of(x));
    all.insert(all.end(), sets.back().second.begin(), sets.back().second.end());
  }
  sets.emplace_back("union", std::move(all));

  EvalResult result;
  Json& report = result.report;
  report["kind"] = "image-wide";
  report["score"] = score::ScoreKindName(kind);
  report["num_inlier"] = k;
  report["num_classes"] = model.head.num_classes();
  report["layout"] = net::HeadLayoutName(model.head.layout());
  report["n_inlier"] = neg.size();
  report["sets"] = Json::object();
  for (const auto& [name, triples] : sets) {
    const std::vector<double> pos = score::Column(triples, kind);
    metrics::MetricReport m = metrics::Evaluate(metrics::MakeScoredSet(pos, neg));
    m.accuracy = accuracy;
    if (!closed) {
      m.pearson = SafePearson(score::Column(triples, score::ScoreKind::kUnc),
                              score::Column(triples, score::ScoreKind::kNo));
    }
    report["sets"][name] = metrics::ToJson(m);
    result.curves.emplace_back(name, MakeCurves(pos, neg, kind));
  }
  const Tensor cos = net::ClassVectorCosines(model.head);
  report["cosines"] = TensorToJson(cos);
  report["max_offdiag_cosine"] = net::MaxOffDiagonalCosine(cos);
  return result;
}

EvalResult EvaluateDenseModel(const fs::path& model_dir, const fs::path& data_dir,
                              score::ScoreKind kind) {
  const seg::DenseModel model = seg::LoadDenseModel(model_dir);
  const synth::DenseBundle bundle = synth::LoadDenseBundle(data_dir);
  const std::size_t k = model.num_inlier();
  std::vector<int> pred_all, gt_all;
  std::vector<double> pos, neg, pos_unc, pos_no;
  for (const synth::DenseScene& scene : bundle.test) {
    const std::vector<int> seg_map = seg::SemanticSegment(seg::PredictMasks(model, scene));
    pred_all.insert(pred_all.end(), seg_map.begin(), seg_map.end());
    gt_all.insert(gt_all.end(), scene.labels.begin(), scene.labels.end());
    const score::DenseScoreMaps maps = seg::DenseScores(model, scene);
    const Tensor& chosen = kind == score::ScoreKind::kUno   ? maps.s_uno
                           : kind == score::ScoreKind::kUnc ? maps.s_unc
                                                            : maps.s_no;
    for (std::size_t p = 0; p < scene.num_pixels(); ++p) {
      const int y = scene.labels[p];
      if (y == metrics::kVoidLabel) continue;
      if (y == static_cast<int>(k) + 1) {
        pos.push_back(chosen.data()[p]);
        pos_unc.push_back(maps.s_unc.data()[p]);
        pos_no.push_back(maps.s_no.data()[p]);
      } else {
        neg.push_back(chosen.data()[p]);
      }
    }
  }
  metrics::MetricReport m = metrics::Evaluate(metrics::MakeScoredSet(pos, neg));
  m.accuracy = metrics::InlierAccuracy(pred_all, gt_all, static_cast<int>(k));
  m.miou = metrics::MeanIou(pred_all, gt_all, static_cast<int>(k));
  m.pearson = SafePearson(pos_unc, pos_no);

  EvalResult result;
  Json& report = result.report;
  report["kind"] = "dense";
  report["score"] = score::ScoreKindName(kind);
  report["num_inlier"] = k;
  report["num_classes"] = model.head.num_classes();
  report["layout"] = net::HeadLayoutName(model.head.layout());
  report["n_inlier"] = neg.size();
  report["sets"] = Json::object();
  report["sets"]["test"] = metrics::ToJson(m);
  const Tensor cos = net::ClassVectorCosines(model.head);
  report["cosines"] = TensorToJson(cos);
  report["max_offdiag_cosine"] = net::MaxOffDiagonalCosine(cos);
  result.curves.emplace_back("test", MakeCurves(pos, neg, kind));
  return result;
}

}  // namespace

Json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
  return j;
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void WriteJsonFile(const fs::path& path, const Json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

Json ApplyOverrides(Json config, const std::vector<std::string>& assignments) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + a + "' is not of the form key=value");
    }
    const std::string key = a.substr(0, eq);
    Json* node = &config;
    std::size_t begin = 0;
    while (true) {
      const auto dot = key.find('.', begin);
      const std::string part = key.substr(begin, dot - begin);
      if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
      if (dot == std::string::npos) {
        (*node)[part] = ParseValue(a.substr(eq + 1));
        break;
      }
      Json& child = (*node)[part];
      if (child.is_null()) child = Json::object();
      if (!child.is_object()) {
        throw ConfigError("override key '" + key + "' descends into a non-object");
      }
      node = &child;
      begin = dot + 1;
    }
  }
  return config;
}

void RequireSeed(const Json& config) {
  if (!config.is_object() || !config.contains("seed")) {
    throw ConfigError("config key 'seed' is required");
  }
  const Json& s = config["seed"];
  if (!s.is_number_integer() || s.get<long long>() < 0) {
    throw ConfigError("config key 'seed' must be a non-negative integer");
  }
}

GenDataResult GenData(const Json& spec, const fs::path& out) {
  if (!spec.is_object()) throw ConfigError("spec must be a JSON object");
  RequireSeed(spec);
  std::string kind = "image-wide";
  Json fields = spec;
  if (fields.contains("kind")) {
    if (!fields["kind"].is_string()) throw ConfigError("spec key 'kind' must be a string");
    kind = fields["kind"].get<std::string>();
    fields.erase("kind");
  }
  GenDataResult r;
  r.kind = kind;
  r.summary["kind"] = kind;
  if (kind == "image-wide") {
    const synth::DatasetBundle b = synth::MakeImageWide(synth::SynthSpecFromJson(fields));
    synth::SaveBundle(out, b);
    r.summary["seed"] = b.spec.seed;
    r.summary["k"] = b.spec.k;
    r.summary["train"] = b.train.y.size();
    r.summary["val"] = b.val.y.size();
    r.summary["test"] = b.test.y.size();
    r.summary["negatives"] = b.negatives.y.size();
    for (const auto& [name, x] : b.outliers) r.summary[name] = x.dim(0);
  } else if (kind == "dense") {
    const synth::DenseBundle b = synth::MakeDenseBundle(synth::DenseSpecFromJson(fields));
    synth::SaveDenseBundle(out, b);
    r.summary["seed"] = b.spec.seed;
    r.summary["k"] = b.spec.k;
    r.summary["train_scenes"] = b.train.size();
    r.summary["test_scenes"] = b.test.size();
    r.summary["seen_pool"] = b.seen_pool.dim(0);
  } else {
    throw ConfigError("unknown bundle kind '" + kind + "' (image-wide or dense)");
  }
  return r;
}

std::string_view TrainModeName(TrainMode m) {
  switch (m) {
    case TrainMode::kClosed: return "closed";
    case TrainMode::kFinetuneReal: return "finetune-real";
    case TrainMode::kTwoStep: return "two-step";
    case TrainMode::kNaiveJoint: return "naive-joint";
    case TrainMode::kDense: return "dense";
  }
  return "closed";
}

TrainMode ParseTrainMode(std::string_view name) {
  for (TrainMode m : {TrainMode::kClosed, TrainMode::kFinetuneReal, TrainMode::kTwoStep,
                      TrainMode::kNaiveJoint, TrainMode::kDense}) {
    if (TrainModeName(m) == name) return m;
  }
  throw ConfigError("unknown train mode '" + std::string(name) + "'");
}

net::FeatureConfig FeatureConfigFromJson(const Json& j, std::size_t in_dim) {
  net::FeatureConfig c;
  c.in_dim = in_dim;
  for (const auto& [key, v] : j.items()) {
    const std::string name = "features." + key;
    if (key == "hidden") {
      if (!v.is_array()) throw ConfigError("config key '" + name + "' must be an array");
      c.hidden.clear();
      for (const Json& w : v) c.hidden.push_back(ReadSize(w, name));
    } else if (key == "feature_dim") {
      c.feature_dim = ReadSize(v, name);
    } else if (key == "hidden_activation" || key == "output_activation") {
      if (!v.is_string()) throw ConfigError("config key '" + name + "' must be a string");
      const nn::Activation a = nn::ParseActivation(v.get<std::string>());
      (key == "hidden_activation" ? c.hidden_activation : c.output_activation) = a;
    } else {
      throw ConfigError("unknown config key '" + name + "'");
    }
  }
  if (c.feature_dim == 0) throw ConfigError("features.feature_dim must be positive");
  for (std::size_t w : c.hidden) {
    if (w == 0) throw ConfigError("features.hidden widths must be positive");
  }
  return c;
}

flow::FlowConfig FlowConfigFromJson(const Json& j, std::size_t dim) {
  flow::FlowConfig c;
  c.dim = dim;
  for (const auto& [key, v] : j.items()) {
    const std::string name = "flow." + key;
    if (key == "num_layers") {
      c.num_layers = ReadSize(v, name);
    } else if (key == "hidden") {
      c.hidden = ReadSize(v, name);
    } else if (key == "scale_clamp") {
      if (!v.is_number()) throw ConfigError("config key '" + name + "' must be a number");
      c.scale_clamp = v.get<double>();
    } else {
      throw ConfigError("unknown config key '" + name + "'");
    }
  }
  if (c.num_layers == 0 || c.hidden == 0 || !(c.scale_clamp > 0)) {
    throw ConfigError("flow layers, width and scale_clamp must be positive");
  }
  return c;
}

Json ToJson(const net::FeatureConfig& c) {
  Json j;
  j["hidden"] = c.hidden;
  j["feature_dim"] = c.feature_dim;
  j["hidden_activation"] = nn::ActivationName(c.hidden_activation);
  j["output_activation"] = nn::ActivationName(c.output_activation);
  return j;
}

Json ToJson(const flow::FlowConfig& c) {
  Json j;
  j["num_layers"] = c.num_layers;
  j["hidden"] = c.hidden;
  j["scale_clamp"] = c.scale_clamp;
  return j;
}

Json Train(const TrainRequest& req) {
  RequireSeed(req.config);
  const std::string kind = synth::BundleKind(req.data);
  const bool dense = req.mode == TrainMode::kDense;
  if (dense != (kind == "dense")) {
    throw ConfigError("train " + std::string(TrainModeName(req.mode)) + " needs " +
                      (dense ? "a dense" : "an image-wide") + " bundle, got " + kind);
  }
  if (req.init && req.mode != TrainMode::kFinetuneReal) {
    throw ConfigError("--init is only used by finetune-real");
  }
  Json summary = dense ? TrainDenseMode(req) : TrainImageWide(req);
  WriteJsonFile(req.out / "summary.json", summary);
  return summary;
}

std::string CheckpointFormat(const fs::path& dir) {
  const Json manifest = ReadJsonFile(dir / "manifest.json");
  return RequireString(manifest, "format");
}

EvalResult Evaluate(const fs::path& model_dir, const fs::path& data_dir,
                    score::ScoreKind kind) {
  const std::string format = CheckpointFormat(model_dir);
  const std::string bundle = synth::BundleKind(data_dir);
  if (format == "uno.model" && bundle == "image-wide") {
    return EvaluateImageWide(model_dir, data_dir, kind);
  }
  if (format == "uno.dense_model" && bundle == "dense") {
    return EvaluateDenseModel(model_dir, data_dir, kind);
  }
  throw ConfigError("checkpoint format '" + format + "' does not match a " + bundle +
                    " bundle");
}

std::string ScoreHistogramCsv(std::span<const double> inliers,
                              std::span<const double> outliers,
                              score::ScoreKind kind, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  const auto [lo, hi] = ScoreRange(kind);
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> in_count(bins, 0), out_count(bins, 0);
  auto bin_of = [&](double s) {
    const double t = std::floor((s - lo) / width);
    return static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(bins - 1)));
  };
  for (double s : inliers) ++in_count[bin_of(s)];
  for (double s : outliers) ++out_count[bin_of(s)];
  std::string csv = "bin_lo,bin_hi,inlier,outlier\n";
  for (std::size_t b = 0; b < bins; ++b) {
    csv += FormatDouble(lo + width * static_cast<double>(b)) + "," +
           FormatDouble(lo + width * static_cast<double>(b + 1)) + "," +
           std::to_string(in_count[b]) + "," + std::to_string(out_count[b]) + "\n";
  }
  return csv;
}

void WriteEvalResult(const EvalResult& result, const fs::path& json_path) {
  WriteJsonFile(json_path, result.report);
  const fs::path dir = json_path.has_parent_path() ? json_path.parent_path() : fs::path(".");
  const std::string stem = json_path.stem().string();
  for (const auto& [name, curves] : result.curves) {
    WriteTextFile(dir / (stem + "." + name + ".roc.csv"), curves.roc_csv);
    WriteTextFile(dir / (stem + "." + name + ".pr.csv"), curves.pr_csv);
    WriteTextFile(dir / (stem + "." + name + ".hist.csv"), curves.hist_csv);
  }
}

DiagnoseResult Diagnose(const fs::path& model_dir, const fs::path& data_dir) {
  if (CheckpointFormat(model_dir) != "uno.model") {
    throw ConfigError("diagnose needs an image-wide model checkpoint");
  }
  const net::OpenSetModel model = net::LoadModel(model_dir);
  if (!model.head.has_negative()) {
    throw ConfigError("diagnose needs a model with a negative class");
  }
  const synth::DatasetBundle bundle = synth::LoadBundle(data_dir);
  const int negative = static_cast<int>(model.head.num_inlier()) + 1;

  DiagnoseResult r;
  struct TagStats {
    std::size_t count = 0;
    double norm_sum = 0.0;
  };
  std::vector<std::pair<std::string, TagStats>> stats;
  auto add = [&](const Tensor& x, const std::vector<int>* labels, const std::string& tag) {
    const Tensor z = model.Features(x);
    const std::vector<score::GeometryDiag> geo = score::Geometry(z, model.head);
    const std::vector<score::ScoreTriple> s = score::ScoreFeatures(z, model.head);
    TagStats t;
    for (std::size_t i = 0; i < geo.size(); ++i) {
      r.rows.push_back({geo[i].feature_norm, geo[i].angle_to_negative, s[i],
                        labels ? (*labels)[i] : negative, tag});
      t.norm_sum += geo[i].feature_norm;
    }
    t.count = geo.size();
    stats.emplace_back(tag, t);
  };
  add(bundle.test.x, &bundle.test.y, "inlier");
  for (const auto& [name, x] : bundle.outliers) add(x, nullptr, name);

  r.cosines = net::ClassVectorCosines(model.head);
  r.summary["rows"] = r.rows.size();
  r.summary["tags"] = Json::object();
  for (const auto& [tag, t] : stats) {
    Json s;
    s["count"] = t.count;
    s["mean_norm"] = t.count ? t.norm_sum / static_cast<double>(t.count) : 0.0;
    r.summary["tags"][tag] = s;
  }
  r.summary["max_offdiag_cosine"] = net::MaxOffDiagonalCosine(r.cosines);
  return r;
}

std::string DiagnoseCsv(const std::vector<DiagnoseRow>& rows) {
  std::string csv = "norm,angle,s_no,s_unc,s_uno,label,tag\n";
  for (const DiagnoseRow& r : rows) {
    csv += FormatDouble(r.norm) + "," + FormatDouble(r.angle) + "," +
           FormatDouble(r.scores.s_no) + "," + FormatDouble(r.scores.s_unc) + "," +
           FormatDouble(r.scores.s_uno) + "," + std::to_string(r.label) + "," + r.tag +
           "\n";
  }
  return csv;
}

std::string MatrixCsv(const Tensor& m) {
  std::string csv;
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    for (std::size_t c = 0; c < m.dim(1); ++c) {
      if (c) csv += ",";
      csv += FormatDouble(m.at(r, c));
    }
    csv += "\n";
  }
  return csv;
}

void WriteDiagnoseResult(const DiagnoseResult& result, const fs::path& out) {
  fs::create_directories(out);
  WriteTextFile(out / "samples.csv", DiagnoseCsv(result.rows));
  WriteTextFile(out / "cosines.csv", MatrixCsv(result.cosines));
  WriteJsonFile(out / "summary.json", result.summary);
}

}  // namespace uno::app
