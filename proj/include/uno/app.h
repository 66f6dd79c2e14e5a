// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the uno command-line tool. Every command is
// a plain library call so that tests can compare CLI output with direct
// results. Commands never print; they return what the CLI writes.

#ifndef UNO_APP_H_
#define UNO_APP_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uno/checkpoint.h"
#include "uno/mask_seg.h"
#include "uno/model.h"
#include "uno/score.h"
#include "uno/synth.h"
#include "uno/trainers.h"

namespace uno::app {

namespace fs = std::filesystem;

// Reads a JSON file; throws IoError or ConfigError with the path.
Json ReadJsonFile(const fs::path& path);
// Writes `j` with two-space indentation and a trailing newline.
void WriteJsonFile(const fs::path& path, const Json& j);
void WriteTextFile(const fs::path& path, const std::string& text);

// Applies "key=value" overrides. Dotted keys address nested objects
// ("features.feature_dim=8"). The value is parsed as JSON when possible and
// kept as a string otherwise.
Json ApplyOverrides(Json config, const std::vector<std::string>& assignments);

// Throws ConfigError unless `config` has an integer "seed".
void RequireSeed(const Json& config);

// ------------------------------------------------------------- gen-data --

// `spec` may carry "kind": "image-wide" (default) or "dense"; the remaining
// keys are the generator spec for that kind.
struct GenDataResult {
  std::string kind;
  Json summary;  // kind, seed and split sizes
};
GenDataResult GenData(const Json& spec, const fs::path& out);

// ---------------------------------------------------------------- train --

enum class TrainMode { kClosed, kFinetuneReal, kTwoStep, kNaiveJoint, kDense };
std::string_view TrainModeName(TrainMode m);
TrainMode ParseTrainMode(std::string_view name);

// Image-wide configs hold TrainConfig keys plus optional "features" and
// "flow" objects; dense configs hold DenseTrainConfig keys.
net::FeatureConfig FeatureConfigFromJson(const Json& j, std::size_t in_dim);
flow::FlowConfig FlowConfigFromJson(const Json& j, std::size_t dim);
Json ToJson(const net::FeatureConfig& c);
Json ToJson(const flow::FlowConfig& c);

struct TrainRequest {
  TrainMode mode = TrainMode::kClosed;
  fs::path data;
  Json config = Json::object();
  fs::path out;
  std::optional<fs::path> init;  // required by finetune-real
};

// Writes <out>/model, <out>/log.csv and <out>/config.json (the resolved
// config), plus <out>/flow for the flow-based modes. Returns the summary
// that is also written to <out>/summary.json.
Json Train(const TrainRequest& request);

// ----------------------------------------------------------------- eval --

// "uno.model" or "uno.dense_model".
std::string CheckpointFormat(const fs::path& dir);

struct Curves {
  std::string roc_csv;
  std::string pr_csv;
  std::string hist_csv;  // bin_lo,bin_hi,inlier,outlier
};

struct EvalResult {
  Json report;
  std::vector<std::pair<std::string, Curves>> curves;  // one per outlier set
};

// Image-wide: negatives are the test inliers, outlier sets are "near",
// "far" and their "union". Dense: one "test" set over non-void pixels of
// the test scenes. A closed K-way model only supports the unc score.
EvalResult Evaluate(const fs::path& model_dir, const fs::path& data_dir,
                    score::ScoreKind kind);

// Histogram of inlier and outlier scores over `bins` equal bins spanning
// the score's range.
std::string ScoreHistogramCsv(std::span<const double> inliers,
                              std::span<const double> outliers,
                              score::ScoreKind kind, std::size_t bins = 20);

// Writes the report to `json_path` and each set's curves next to it as
// <stem>.<set>.{roc,pr,hist}.csv.
void WriteEvalResult(const EvalResult& result, const fs::path& json_path);

// ------------------------------------------------------------- diagnose --

struct DiagnoseRow {
  double norm = 0.0;
  double angle = 0.0;
  score::ScoreTriple scores;
  int label = 0;  // 1..K for inliers, K+1 for outliers
  std::string tag;
};

struct DiagnoseResult {
  std::vector<DiagnoseRow> rows;
  Tensor cosines;  // C x C
  Json summary;    // per-tag count and mean norm, max off-diagonal cosine
};

// Rows for the test inliers (tag "inlier") followed by every outlier set.
// The model needs a negative class.
DiagnoseResult Diagnose(const fs::path& model_dir, const fs::path& data_dir);

// norm,angle,s_no,s_unc,s_uno,label,tag
std::string DiagnoseCsv(const std::vector<DiagnoseRow>& rows);
std::string MatrixCsv(const Tensor& m);

// Writes samples.csv, cosines.csv and summary.json under `out`.
void WriteDiagnoseResult(const DiagnoseResult& result, const fs::path& out);

}  // namespace uno::app

#endif  // UNO_APP_H_
