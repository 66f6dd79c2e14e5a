// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// uno: data generation, training, evaluation and diagnostics.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uno/app.h"
#include "uno/errors.h"

namespace {

namespace fs = std::filesystem;
using uno::Json;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

Json LoadConfig(const std::string& path, const std::vector<std::string>& sets) {
  Json config = path.empty() ? Json::object() : uno::app::ReadJsonFile(path);
  return uno::app::ApplyOverrides(std::move(config), sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UNO toolkit: open-set recognition with uncertainty and negative objectness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "uno 0.1.0");

  std::string spec_path, out_path, data_dir, config_path, init_path, model_dir, score_name;
  std::string mode_name;
  std::vector<std::string> sets;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset bundle");
  gen->add_option("--spec", spec_path, "Generator spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output bundle directory")->required();
  gen->add_option("--set", sets, "Override a spec key (key=value), repeatable");

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("mode", mode_name, "closed | finetune-real | two-step | naive-joint | dense")
      ->required()
      ->check(CLI::IsMember({"closed", "finetune-real", "two-step", "naive-joint", "dense"}));
  train->add_option("--data", data_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", config_path, "Training config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Output run directory")->required();
  train->add_option("--init", init_path, "Pretrained checkpoint (finetune-real)")
      ->check(CLI::ExistingDirectory);
  train->add_option("--set", sets, "Override a config key (key=value), repeatable");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate outlier scores");
  eval->add_option("--model", model_dir, "Model checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--data", data_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--score", score_name, "uno | unc | no")
      ->required()
      ->check(CLI::IsMember({"uno", "unc", "no"}));
  eval->add_option("--out", out_path, "Report JSON path")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "Export per-sample geometry and scores");
  diag->add_option("--model", model_dir, "Model checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  diag->add_option("--data", data_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  diag->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*gen) {
      const Json spec = uno::app::ApplyOverrides(uno::app::ReadJsonFile(spec_path), sets);
      const uno::app::GenDataResult r = uno::app::GenData(spec, out_path);
      std::cout << r.summary.dump(2) << "\n";
    } else if (*train) {
      uno::app::TrainRequest req;
      req.mode = uno::app::ParseTrainMode(mode_name);
      req.data = data_dir;
      req.config = LoadConfig(config_path, sets);
      req.out = out_path;
      if (!init_path.empty()) req.init = fs::path(init_path);
      const Json summary = uno::app::Train(req);
      std::cout << summary.dump(2) << "\n";
    } else if (*eval) {
      const uno::score::ScoreKind kind = uno::score::ParseScoreKind(score_name);
      const uno::app::EvalResult r = uno::app::Evaluate(model_dir, data_dir, kind);
      uno::app::WriteEvalResult(r, out_path);
      std::cout << r.report["sets"].dump(2) << "\n";
    } else if (*diag) {
      const uno::app::DiagnoseResult r = uno::app::Diagnose(model_dir, data_dir);
      uno::app::WriteDiagnoseResult(r, out_path);
      std::cout << r.summary.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "uno: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return 0;
}
