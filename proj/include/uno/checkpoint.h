// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// On-disk layout shared by model checkpoints, flow checkpoints, datasets and
// scenes: a directory with manifest.json and one UNOT file per tensor.
//
//   <dir>/manifest.json   {"format": "...", "version": 1, ..., "tensors": {name: file}}
//   <dir>/<file>.unot

#ifndef UNO_CHECKPOINT_H_
#define UNO_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "uno/autodiff.h"
#include "uno/tensor.h"

namespace uno {

using Json = nlohmann::ordered_json;

inline constexpr int kManifestVersion = 1;

struct TensorArchive {
  std::string format;  // e.g. "uno.model", "uno.flow", "uno.bundle"
  Json meta = Json::object();
  std::map<std::string, Tensor> tensors;
};

void SaveArchive(const std::filesystem::path& dir, const TensorArchive& archive);

// Throws MalformedManifestError on a missing/invalid manifest or a format
// other than `expected_format` (if non-empty), and propagates the UNOT
// reader's errors for the tensor files.
TensorArchive LoadArchive(const std::filesystem::path& dir,
                          const std::string& expected_format = "");

// Accessor helpers that turn missing or mistyped manifest keys into
// MalformedManifestError naming the key.
const Json& RequireKey(const Json& obj, const std::string& key);
std::size_t RequireSize(const Json& obj, const std::string& key);
double RequireDouble(const Json& obj, const std::string& key);
std::string RequireString(const Json& obj, const std::string& key);
const Tensor& RequireTensor(const TensorArchive& archive,
                            const std::string& name);

// Stores each parameter under its name; loading checks names and shapes.
void StoreParameters(TensorArchive& archive,
                     const std::vector<const grad::Parameter*>& params);
void RestoreParameters(const TensorArchive& archive,
                       const std::vector<grad::Parameter*>& params);

// Labels travel as f64 UNOT vectors.
Tensor LabelsToTensor(const std::vector<int>& labels);
std::vector<int> TensorToLabels(const Tensor& t);

}  // namespace uno

#endif  // UNO_CHECKPOINT_H_
