// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/checkpoint.h"

#include <cmath>

#include "uno/errors.h"
#include "uno/tensor_io.h"

namespace uno {
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.json";

bool SafeFileName(const std::string& name) {
  if (name.empty() || name.front() == '.') return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

void SaveArchive(const fs::path& dir, const TensorArchive& archive) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Json manifest = Json::object();
  manifest["format"] = archive.format;
  manifest["version"] = kManifestVersion;
  for (const auto& [k, v] : archive.meta.items()) manifest[k] = v;
  Json files = Json::object();
  for (const auto& [name, tensor] : archive.tensors) {
    if (!SafeFileName(name)) {
      throw IoError("tensor name '" + name + "' is not a safe file name");
    }
    const std::string file = name + ".unot";
    SaveTensor(dir / file, tensor);
    files[name] = file;
  }
  manifest["tensors"] = files;
  WriteFileBytes(dir / kManifestName, manifest.dump(2) + "\n");
}

TensorArchive LoadArchive(const fs::path& dir,
                          const std::string& expected_format) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) {
    throw MalformedManifestError("no manifest.json in " + dir.string());
  }
  Json manifest;
  try {
    manifest = Json::parse(ReadFileBytes(path));
  } catch (const Json::parse_error& e) {
    throw MalformedManifestError(path.string() + ": " + e.what());
  }
  if (!manifest.is_object()) {
    throw MalformedManifestError(path.string() + ": not a JSON object");
  }
  TensorArchive archive;
  archive.format = RequireString(manifest, "format");
  if (!expected_format.empty() && archive.format != expected_format) {
    throw MalformedManifestError("expected format '" + expected_format +
                                 "', found '" + archive.format + "'");
  }
  const Json& version = RequireKey(manifest, "version");
  if (!version.is_number_integer()) {
    throw MalformedManifestError("manifest key 'version' must be an integer");
  }
  if (version.get<int>() != kManifestVersion) {
    throw VersionUnsupportedError("manifest version " +
                                  std::to_string(version.get<int>()) +
                                  " is not supported");
  }
  const Json& files = RequireKey(manifest, "tensors");
  if (!files.is_object()) {
    throw MalformedManifestError("manifest key 'tensors' must be an object");
  }
  for (const auto& [name, file] : files.items()) {
    if (!file.is_string() || !SafeFileName(file.get<std::string>())) {
      throw MalformedManifestError("bad file entry for tensor '" + name + "'");
    }
    const fs::path tpath = dir / file.get<std::string>();
    if (!fs::exists(tpath)) {
      throw MalformedManifestError("tensor file missing: " + tpath.string());
    }
    archive.tensors.emplace(name, LoadTensor(tpath));
  }
  for (const auto& [k, v] : manifest.items()) {
    if (k != "format" && k != "version" && k != "tensors") archive.meta[k] = v;
  }
  return archive;
}

const Json& RequireKey(const Json& obj, const std::string& key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw MalformedManifestError("manifest is missing key '" + key + "'");
  }
  return obj.at(key);
}

std::size_t RequireSize(const Json& obj, const std::string& key) {
  const Json& v = RequireKey(obj, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw MalformedManifestError("manifest key '" + key +
                                 "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double RequireDouble(const Json& obj, const std::string& key) {
  const Json& v = RequireKey(obj, key);
  if (!v.is_number()) {
    throw MalformedManifestError("manifest key '" + key + "' must be a number");
  }
  return v.get<double>();
}

std::string RequireString(const Json& obj, const std::string& key) {
  const Json& v = RequireKey(obj, key);
  if (!v.is_string()) {
    throw MalformedManifestError("manifest key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

const Tensor& RequireTensor(const TensorArchive& archive,
                            const std::string& name) {
  auto it = archive.tensors.find(name);
  if (it == archive.tensors.end()) {
    throw MalformedManifestError("archive has no tensor '" + name + "'");
  }
  return it->second;
}

void StoreParameters(TensorArchive& archive,
                     const std::vector<const grad::Parameter*>& params) {
  for (const grad::Parameter* p : params) {
    if (!archive.tensors.emplace(p->name(), p->value()).second) {
      throw IoError("duplicate parameter name '" + p->name() + "'");
    }
  }
}

void RestoreParameters(const TensorArchive& archive,
                       const std::vector<grad::Parameter*>& params) {
  for (grad::Parameter* p : params) {
    const Tensor& t = RequireTensor(archive, p->name());
    if (t.shape() != p->value().shape()) {
      throw MalformedManifestError(
          "parameter '" + p->name() + "' has shape " +
          ShapeToString(t.shape()) + ", expected " +
          ShapeToString(p->value().shape()));
    }
    p->value() = t;
  }
}

Tensor LabelsToTensor(const std::vector<int>& labels) {
  Tensor t(Shape{labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels[i];
  return t;
}

std::vector<int> TensorToLabels(const Tensor& t) {
  if (t.rank() != 1) {
    throw MalformedManifestError("label tensor must be rank 1, got " +
                                 ShapeToString(t.shape()));
  }
  std::vector<int> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (!(std::isfinite(v) && v == std::floor(v))) {
      throw MalformedManifestError("label tensor holds a non-integer value");
    }
    out[i] = static_cast<int>(v);
  }
  return out;
}

}  // namespace uno
