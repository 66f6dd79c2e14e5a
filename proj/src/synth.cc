// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/synth.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "uno/errors.h"

namespace uno::synth {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Field tables drive the JSON mapping of the numeric spec keys.
template <typename Spec>
struct Fields {
  std::vector<std::pair<const char*, double Spec::*>> reals;
  std::vector<std::pair<const char*, std::size_t Spec::*>> counts;
};

const Fields<SynthSpec>& SynthFields() {
  static const Fields<SynthSpec> f{
      {{"radius", &SynthSpec::radius},
       {"sigma", &SynthSpec::sigma},
       {"first_angle_deg", &SynthSpec::first_angle_deg},
       {"ring_inner", &SynthSpec::ring_inner},
       {"ring_outer", &SynthSpec::ring_outer},
       {"ring_arc_begin_deg", &SynthSpec::ring_arc_begin_deg},
       {"ring_arc_end_deg", &SynthSpec::ring_arc_end_deg},
       {"box_half_width", &SynthSpec::box_half_width},
       {"near_jitter_deg", &SynthSpec::near_jitter_deg},
       {"near_radius_sd", &SynthSpec::near_radius_sd},
       {"far_inner", &SynthSpec::far_inner},
       {"far_outer", &SynthSpec::far_outer},
       {"far_covered_begin_deg", &SynthSpec::far_covered_begin_deg},
       {"far_covered_end_deg", &SynthSpec::far_covered_end_deg},
       {"far_uncovered_center_deg", &SynthSpec::far_uncovered_center_deg},
       {"far_uncovered_half_width_deg", &SynthSpec::far_uncovered_half_width_deg}},
      {{"k", &SynthSpec::k},
       {"n_train", &SynthSpec::n_train},
       {"n_val", &SynthSpec::n_val},
       {"n_test", &SynthSpec::n_test},
       {"n_negatives", &SynthSpec::n_negatives},
       {"n_near", &SynthSpec::n_near},
       {"n_far", &SynthSpec::n_far}}};
  return f;
}

const Fields<DenseSpec>& DenseFields() {
  static const Fields<DenseSpec> f{
      {{"class_scale", &DenseSpec::class_scale},
       {"pixel_sigma", &DenseSpec::pixel_sigma},
       {"negative_scale", &DenseSpec::negative_scale},
       {"unseen_scale", &DenseSpec::unseen_scale},
       {"max_class_cosine", &DenseSpec::max_class_cosine},
       {"patch_sigma", &DenseSpec::patch_sigma}},
      {{"k", &DenseSpec::k},
       {"height", &DenseSpec::height},
       {"width", &DenseSpec::width},
       {"feature_dim", &DenseSpec::feature_dim},
       {"min_patches", &DenseSpec::min_patches},
       {"max_patches", &DenseSpec::max_patches},
       {"min_patch_side", &DenseSpec::min_patch_side},
       {"max_patch_side", &DenseSpec::max_patch_side},
       {"n_train_scenes", &DenseSpec::n_train_scenes},
       {"n_test_scenes", &DenseSpec::n_test_scenes},
       {"pool_size", &DenseSpec::pool_size}}};
  return f;
}

template <typename Spec>
Json FieldsToJson(const Spec& spec, const Fields<Spec>& f) {
  Json j = Json::object();
  j["seed"] = spec.seed;
  for (const auto& [name, ptr] : f.counts) j[name] = spec.*ptr;
  for (const auto& [name, ptr] : f.reals) j[name] = spec.*ptr;
  return j;
}

template <typename Spec>
void FieldsFromJson(const Json& j, const Fields<Spec>& f, Spec& spec,
                    const std::set<std::string>& extra) {
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw ConfigError("spec key 'seed' must be an integer");
      }
      spec.seed = value.template get<std::uint64_t>();
      continue;
    }
    bool known = extra.count(key) > 0;
    for (const auto& [name, ptr] : f.counts) {
      if (key == name) {
        if (!value.is_number_integer() || value.template get<long long>() < 0) {
          throw ConfigError("spec key '" + key + "' must be a non-negative integer");
        }
        spec.*ptr = value.template get<std::size_t>();
        known = true;
      }
    }
    for (const auto& [name, ptr] : f.reals) {
      if (key == name) {
        if (!value.is_number()) {
          throw ConfigError("spec key '" + key + "' must be a number");
        }
        spec.*ptr = value.template get<double>();
        known = true;
      }
    }
    if (!known) throw ConfigError("unknown spec key '" + key + "'");
  }
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid spec: " + what);
}

double WrapDeg(double a) {
  a = std::fmod(a, 360.0);
  return a < 0 ? a + 360.0 : a;
}

void Polar(Tensor& x, std::size_t row, double r, double angle_deg) {
  x.at(row, 0) = r * std::cos(angle_deg * kDeg);
  x.at(row, 1) = r * std::sin(angle_deg * kDeg);
}

}  // namespace

std::string_view NegativeSourceName(NegativeSource s) {
  return s == NegativeSource::kRingSegment ? "ring-segment" : "uniform-box";
}

NegativeSource ParseNegativeSource(std::string_view name) {
  if (name == "ring-segment") return NegativeSource::kRingSegment;
  if (name == "uniform-box") return NegativeSource::kUniformBox;
  throw ConfigError("unknown negative source '" + std::string(name) +
                    "' (expected ring-segment or uniform-box)");
}

void SynthSpec::Validate() const {
  Require(k >= 2, "k must be >= 2");
  Require(radius > 0 && sigma > 0, "radius and sigma must be positive");
  Require(n_train % k == 0, "n_train must be divisible by k");
  Require(n_val % k == 0, "n_val must be divisible by k");
  Require(n_test % k == 0, "n_test must be divisible by k");
  Require(n_train > 0, "n_train must be positive");
  Require(ring_inner > 0 && ring_outer > ring_inner,
          "ring radii must satisfy 0 < ring_inner < ring_outer");
  Require(ring_arc_end_deg > ring_arc_begin_deg, "ring arc must be non-empty");
  Require(box_half_width > ring_inner, "box_half_width must exceed ring_inner");
  Require(near_jitter_deg >= 0 && near_radius_sd >= 0,
          "near jitter must be non-negative");
  Require(far_inner > 0 && far_outer > far_inner,
          "far radii must satisfy 0 < far_inner < far_outer");
  Require(far_covered_end_deg > far_covered_begin_deg,
          "far covered arc must be non-empty");
  Require(far_uncovered_half_width_deg >= 0,
          "far_uncovered_half_width_deg must be non-negative");
}

std::vector<std::pair<double, double>> SynthSpec::Means() const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t c = 0; c < k; ++c) {
    const double a = (first_angle_deg + 360.0 * c / k) * kDeg;
    out.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return out;
}

Json ToJson(const SynthSpec& spec) {
  Json j = FieldsToJson(spec, SynthFields());
  j["negative_source"] = NegativeSourceName(spec.negative_source);
  return j;
}

SynthSpec SynthSpecFromJson(const Json& j) {
  SynthSpec spec;
  FieldsFromJson(j, SynthFields(), spec, {"negative_source", "kind"});
  if (j.contains("negative_source")) {
    if (!j["negative_source"].is_string()) {
      throw ConfigError("spec key 'negative_source' must be a string");
    }
    spec.negative_source =
        ParseNegativeSource(j["negative_source"].get<std::string>());
  }
  spec.Validate();
  return spec;
}

bool DatasetBundle::operator==(const DatasetBundle& o) const {
  return ToJson(spec) == ToJson(o.spec) && train == o.train && val == o.val &&
         test == o.test && negatives == o.negatives && outliers == o.outliers;
}

LabeledSet SampleInliers(const SynthSpec& spec, std::size_t n, Rng& rng) {
  const auto means = spec.Means();
  LabeledSet s{Tensor(Shape{n, 2}), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.k;
    s.x.at(i, 0) = means[c].first + spec.sigma * rng.Normal();
    s.x.at(i, 1) = means[c].second + spec.sigma * rng.Normal();
    s.y[i] = static_cast<int>(c) + 1;
  }
  return s;
}

Tensor SampleNegatives(const SynthSpec& spec, std::size_t n, Rng& rng) {
  Tensor x(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.negative_source == NegativeSource::kRingSegment) {
      const double a = rng.Uniform(spec.ring_arc_begin_deg, spec.ring_arc_end_deg);
      Polar(x, i, rng.Uniform(spec.ring_inner, spec.ring_outer), a);
    } else {
      double px, py;
      do {
        px = rng.Uniform(-spec.box_half_width, spec.box_half_width);
        py = rng.Uniform(-spec.box_half_width, spec.box_half_width);
      } while (std::hypot(px, py) < spec.ring_inner);
      x.at(i, 0) = px;
      x.at(i, 1) = py;
    }
  }
  return x;
}

Tensor SampleNearOutliers(const SynthSpec& spec, std::size_t n, Rng& rng) {
  Tensor x(Shape{n, 2});
  const double step = 360.0 / static_cast<double>(spec.k);
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = spec.first_angle_deg + step * (i % spec.k) + step / 2;
    const double a = gap + rng.Uniform(-spec.near_jitter_deg, spec.near_jitter_deg);
    Polar(x, i, spec.radius + spec.near_radius_sd * rng.Normal(), WrapDeg(a));
  }
  return x;
}

Tensor SampleFarOutliers(const SynthSpec& spec, std::size_t n, Rng& rng) {
  Tensor x(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    double a;
    if (i % 2 == 0) {
      a = rng.Uniform(spec.far_covered_begin_deg, spec.far_covered_end_deg);
    } else {
      a = spec.far_uncovered_center_deg +
          rng.Uniform(-spec.far_uncovered_half_width_deg,
                      spec.far_uncovered_half_width_deg);
    }
    Polar(x, i, rng.Uniform(spec.far_inner, spec.far_outer), WrapDeg(a));
  }
  return x;
}

DatasetBundle MakeImageWide(const SynthSpec& spec) {
  spec.Validate();
  const Rng root(spec.seed);
  DatasetBundle b;
  b.spec = spec;
  {
    Rng r = root.Substream("train");
    b.train = SampleInliers(spec, spec.n_train, r);
  }
  {
    Rng r = root.Substream("val");
    b.val = SampleInliers(spec, spec.n_val, r);
  }
  {
    Rng r = root.Substream("test");
    b.test = SampleInliers(spec, spec.n_test, r);
  }
  {
    Rng r = root.Substream("negatives");
    b.negatives.x = SampleNegatives(spec, spec.n_negatives, r);
    b.negatives.y.assign(spec.n_negatives, static_cast<int>(spec.k) + 1);
  }
  {
    Rng r = root.Substream("near");
    b.outliers["near"] = SampleNearOutliers(spec, spec.n_near, r);
  }
  {
    Rng r = root.Substream("far");
    b.outliers["far"] = SampleFarOutliers(spec, spec.n_far, r);
  }
  return b;
}

// ---------------------------------------------------------------- dense --

void DenseSpec::Validate() const {
  Require(k >= 2, "k must be >= 2");
  Require(feature_dim >= k + 1,
          "feature_dim must exceed k (one axis is reserved for negatives)");
  Require(height >= 4 && width >= 4, "scenes must be at least 4x4");
  Require(height <= 64 && width <= 64, "scenes must be at most 64x64");
  Require(pixel_sigma > 0 && patch_sigma >= 0, "noise levels must be valid");
  Require(negative_scale > 0 && unseen_scale > 0, "negative scales must be positive");
  Require(max_class_cosine > 0 && max_class_cosine <= 1,
          "max_class_cosine must lie in (0, 1]");
  Require(min_patches <= max_patches, "min_patches must not exceed max_patches");
  Require(min_patch_side >= 1 && min_patch_side <= max_patch_side,
          "patch sides must satisfy 1 <= min <= max");
  Require(max_patch_side <= std::min(height, width),
          "max_patch_side must fit in the scene");
  Require(pool_size >= 1, "pool_size must be positive");
}

std::vector<double> DenseSpec::ClassMean(int c) const {
  std::vector<double> m(feature_dim, 0.0);
  if (c < 1 || c > static_cast<int>(k)) {
    throw ContractError("class label out of range: " + std::to_string(c));
  }
  m[c - 1] = class_scale;
  return m;
}

Json ToJson(const DenseSpec& spec) { return FieldsToJson(spec, DenseFields()); }

DenseSpec DenseSpecFromJson(const Json& j) {
  DenseSpec spec;
  FieldsFromJson(j, DenseFields(), spec, {"kind"});
  spec.Validate();
  return spec;
}

bool DenseBundle::operator==(const DenseBundle& o) const {
  return ToJson(spec) == ToJson(o.spec) && train == o.train && test == o.test &&
         BitEqual(seen_pool, o.seen_pool);
}

Tensor DenseScene::PixelRows() const {
  const std::size_t f = input.dim(0), p = num_pixels();
  Tensor rows(Shape{p, f});
  for (std::size_t c = 0; c < f; ++c) {
    for (std::size_t i = 0; i < p; ++i) rows.at(i, c) = input[c * p + i];
  }
  return rows;
}

std::vector<Region> DenseScene::Regions() const {
  const std::size_t h = height(), w = width();
  std::vector<char> seen(labels.size(), 0);
  std::vector<Region> out;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (seen[start] || labels[start] == 0) continue;
    Region r;
    r.label = labels[start];
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      r.pixels.push_back(p);
      const std::size_t y = p / w, x = p % w;
      const std::size_t nbrs[4] = {y > 0 ? p - w : p, y + 1 < h ? p + w : p,
                                   x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p};
      for (std::size_t q : nbrs) {
        if (!seen[q] && labels[q] == r.label) {
          seen[q] = 1;
          queue.push_back(q);
        }
      }
    }
    std::sort(r.pixels.begin(), r.pixels.end());
    out.push_back(std::move(r));
  }
  return out;
}

DenseScene MakeCleanScene(const DenseSpec& spec, Rng& rng) {
  const std::size_t h = spec.height, w = spec.width, f = spec.feature_dim;
  std::vector<int> classes(spec.k);
  for (std::size_t c = 0; c < spec.k; ++c) classes[c] = static_cast<int>(c) + 1;
  for (std::size_t i = classes.size(); i > 1; --i) {
    std::swap(classes[i - 1], classes[rng.UniformInt(i)]);
  }
  const std::size_t split_col = w / 4 + rng.UniformInt(w / 2 + 1);
  const bool split_right = spec.k >= 3 && rng.Uniform() < 0.5;
  const std::size_t split_row = h / 4 + rng.UniformInt(h / 2 + 1);
  DenseScene s{Tensor(Shape{f, h, w}), std::vector<int>(h * w)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      int label = classes[0];
      if (x >= split_col) label = (split_right && y >= split_row) ? classes[2] : classes[1];
      s.labels[y * w + x] = label;
    }
  }
  for (std::size_t p = 0; p < h * w; ++p) {
    const std::vector<double> mean = spec.ClassMean(s.labels[p]);
    for (std::size_t c = 0; c < f; ++c) {
      s.input[c * h * w + p] = mean[c] + spec.pixel_sigma * rng.Normal();
    }
  }
  return s;
}

void PastePatch(DenseScene& scene, const DenseSpec& spec, const Patch& patch,
                std::span<const double> base, Rng& rng) {
  const std::size_t h = scene.height(), w = scene.width(), f = scene.input.dim(0);
  if (patch.height == 0 || patch.width == 0 || patch.top + patch.height > h ||
      patch.left + patch.width > w) {
    throw ConfigError("patch " + std::to_string(patch.height) + "x" +
                      std::to_string(patch.width) + " at (" +
                      std::to_string(patch.top) + ", " +
                      std::to_string(patch.left) + ") does not fit a " +
                      std::to_string(h) + "x" + std::to_string(w) + " scene");
  }
  if (base.size() != f) throw ShapeError("patch vector has the wrong width");
  for (std::size_t y = patch.top; y < patch.top + patch.height; ++y) {
    for (std::size_t x = patch.left; x < patch.left + patch.width; ++x) {
      const std::size_t p = y * w + x;
      scene.labels[p] = static_cast<int>(spec.k) + 1;
      for (std::size_t c = 0; c < f; ++c) {
        scene.input[c * h * w + p] = base[c] + spec.patch_sigma * rng.Normal();
      }
    }
  }
}

std::vector<Patch> PasteRandomPatches(DenseScene& scene, const DenseSpec& spec,
                                      const Tensor& pool, Rng& rng) {
  if (pool.rank() != 2 || pool.dim(1) != spec.feature_dim || pool.dim(0) == 0) {
    throw ShapeError("negative pool must be [M > 0, F0], got " +
                     ShapeToString(pool.shape()));
  }
  const std::size_t count =
      spec.min_patches + rng.UniformInt(spec.max_patches - spec.min_patches + 1);
  const std::size_t span = spec.max_patch_side - spec.min_patch_side + 1;
  std::vector<Patch> patches;
  for (std::size_t i = 0; i < count; ++i) {
    Patch p;
    p.height = spec.min_patch_side + rng.UniformInt(span);
    p.width = spec.min_patch_side + rng.UniformInt(span);
    p.top = rng.UniformInt(scene.height() - p.height + 1);
    p.left = rng.UniformInt(scene.width() - p.width + 1);
    const std::size_t row = rng.UniformInt(pool.dim(0));
    PastePatch(scene, spec, p,
               pool.data().subspan(row * pool.dim(1), pool.dim(1)), rng);
    patches.push_back(p);
  }
  return patches;
}

DenseScene MakeDenseScene(const DenseSpec& spec, const Tensor& pool, Rng& rng) {
  DenseScene s = MakeCleanScene(spec, rng);
  PasteRandomPatches(s, spec, pool, rng);
  return s;
}

Tensor NegativePool(const DenseSpec& spec, std::size_t n, bool unseen, Rng& rng) {
  const std::size_t f = spec.feature_dim;
  const double scale = unseen ? spec.unseen_scale : spec.negative_scale;
  Tensor pool(Shape{n, f});
  std::vector<double> u(f);
  for (std::size_t i = 0; i < n; ++i) {
    while (true) {
      double norm = 0.0;
      for (double& v : u) {
        v = rng.Normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      double closest = -1.0;
      for (std::size_t c = 0; c < spec.k; ++c) closest = std::max(closest, u[c] / norm);
      if (closest < spec.max_class_cosine) {
        for (std::size_t c = 0; c < f; ++c) pool.at(i, c) = scale * u[c] / norm;
        break;
      }
    }
  }
  return pool;
}

DenseBundle MakeDenseBundle(const DenseSpec& spec) {
  spec.Validate();
  const Rng root(spec.seed);
  DenseBundle b;
  b.spec = spec;
  {
    Rng r = root.Substream("dense.pool.seen");
    b.seen_pool = NegativePool(spec, spec.pool_size, false, r);
  }
  Tensor unseen;
  {
    Rng r = root.Substream("dense.pool.unseen");
    unseen = NegativePool(spec, spec.pool_size, true, r);
  }
  {
    Rng r = root.Substream("dense.train");
    for (std::size_t i = 0; i < spec.n_train_scenes; ++i) {
      b.train.push_back(MakeCleanScene(spec, r));
    }
  }
  {
    Rng r = root.Substream("dense.test");
    for (std::size_t i = 0; i < spec.n_test_scenes; ++i) {
      b.test.push_back(MakeDenseScene(spec, unseen, r));
    }
  }
  return b;
}

// --------------------------------------------------------------- bundles --

namespace {

void PutSet(TensorArchive& a, const std::string& name, const LabeledSet& s) {
  a.tensors[name + ".x"] = s.x;
  a.tensors[name + ".y"] = LabelsToTensor(s.y);
}

LabeledSet GetSet(const TensorArchive& a, const std::string& name) {
  LabeledSet s{RequireTensor(a, name + ".x"),
               TensorToLabels(RequireTensor(a, name + ".y"))};
  if (s.x.rank() != 2 || s.x.dim(0) != s.y.size()) {
    throw MalformedManifestError("split '" + name + "' has inconsistent sizes");
  }
  return s;
}

void PutScenes(TensorArchive& a, const std::string& name,
               const std::vector<DenseScene>& scenes, const DenseSpec& spec) {
  const std::size_t f = spec.feature_dim, h = spec.height, w = spec.width;
  Tensor input(Shape{scenes.size(), f, h, w});
  Tensor labels(Shape{scenes.size(), h, w});
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::copy(scenes[i].input.data().begin(), scenes[i].input.data().end(),
              input.data().begin() + i * f * h * w);
    for (std::size_t p = 0; p < h * w; ++p) labels[i * h * w + p] = scenes[i].labels[p];
  }
  a.tensors[name + ".input"] = std::move(input);
  a.tensors[name + ".labels"] = std::move(labels);
}

std::vector<DenseScene> GetScenes(const TensorArchive& a, const std::string& name,
                                  const DenseSpec& spec) {
  const Tensor& input = RequireTensor(a, name + ".input");
  const Tensor& labels = RequireTensor(a, name + ".labels");
  const std::size_t f = spec.feature_dim, h = spec.height, w = spec.width;
  if (input.rank() != 4 || labels.rank() != 3 || input.dim(0) != labels.dim(0) ||
      input.dim(1) != f || input.dim(2) != h || input.dim(3) != w ||
      labels.dim(1) != h || labels.dim(2) != w) {
    throw MalformedManifestError("scene tensors for '" + name +
                                 "' do not match the spec");
  }
  const std::vector<int> all = TensorToLabels(labels.Reshaped(Shape{labels.size()}));
  std::vector<DenseScene> out;
  for (std::size_t i = 0; i < input.dim(0); ++i) {
    DenseScene s;
    s.input = Tensor(Shape{f, h, w},
                     std::vector<double>(input.data().begin() + i * f * h * w,
                                         input.data().begin() + (i + 1) * f * h * w));
    s.labels.assign(all.begin() + i * h * w, all.begin() + (i + 1) * h * w);
    out.push_back(std::move(s));
  }
  return out;
}

Json LabelConvention() {
  return "1-based: 1..K inlier, K+1 negative/outlier, 0 void";
}

}  // namespace

void SaveBundle(const std::filesystem::path& dir, const DatasetBundle& b) {
  TensorArchive a;
  a.format = "uno.bundle";
  a.meta["kind"] = "image-wide";
  a.meta["rng"] = kRngAlgorithm;
  a.meta["labels"] = LabelConvention();
  a.meta["spec"] = ToJson(b.spec);
  Json counts = Json::object();
  counts["train"] = b.train.y.size();
  counts["val"] = b.val.y.size();
  counts["test"] = b.test.y.size();
  counts["negatives"] = b.negatives.y.size();
  for (const auto& [name, x] : b.outliers) counts["outliers." + name] = x.dim(0);
  a.meta["counts"] = counts;
  PutSet(a, "train", b.train);
  PutSet(a, "val", b.val);
  PutSet(a, "test", b.test);
  PutSet(a, "negatives", b.negatives);
  for (const auto& [name, x] : b.outliers) a.tensors["outliers." + name] = x;
  SaveArchive(dir, a);
}

DatasetBundle LoadBundle(const std::filesystem::path& dir) {
  const TensorArchive a = LoadArchive(dir, "uno.bundle");
  if (RequireString(a.meta, "kind") != "image-wide") {
    throw MalformedManifestError("bundle in " + dir.string() +
                                 " is not an image-wide bundle");
  }
  DatasetBundle b;
  try {
    b.spec = SynthSpecFromJson(RequireKey(a.meta, "spec"));
  } catch (const ConfigError& e) {
    throw MalformedManifestError(std::string("bundle spec: ") + e.what());
  }
  b.train = GetSet(a, "train");
  b.val = GetSet(a, "val");
  b.test = GetSet(a, "test");
  b.negatives = GetSet(a, "negatives");
  const std::string prefix = "outliers.";
  for (const auto& [name, t] : a.tensors) {
    if (name.rfind(prefix, 0) == 0) b.outliers[name.substr(prefix.size())] = t;
  }
  return b;
}

void SaveDenseBundle(const std::filesystem::path& dir, const DenseBundle& b) {
  TensorArchive a;
  a.format = "uno.bundle";
  a.meta["kind"] = "dense";
  a.meta["rng"] = kRngAlgorithm;
  a.meta["labels"] = LabelConvention();
  a.meta["spec"] = ToJson(b.spec);
  Json counts = Json::object();
  counts["train_scenes"] = b.train.size();
  counts["test_scenes"] = b.test.size();
  counts["seen_pool"] = b.seen_pool.dim(0);
  a.meta["counts"] = counts;
  PutScenes(a, "train", b.train, b.spec);
  PutScenes(a, "test", b.test, b.spec);
  a.tensors["seen_pool"] = b.seen_pool;
  SaveArchive(dir, a);
}

DenseBundle LoadDenseBundle(const std::filesystem::path& dir) {
  const TensorArchive a = LoadArchive(dir, "uno.bundle");
  if (RequireString(a.meta, "kind") != "dense") {
    throw MalformedManifestError("bundle in " + dir.string() +
                                 " is not a dense bundle");
  }
  DenseBundle b;
  try {
    b.spec = DenseSpecFromJson(RequireKey(a.meta, "spec"));
  } catch (const ConfigError& e) {
    throw MalformedManifestError(std::string("bundle spec: ") + e.what());
  }
  b.train = GetScenes(a, "train", b.spec);
  b.test = GetScenes(a, "test", b.spec);
  b.seen_pool = RequireTensor(a, "seen_pool");
  return b;
}

std::string BundleKind(const std::filesystem::path& dir) {
  return RequireString(LoadArchive(dir, "uno.bundle").meta, "kind");
}

}  // namespace uno::synth
