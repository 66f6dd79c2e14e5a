// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Deterministic toy data.
//
// Image-wide: K isotropic Gaussians on a circle in 2D. Real negatives come
// from a ring segment that covers only part of the outlier space. Test
// outliers are "near" (in the angular gaps between classes, at the inlier
// radius) and "far" (beyond the ring radius, half inside the covered arc and
// half in an uncovered direction).
//
// Dense: H x W grids of F0-dimensional per-pixel features arranged in
// rectangular class regions, with rectangular negative patches pasted on top.
//
// Every split draws from its own substream of the spec seed:
//   "train", "val", "test", "negatives", "near", "far",
//   "dense.train", "dense.test", "dense.pool.seen", "dense.pool.unseen".

#ifndef UNO_SYNTH_H_
#define UNO_SYNTH_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uno/checkpoint.h"
#include "uno/rng.h"
#include "uno/tensor.h"

namespace uno::synth {

enum class NegativeSource { kRingSegment, kUniformBox };
std::string_view NegativeSourceName(NegativeSource s);
NegativeSource ParseNegativeSource(std::string_view name);

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t k = 3;
  double radius = 4.0;
  double sigma = 0.5;
  double first_angle_deg = 90.0;
  std::size_t n_train = 600;
  std::size_t n_val = 300;
  std::size_t n_test = 300;

  NegativeSource negative_source = NegativeSource::kRingSegment;
  std::size_t n_negatives = 600;
  double ring_inner = 6.0;
  double ring_outer = 9.5;
  double ring_arc_begin_deg = 0.0;
  double ring_arc_end_deg = 180.0;
  double box_half_width = 10.0;  // uniform-box: |x|,|y| <= w, radius >= ring_inner

  std::size_t n_near = 300;
  double near_jitter_deg = 10.0;
  double near_radius_sd = 0.3;
  std::size_t n_far = 300;
  double far_inner = 8.0;
  double far_outer = 11.0;
  double far_covered_begin_deg = 20.0;
  double far_covered_end_deg = 160.0;
  double far_uncovered_center_deg = 270.0;
  double far_uncovered_half_width_deg = 25.0;

  // Throws ConfigError naming the first invalid field.
  void Validate() const;
  // Inlier class means, row c for label c+1.
  std::vector<std::pair<double, double>> Means() const;
};

Json ToJson(const SynthSpec& spec);
// Unknown keys are rejected by name.
SynthSpec SynthSpecFromJson(const Json& j);

struct LabeledSet {
  Tensor x;                // [n, dim]
  std::vector<int> y;      // 1-based labels

  bool operator==(const LabeledSet&) const = default;
};

struct DatasetBundle {
  SynthSpec spec;
  LabeledSet train;
  LabeledSet val;
  LabeledSet test;
  LabeledSet negatives;            // labels K+1
  std::map<std::string, Tensor> outliers;  // "near", "far"

  bool operator==(const DatasetBundle& o) const;
};

DatasetBundle MakeImageWide(const SynthSpec& spec);

// Individual generators, exposed for tests and trainers.
LabeledSet SampleInliers(const SynthSpec& spec, std::size_t n, Rng& rng);
Tensor SampleNegatives(const SynthSpec& spec, std::size_t n, Rng& rng);
Tensor SampleNearOutliers(const SynthSpec& spec, std::size_t n, Rng& rng);
Tensor SampleFarOutliers(const SynthSpec& spec, std::size_t n, Rng& rng);

// ---------------------------------------------------------------- dense --

struct DenseSpec {
  std::uint64_t seed = 0;
  std::size_t k = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t feature_dim = 4;    // F0
  double class_scale = 3.0;       // class k mean = class_scale * e_k
  double pixel_sigma = 0.6;
  std::size_t min_patches = 1;
  std::size_t max_patches = 3;
  std::size_t min_patch_side = 3;
  std::size_t max_patch_side = 6;
  double negative_scale = 3.0;    // norm of a seen patch's base vector
  double unseen_scale = 2.0;      // norm of an unseen patch's base vector
  double max_class_cosine = 0.8;  // patch directions stay off the class axes
  double patch_sigma = 0.3;       // per-pixel noise around the base vector
  std::size_t n_train_scenes = 48;
  std::size_t n_test_scenes = 24;
  std::size_t pool_size = 256;

  void Validate() const;
  // The class mean for label `c` (1-based).
  std::vector<double> ClassMean(int c) const;
};

Json ToJson(const DenseSpec& spec);
DenseSpec DenseSpecFromJson(const Json& j);

struct Region {
  int label = 0;
  std::vector<std::size_t> pixels;  // row-major pixel indices
};

struct DenseScene {
  Tensor input;              // [F0, H, W]
  std::vector<int> labels;   // H*W, 1..K inlier, K+1 outlier, 0 void

  std::size_t height() const { return input.dim(1); }
  std::size_t width() const { return input.dim(2); }
  std::size_t num_pixels() const { return labels.size(); }
  // Pixel features as rows [H*W, F0].
  Tensor PixelRows() const;
  // 4-connected components of equal label (void excluded), in row-major
  // order of their first pixel.
  std::vector<Region> Regions() const;

  bool operator==(const DenseScene&) const = default;
};

struct Patch {
  std::size_t top, left, height, width;
};

// Draws the inlier layout only (no patches).
DenseScene MakeCleanScene(const DenseSpec& spec, Rng& rng);
// Pastes a rectangle: every pixel gets base + patch_sigma * noise and label
// K+1. Throws ConfigError if the patch does not fit.
void PastePatch(DenseScene& scene, const DenseSpec& spec, const Patch& patch,
                std::span<const double> base, Rng& rng);
// Pastes between min_patches and max_patches random patches whose base
// vectors are rows drawn from `pool` [M, F0]. Returns the patches.
std::vector<Patch> PasteRandomPatches(DenseScene& scene, const DenseSpec& spec,
                                      const Tensor& pool, Rng& rng);
DenseScene MakeDenseScene(const DenseSpec& spec, const Tensor& pool, Rng& rng);

// Base vectors for patches. Directions are uniform on the sphere, rejected
// when their cosine with any class axis e_1..e_K reaches max_class_cosine.
// Seen negatives have norm negative_scale and unseen ones unseen_scale, so
// the held-out patches sit closer to the inlier classes.
Tensor NegativePool(const DenseSpec& spec, std::size_t n, bool unseen, Rng& rng);

struct DenseBundle {
  DenseSpec spec;
  std::vector<DenseScene> train;   // clean scenes; negatives are pasted while training
  std::vector<DenseScene> test;    // pasted with unseen negatives
  Tensor seen_pool;                // [pool_size, F0]

  bool operator==(const DenseBundle& o) const;
};

DenseBundle MakeDenseBundle(const DenseSpec& spec);

// --------------------------------------------------------------- bundles --

void SaveBundle(const std::filesystem::path& dir, const DatasetBundle& b);
DatasetBundle LoadBundle(const std::filesystem::path& dir);
void SaveDenseBundle(const std::filesystem::path& dir, const DenseBundle& b);
DenseBundle LoadDenseBundle(const std::filesystem::path& dir);

// "image-wide" or "dense", read from a bundle manifest.
std::string BundleKind(const std::filesystem::path& dir);

}  // namespace uno::synth

#endif  // UNO_SYNTH_H_
