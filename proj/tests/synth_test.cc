// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/synth.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "uno/errors.h"
#include "uno/tensor_io.h"

namespace uno::synth {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uno_synth_test_" + name);
  fs::remove_all(dir);
  return dir;
}

SynthSpec SmallSpec(std::uint64_t seed = 3) {
  SynthSpec s;
  s.seed = seed;
  s.n_train = 90;
  s.n_val = 30;
  s.n_test = 30;
  s.n_negatives = 40;
  s.n_near = 20;
  s.n_far = 20;
  return s;
}

DenseSpec SmallDense(std::uint64_t seed = 3) {
  DenseSpec s;
  s.seed = seed;
  s.height = 8;
  s.width = 8;
  s.max_patch_side = 4;
  s.n_train_scenes = 3;
  s.n_test_scenes = 2;
  s.pool_size = 16;
  return s;
}

double Radius(const Tensor& x, std::size_t r) { return std::hypot(x.at(r, 0), x.at(r, 1)); }

double AngleDeg(const Tensor& x, std::size_t r) {
  double a = std::atan2(x.at(r, 1), x.at(r, 0)) * 180.0 / std::numbers::pi;
  return a < 0 ? a + 360.0 : a;
}

TEST(ImageWide, SameSeedIsBitIdentical) {
  EXPECT_TRUE(MakeImageWide(SmallSpec(5)) == MakeImageWide(SmallSpec(5)));
  EXPECT_FALSE(MakeImageWide(SmallSpec(5)) == MakeImageWide(SmallSpec(6)));
}

TEST(ImageWide, StratifiedCounts) {
  SynthSpec s = SmallSpec();
  Rng rng(1);
  const LabeledSet set = SampleInliers(s, 300, rng);
  std::vector<int> counts(4, 0);
  for (int y : set.y) {
    ASSERT_GE(y, 1);
    ASSERT_LE(y, 3);
    ++counts[y];
  }
  EXPECT_EQ(counts[1], 100);
  EXPECT_EQ(counts[2], 100);
  EXPECT_EQ(counts[3], 100);
}

TEST(ImageWide, EmpiricalMeansWithinMonteCarloBound) {
  SynthSpec s;
  s.seed = 17;
  const DatasetBundle b = MakeImageWide(s);
  const auto means = s.Means();
  for (std::size_t c = 0; c < s.k; ++c) {
    double mx = 0.0, my = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < b.train.y.size(); ++i) {
      if (b.train.y[i] != static_cast<int>(c + 1)) continue;
      mx += b.train.x.at(i, 0);
      my += b.train.x.at(i, 1);
      ++n;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    const double bound = 3.0 * s.sigma / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(mx - means[c].first), bound) << "class " << c + 1;
    EXPECT_LT(std::abs(my - means[c].second), bound) << "class " << c + 1;
  }
}

TEST(ImageWide, DefaultMeansOnCircle) {
  const SynthSpec s;
  const auto means = s.Means();
  ASSERT_EQ(means.size(), 3u);
  EXPECT_NEAR(means[0].first, 0.0, 1e-12);
  EXPECT_NEAR(means[0].second, 4.0, 1e-12);
  for (const auto& [x, y] : means) EXPECT_NEAR(std::hypot(x, y), 4.0, 1e-12);
}

TEST(ImageWide, NegativesAndOutliersFollowTheirRegions) {
  const SynthSpec s = SmallSpec();
  const DatasetBundle b = MakeImageWide(s);
  for (int y : b.negatives.y) EXPECT_EQ(y, 4);
  for (std::size_t r = 0; r < b.negatives.x.dim(0); ++r) {
    EXPECT_GE(Radius(b.negatives.x, r), s.ring_inner);
    EXPECT_LE(Radius(b.negatives.x, r), s.ring_outer);
    EXPECT_LE(AngleDeg(b.negatives.x, r), s.ring_arc_end_deg);
  }
  const Tensor& far = b.outliers.at("far");
  for (std::size_t r = 0; r < far.dim(0); ++r) {
    EXPECT_GE(Radius(far, r), s.far_inner);
    EXPECT_LE(Radius(far, r), s.far_outer);
  }
  EXPECT_EQ(b.outliers.at("near").dim(0), s.n_near);
}

TEST(ImageWide, UniformBoxNegativesStayOutsideInnerRadius) {
  SynthSpec s = SmallSpec();
  s.negative_source = NegativeSource::kUniformBox;
  Rng rng(2);
  const Tensor neg = SampleNegatives(s, 200, rng);
  for (std::size_t r = 0; r < 200; ++r) {
    EXPECT_GE(Radius(neg, r), s.ring_inner);
    EXPECT_LE(std::abs(neg.at(r, 0)), s.box_half_width);
    EXPECT_LE(std::abs(neg.at(r, 1)), s.box_half_width);
  }
}

TEST(ImageWide, SpecJsonRoundTripAndUnknownKey) {
  SynthSpec s = SmallSpec(9);
  s.ring_arc_end_deg = 120.0;
  const SynthSpec back = SynthSpecFromJson(ToJson(s));
  EXPECT_EQ(ToJson(back), ToJson(s));
  Json bad = ToJson(s);
  bad["ring_radius"] = 3;
  try {
    SynthSpecFromJson(bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ring_radius"), std::string::npos);
  }
}

TEST(ImageWide, InvalidSpecRejected) {
  SynthSpec s = SmallSpec();
  s.k = 1;
  EXPECT_THROW(MakeImageWide(s), ConfigError);
  s = SmallSpec();
  s.sigma = 0.0;
  EXPECT_THROW(MakeImageWide(s), ConfigError);
}

TEST(Bundle, RoundTripIsBitExact) {
  const DatasetBundle b = MakeImageWide(SmallSpec());
  const fs::path dir = FreshDir("bundle");
  SaveBundle(dir, b);
  EXPECT_EQ(BundleKind(dir), "image-wide");
  EXPECT_TRUE(LoadBundle(dir) == b);
  fs::remove_all(dir);
}

TEST(Bundle, CorruptedTensorFilesRaiseDistinctErrors) {
  const fs::path dir = FreshDir("corrupt");
  SaveBundle(dir, MakeImageWide(SmallSpec()));
  fs::path victim;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".unot") victim = e.path();
  }
  ASSERT_FALSE(victim.empty());
  const std::string good = ReadFileBytes(victim);

  std::string bytes = good;
  bytes[1] = 'X';
  WriteFileBytes(victim, bytes);
  EXPECT_THROW(LoadBundle(dir), MagicMismatchError);

  bytes = good;
  bytes[4] = static_cast<char>(kUnotVersion + 1);
  WriteFileBytes(victim, bytes);
  EXPECT_THROW(LoadBundle(dir), VersionUnsupportedError);

  WriteFileBytes(victim, good.substr(0, good.size() - 3));
  EXPECT_THROW(LoadBundle(dir), TruncatedPayloadError);

  WriteFileBytes(victim, good);
  WriteFileBytes(dir / "manifest.json", "[]");
  EXPECT_THROW(LoadBundle(dir), MalformedManifestError);
  fs::remove_all(dir);
}

TEST(Bundle, KindMismatchIsMalformed) {
  const fs::path dir = FreshDir("kind");
  SaveBundle(dir, MakeImageWide(SmallSpec()));
  EXPECT_THROW(LoadDenseBundle(dir), MalformedManifestError);
  fs::remove_all(dir);
}

TEST(Dense, CleanSceneHasOnlyInlierLabels) {
  const DenseSpec s = SmallDense();
  Rng rng(4);
  const DenseScene scene = MakeCleanScene(s, rng);
  EXPECT_EQ(scene.input.shape(), (Shape{s.feature_dim, s.height, s.width}));
  for (int y : scene.labels) {
    EXPECT_GE(y, 1);
    EXPECT_LE(y, static_cast<int>(s.k));
  }
}

TEST(Dense, ZeroPatchesLeaveNoOutlierPixels) {
  DenseSpec s = SmallDense();
  s.min_patches = 0;
  s.max_patches = 0;
  Rng rng(5);
  Rng pool_rng(6);
  const Tensor pool = NegativePool(s, 4, false, pool_rng);
  const DenseScene scene = MakeDenseScene(s, pool, rng);
  for (int y : scene.labels) EXPECT_NE(y, static_cast<int>(s.k + 1));
}

TEST(Dense, FullScenePatchCoversEverything) {
  const DenseSpec s = SmallDense();
  Rng rng(7);
  DenseScene scene = MakeCleanScene(s, rng);
  const std::vector<double> base(s.feature_dim, 1.0);
  PastePatch(scene, s, Patch{0, 0, s.height, s.width}, base, rng);
  for (int y : scene.labels) EXPECT_EQ(y, static_cast<int>(s.k + 1));
}

TEST(Dense, OversizedPatchThrows) {
  const DenseSpec s = SmallDense();
  Rng rng(8);
  DenseScene scene = MakeCleanScene(s, rng);
  const std::vector<double> base(s.feature_dim, 1.0);
  EXPECT_THROW(PastePatch(scene, s, Patch{0, 0, s.height + 1, 1}, base, rng), ConfigError);
  EXPECT_THROW(PastePatch(scene, s, Patch{s.height - 1, 0, 2, 1}, base, rng), ConfigError);
}

TEST(Dense, PastedPixelCountMatchesUnionOfRectangles) {
  const DenseSpec s = SmallDense();
  Rng pool_rng(9);
  const Tensor pool = NegativePool(s, 8, false, pool_rng);
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    DenseScene scene = MakeCleanScene(s, rng);
    const std::vector<Patch> patches = PasteRandomPatches(scene, s, pool, rng);
    EXPECT_GE(patches.size(), s.min_patches);
    EXPECT_LE(patches.size(), s.max_patches);
    std::set<std::size_t> covered;
    for (const Patch& p : patches) {
      for (std::size_t r = p.top; r < p.top + p.height; ++r) {
        for (std::size_t c = p.left; c < p.left + p.width; ++c) covered.insert(r * s.width + c);
      }
    }
    std::size_t outliers = 0;
    for (int y : scene.labels) outliers += y == static_cast<int>(s.k + 1);
    EXPECT_EQ(outliers, covered.size()) << "trial " << trial;
  }
}

TEST(Dense, PixelRowsTransposeInput) {
  const DenseSpec s = SmallDense();
  Rng rng(11);
  const DenseScene scene = MakeCleanScene(s, rng);
  const Tensor rows = scene.PixelRows();
  EXPECT_EQ(rows.shape(), (Shape{s.height * s.width, s.feature_dim}));
  for (std::size_t p = 0; p < s.height * s.width; ++p) {
    for (std::size_t f = 0; f < s.feature_dim; ++f) {
      EXPECT_EQ(rows.at(p, f), scene.input[f * s.height * s.width + p]);
    }
  }
}

TEST(Dense, RegionsPartitionLabeledPixels) {
  const DenseSpec s = SmallDense();
  Rng pool_rng(12);
  const Tensor pool = NegativePool(s, 8, false, pool_rng);
  Rng rng(13);
  const DenseScene scene = MakeDenseScene(s, pool, rng);
  std::size_t total = 0;
  for (const Region& region : scene.Regions()) {
    for (std::size_t p : region.pixels) EXPECT_EQ(scene.labels[p], region.label);
    total += region.pixels.size();
  }
  EXPECT_EQ(total, scene.num_pixels());
}

TEST(Dense, NegativePoolNormsAndAxisRule) {
  const DenseSpec s = SmallDense();
  for (bool unseen : {false, true}) {
    Rng rng(unseen ? 14 : 15);
    const Tensor pool = NegativePool(s, 500, unseen, rng);
    const double scale = unseen ? s.unseen_scale : s.negative_scale;
    for (std::size_t i = 0; i < 500; ++i) {
      double norm = 0.0;
      for (std::size_t f = 0; f < s.feature_dim; ++f) norm += pool.at(i, f) * pool.at(i, f);
      norm = std::sqrt(norm);
      EXPECT_NEAR(norm, scale, 1e-12);
      for (std::size_t c = 0; c < s.k; ++c) EXPECT_LT(pool.at(i, c) / norm, s.max_class_cosine);
    }
  }
}

TEST(Dense, BundleDeterminismAndRoundTrip) {
  const DenseBundle a = MakeDenseBundle(SmallDense(21));
  EXPECT_TRUE(a == MakeDenseBundle(SmallDense(21)));
  EXPECT_EQ(a.train.size(), 3u);
  EXPECT_EQ(a.test.size(), 2u);
  for (const DenseScene& scene : a.train) {
    for (int y : scene.labels) EXPECT_LE(y, 3);
  }
  const fs::path dir = FreshDir("dense");
  SaveDenseBundle(dir, a);
  EXPECT_EQ(BundleKind(dir), "dense");
  EXPECT_TRUE(LoadDenseBundle(dir) == a);
  fs::remove_all(dir);
}

TEST(Dense, SpecValidation) {
  DenseSpec s = SmallDense();
  s.feature_dim = s.k;
  EXPECT_THROW(s.Validate(), ConfigError);
  s = SmallDense();
  s.max_class_cosine = 0.0;
  EXPECT_THROW(s.Validate(), ConfigError);
  s = SmallDense();
  s.max_patch_side = 9;
  EXPECT_THROW(s.Validate(), ConfigError);
  Json j = ToJson(SmallDense());
  j["patch_count"] = 2;
  EXPECT_THROW(DenseSpecFromJson(j), ConfigError);
}

}  // namespace
}  // namespace uno::synth
