// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>

#include "support/primitive_cases.h"
#include "uno/checkpoint.h"
#include "uno/errors.h"
#include "uno/rng.h"
#include "uno/tensor_io.h"

namespace uno {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uno_io_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Unot, HeaderLayoutIsLittleEndian) {
  const Tensor t(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::string bytes = EncodeTensor(t);
  ASSERT_EQ(bytes.size(), 4u + 2 + 1 + 1 + 2 * 8 + 6 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "UNOT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0);  // f64
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 2);  // rank
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 3);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 24, sizeof(double));
  EXPECT_EQ(first, 1.0);
}

TEST(Unot, RoundTripIsBitExact) {
  Rng rng(1);
  for (const Shape& shape : {Shape{}, Shape{0}, Shape{7}, Shape{3, 4}, Shape{2, 3, 5}}) {
    Tensor t = uno::testing::RandomTensor(shape, rng);
    if (t.size() > 1) {
      t[0] = -0.0;
      t[1] = std::numeric_limits<double>::denorm_min();
    }
    const Tensor back = DecodeTensor(EncodeTensor(t));
    EXPECT_EQ(back.shape(), t.shape());
    EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(double)), 0);
  }
}

TEST(Unot, DistinctErrors) {
  const std::string good = EncodeTensor(Tensor(Shape{4}, 1.0));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(DecodeTensor(bad_magic), MagicMismatchError);
  std::string bumped = good;
  bumped[4] = 2;
  EXPECT_THROW(DecodeTensor(bumped), VersionUnsupportedError);
  std::string dtype = good;
  dtype[6] = 1;
  EXPECT_THROW(DecodeTensor(dtype), VersionUnsupportedError);
  EXPECT_THROW(DecodeTensor(good.substr(0, good.size() - 1)), TruncatedPayloadError);
  EXPECT_THROW(DecodeTensor(good.substr(0, 6)), TruncatedPayloadError);
  EXPECT_THROW(DecodeTensor(good + "x"), IoError);
}

TEST(Unot, FileRoundTrip) {
  const fs::path dir = FreshDir("file");
  fs::create_directories(dir);
  const Tensor t(Shape{2, 2}, std::vector<double>{0.5, -1.5, 2.25, 1e300});
  SaveTensor(dir / "t.unot", t);
  EXPECT_EQ(LoadTensor(dir / "t.unot"), t);
  EXPECT_THROW(LoadTensor(dir / "missing.unot"), IoError);
  fs::remove_all(dir);
}

TEST(Archive, RoundTripAndFormatCheck) {
  const fs::path dir = FreshDir("archive");
  TensorArchive a;
  a.format = "uno.test";
  a.meta["answer"] = 42;
  a.tensors.emplace("w", Tensor(Shape{2}, std::vector<double>{1, 2}));
  SaveArchive(dir, a);
  const TensorArchive b = LoadArchive(dir, "uno.test");
  EXPECT_EQ(b.meta["answer"], 42);
  EXPECT_EQ(b.tensors.at("w"), a.tensors.at("w"));
  EXPECT_THROW(LoadArchive(dir, "uno.other"), MalformedManifestError);
  EXPECT_THROW(RequireTensor(b, "nope"), MalformedManifestError);
  fs::remove_all(dir);
}

TEST(Archive, MalformedManifestAndMissingTensor) {
  const fs::path dir = FreshDir("malformed");
  TensorArchive a;
  a.format = "uno.test";
  a.tensors.emplace("w", Tensor(Shape{1}, 3.0));
  SaveArchive(dir, a);
  fs::remove(dir / "w.unot");
  EXPECT_THROW(LoadArchive(dir), MalformedManifestError);
  WriteFileBytes(dir / "manifest.json", "{not json");
  EXPECT_THROW(LoadArchive(dir), MalformedManifestError);
  fs::remove_all(dir);
}

TEST(Archive, LabelsSurviveTensorEncoding) {
  const std::vector<int> y = {1, 4, 0, 3};
  EXPECT_EQ(TensorToLabels(LabelsToTensor(y)), y);
}

TEST(Archive, RequireHelpersNameTheKey) {
  const Json j = {{"n", 3}, {"s", "x"}};
  EXPECT_EQ(RequireSize(j, "n"), 3u);
  EXPECT_EQ(RequireString(j, "s"), "x");
  try {
    RequireSize(j, "missing_key");
    FAIL();
  } catch (const MalformedManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("missing_key"), std::string::npos);
  }
  EXPECT_THROW(RequireSize(j, "s"), MalformedManifestError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
}

TEST(Rng, SubstreamsAreIndependentOfParentState) {
  Rng a(5);
  const std::uint64_t first = a.Substream("train").NextU64();
  a.NextU64();
  a.NextU64();
  EXPECT_EQ(a.Substream("train").NextU64(), first);
  EXPECT_NE(a.Substream("val").NextU64(), first);
  EXPECT_NE(a.Substream(std::uint64_t{0}).NextU64(), a.Substream(std::uint64_t{1}).NextU64());
}

TEST(Rng, UniformIntRangeAndCoverage) {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = rng.UniformInt(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMomentsWithinMonteCarloBounds) {
  Rng rng(8);
  constexpr int kN = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double z = rng.Normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / kN;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(kN));
  EXPECT_LT(std::abs(sq / kN - 1.0), 4.0 * std::sqrt(2.0 / kN));
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace uno
