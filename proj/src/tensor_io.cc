// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/tensor_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "uno/errors.h"

namespace uno {
namespace {

static_assert(std::endian::native == std::endian::little,
              "UNOT I/O assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'N', 'O', 'T'};

template <typename T>
void Put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw TruncatedPayloadError(std::string("UNOT stream truncated in ") +
                                  what);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const char* cursor() const { return bytes_.data() + pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string EncodeTensor(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("UNOT supports rank <= 255");
  std::string out(kMagic, 4);
  Put<std::uint16_t>(out, kUnotVersion);
  Put<std::uint8_t>(out, kUnotDtypeF64);
  Put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) Put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(t.data().data()),
             t.size() * sizeof(double));
  return out;
}

Tensor DecodeTensor(const std::string& bytes) {
  if (bytes.size() < 4) throw TruncatedPayloadError("UNOT stream truncated in magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw MagicMismatchError("not a UNOT tensor (bad magic)");
  }
  Reader r(bytes);
  r.Get<std::uint32_t>("magic");
  const auto version = r.Get<std::uint16_t>("version");
  if (version != kUnotVersion) {
    throw VersionUnsupportedError("UNOT version " + std::to_string(version) +
                                  " unsupported (expected " +
                                  std::to_string(kUnotVersion) + ")");
  }
  const auto dtype = r.Get<std::uint8_t>("dtype");
  if (dtype != kUnotDtypeF64) {
    throw VersionUnsupportedError("UNOT dtype code " + std::to_string(dtype) +
                                  " unsupported");
  }
  const auto rank = r.Get<std::uint8_t>("rank");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(r.Get<std::uint64_t>("dims"));
  const std::size_t n = NumElements(shape);
  if (r.remaining() < n * sizeof(double)) {
    throw TruncatedPayloadError("UNOT payload truncated: need " +
                                std::to_string(n * sizeof(double)) +
                                " bytes, have " +
                                std::to_string(r.remaining()));
  }
  if (r.remaining() > n * sizeof(double)) {
    throw IoError("UNOT stream has trailing bytes after payload");
  }
  std::vector<double> data(n);
  if (n) std::memcpy(data.data(), r.cursor(), n * sizeof(double));
  return Tensor(std::move(shape), std::move(data));
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path,
                    const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void SaveTensor(const std::filesystem::path& path, const Tensor& t) {
  WriteFileBytes(path, EncodeTensor(t));
}

Tensor LoadTensor(const std::filesystem::path& path) {
  return DecodeTensor(ReadFileBytes(path));
}

}  // namespace uno
