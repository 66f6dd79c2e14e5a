// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_TENSOR_IO_H_
#define UNO_TENSOR_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "uno/tensor.h"

namespace uno {

// UNOT tensor file layout (all integers little-endian):
//   "UNOT" | u16 version | u8 dtype | u8 rank | rank x u64 dims | payload
// dtype 0 is IEEE-754 binary64; payload is row-major.
inline constexpr std::uint16_t kUnotVersion = 1;
inline constexpr std::uint8_t kUnotDtypeF64 = 0;

std::string EncodeTensor(const Tensor& t);

// Throws MagicMismatchError, VersionUnsupportedError or
// TruncatedPayloadError on malformed input.
Tensor DecodeTensor(const std::string& bytes);

void SaveTensor(const std::filesystem::path& path, const Tensor& t);
Tensor LoadTensor(const std::filesystem::path& path);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace uno

#endif  // UNO_TENSOR_IO_H_
