// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "svcdiff/types.hpp"

namespace svcdiff {

// Feature tensor file: a fixed 32-byte little-endian header followed by the
// row-major payload.
//
//   0  char[4]  "SVCT"
//   4  u16      version (1)
//   6  u16      dtype (0 = f32, 1 = f64)
//   8  u32      rank (1..5)
//   12 u32[5]   dims, unused trailing entries 0
enum class DType : std::uint16_t { kF32 = 0, kF64 = 1 };

inline constexpr std::size_t kTensorHeaderSize = 32;
inline constexpr std::uint16_t kTensorVersion = 1;

struct TensorHeader {
  DType dtype = DType::kF32;
  std::uint32_t rank = 2;
  std::array<std::uint32_t, 5> dims{};

  std::size_t element_count() const;
};

std::array<std::uint8_t, kTensorHeaderSize> encode_header(const TensorHeader& h);
TensorHeader decode_header(std::span<const std::uint8_t> bytes);

// Writes a rank-2 (matrix) or rank-1 (vector) tensor.
void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::kF32);
void write_vector(const std::filesystem::path& path, std::span<const double> v, DType dtype = DType::kF32);

struct LoadedTensor {
  TensorHeader header;
  std::vector<double> data;

  // Rows = dims[0], cols = product of the remaining dims.
  Tensor as_matrix() const;
};

LoadedTensor read_tensor(const std::filesystem::path& path);
TensorHeader read_tensor_header(const std::filesystem::path& path);

}  // namespace svcdiff
