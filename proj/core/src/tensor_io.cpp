// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "svcdiff/error.hpp"

namespace svcdiff {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

template <class T>
void put(std::uint8_t* dst, T v) {
  std::memcpy(dst, &v, sizeof(T));
}

template <class T>
T get(const std::uint8_t* src) {
  T v;
  std::memcpy(&v, src, sizeof(T));
  return v;
}

std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

void write_payload(const std::filesystem::path& path, const TensorHeader& h, std::span<const double> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot open " + path.string() + " for writing");
  const auto header = encode_header(h);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());
  if (h.dtype == DType::kF32) {
    std::vector<float> buf(data.begin(), data.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  } else {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
  }
  if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
}

}  // namespace

std::size_t TensorHeader::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) n *= dims[i];
  return n;
}

std::array<std::uint8_t, kTensorHeaderSize> encode_header(const TensorHeader& h) {
  if (h.rank < 1 || h.rank > 5) throw Error(Errc::kFormat, "tensor rank must lie in [1, 5]");
  std::array<std::uint8_t, kTensorHeaderSize> b{};
  std::memcpy(b.data(), "SVCT", 4);
  put<std::uint16_t>(b.data() + 4, kTensorVersion);
  put<std::uint16_t>(b.data() + 6, static_cast<std::uint16_t>(h.dtype));
  put<std::uint32_t>(b.data() + 8, h.rank);
  for (int i = 0; i < 5; ++i) put<std::uint32_t>(b.data() + 12 + 4 * i, i < static_cast<int>(h.rank) ? h.dims[i] : 0);
  return b;
}

TensorHeader decode_header(std::span<const std::uint8_t> b) {
  if (b.size() < kTensorHeaderSize || std::memcmp(b.data(), "SVCT", 4) != 0)
    throw Error(Errc::kFormat, "not a tensor file (bad magic)");
  if (get<std::uint16_t>(b.data() + 4) != kTensorVersion) throw Error(Errc::kFormat, "unsupported tensor version");
  TensorHeader h;
  const auto dtype = get<std::uint16_t>(b.data() + 6);
  if (dtype > 1) throw Error(Errc::kFormat, "unknown tensor dtype " + std::to_string(dtype));
  h.dtype = static_cast<DType>(dtype);
  h.rank = get<std::uint32_t>(b.data() + 8);
  if (h.rank < 1 || h.rank > 5) throw Error(Errc::kFormat, "tensor rank must lie in [1, 5]");
  for (int i = 0; i < 5; ++i) h.dims[i] = get<std::uint32_t>(b.data() + 12 + 4 * i);
  return h;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  TensorHeader h;
  h.dtype = dtype;
  h.rank = 2;
  h.dims[0] = static_cast<std::uint32_t>(t.rows());
  h.dims[1] = static_cast<std::uint32_t>(t.cols());
  write_payload(path, h, {t.data(), static_cast<std::size_t>(t.size())});
}

void write_vector(const std::filesystem::path& path, std::span<const double> v, DType dtype) {
  TensorHeader h;
  h.dtype = dtype;
  h.rank = 1;
  h.dims[0] = static_cast<std::uint32_t>(v.size());
  write_payload(path, h, v);
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::array<std::uint8_t, kTensorHeaderSize> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (in.gcount() != static_cast<std::streamsize>(b.size())) throw Error(Errc::kFormat, "truncated tensor header");
  return decode_header(b);
}

LoadedTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::array<std::uint8_t, kTensorHeaderSize> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (in.gcount() != static_cast<std::streamsize>(b.size())) throw Error(Errc::kFormat, "truncated tensor header");
  LoadedTensor t;
  t.header = decode_header(b);
  const std::size_t n = t.header.element_count();
  const std::size_t bytes = n * dtype_size(t.header.dtype);
  std::vector<char> raw(bytes);
  in.read(raw.data(), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) throw Error(Errc::kFormat, "truncated tensor payload");
  if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::kFormat, "trailing bytes after tensor payload");
  t.data.resize(n);
  if (t.header.dtype == DType::kF32) {
    for (std::size_t i = 0; i < n; ++i) t.data[i] = get<float>(reinterpret_cast<const std::uint8_t*>(raw.data()) + 4 * i);
  } else {
    std::memcpy(t.data.data(), raw.data(), bytes);
  }
  return t;
}

Tensor LoadedTensor::as_matrix() const {
  const Eigen::Index rows = header.dims[0];
  Eigen::Index cols = 1;
  for (std::uint32_t i = 1; i < header.rank; ++i) cols *= header.dims[i];
  Tensor m(rows, cols);
  if (m.size() > 0) std::memcpy(m.data(), data.data(), data.size() * sizeof(double));
  return m;
}

}  // namespace svcdiff
