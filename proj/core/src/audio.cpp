// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "svcdiff/error.hpp"

namespace svcdiff {
namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(Errc::kFormat, path.string() + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  for (std::size_t at = 12; at + 8 <= bytes.size();) {
    const std::uint8_t* chunk = bytes.data() + at;
    const std::size_t size = le32(chunk + 4);
    const std::size_t avail = std::min(size, bytes.size() - at - 8);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) format = le16(chunk + 8 + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    at += 8 + size + (size & 1);
  }
  if (!data || channels == 0 || rate == 0) throw Error(Errc::kFormat, path.string() + ": missing fmt or data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32)
    throw Error(Errc::kFormat, path.string() + ": only 16-bit PCM and 32-bit float are supported");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  AudioClip clip;
  clip.rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (f * channels + c) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float v;
        std::memcpy(&v, &u, sizeof v);
        acc += v;
      }
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  if (clip.rate <= 0) throw Error(Errc::kInvalidRate, "cannot write a clip with rate <= 0");
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.rate));
  put32(out, static_cast<std::uint32_t>(clip.rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_size);
  for (double s : clip.samples) {
    if (pcm) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      put32(out, u);
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::kIo, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(Errc::kIo, "short write to " + path.string());
}

namespace {

// Zero crossings of the interpolation kernel on each side, counted at the
// lower of the two rates.
constexpr int kZeroCrossings = 64;
constexpr double kCutoff = 0.97;
constexpr double kKaiserBeta = 8.6;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.rate <= 0 || target_rate <= 0) throw Error(Errc::kInvalidRate, "sample rates must be positive");
  if (clip.rate == target_rate) return clip;

  const long g = std::gcd(clip.rate, target_rate);
  const long up = target_rate / g;
  const long down = clip.rate / g;
  const double bandwidth = std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kCutoff;
  const double half_width = kZeroCrossings / std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const long taps_each_side = static_cast<long>(std::ceil(half_width));
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);

  auto kernel = [&](double t) {
    const double r = t / half_width;
    if (std::abs(r) >= 1.0) return 0.0;
    return bandwidth * sinc(bandwidth * t) * std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
  };

  // One tap table per output phase when the phase count is manageable.
  const long width = 2 * taps_each_side + 1;
  const bool tabulate = up <= 4096;
  std::vector<double> table;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(up * width));
    for (long phase = 0; phase < up; ++phase) {
      const double frac = static_cast<double>(phase) / static_cast<double>(up);
      for (long j = -taps_each_side; j <= taps_each_side; ++j)
        table[static_cast<std::size_t>(phase * width + j + taps_each_side)] = kernel(frac - static_cast<double>(j));
    }
  }

  const long n_in = static_cast<long>(clip.samples.size());
  const long n_out = (n_in * up + down - 1) / down;
  AudioClip out;
  out.rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long n = 0; n < n_out; ++n) {
    const long num = n * down;
    const long base = num / up;
    const long phase = num % up;
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    double acc = 0.0;
    const long j_lo = std::max(-taps_each_side, -base);
    const long j_hi = std::min(taps_each_side, n_in - 1 - base);
    for (long j = j_lo; j <= j_hi; ++j) {
      const double h = tabulate ? table[static_cast<std::size_t>(phase * width + j + taps_each_side)]
                                : kernel(frac - static_cast<double>(j));
      acc += h * clip.samples[static_cast<std::size_t>(base + j)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

AudioClip normalize(const AudioClip& clip) {
  if (clip.samples.empty()) throw Error(Errc::kEmptyClip, "cannot normalize an empty clip");
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) return clip;
  AudioClip out = clip;
  const double gain = kNormalizedPeak / peak;
  for (double& s : out.samples) s *= gain;
  return out;
}

}  // namespace svcdiff
