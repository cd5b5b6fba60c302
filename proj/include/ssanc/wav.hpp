#pragma once

// Minimal RIFF/WAVE reader and writer. Reads 16/24/32-bit PCM and 32/64-bit
// IEEE float (plain or WAVE_FORMAT_EXTENSIBLE); writes 16/24-bit PCM or
// 32-bit float. Samples are exchanged as doubles in [-1, 1).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssanc/convmat.hpp"
#include "ssanc/error.hpp"

namespace ssanc::wav {

enum class SampleFormat { pcm16, pcm24, float32 };

struct Audio {
  double fs = 0.0;
  std::vector<Vector> channels;  // one vector per channel, equal lengths

  Index frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

inline Audio read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open WAV file '" + path.string() + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return LoadError("'" + path.string() + "': " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_bytes = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t size = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size() && std::memcmp(chunk, "data", 4) != 0)
      throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      const unsigned char* f = buf.data() + body;
      format = detail::le16(f);
      channels = detail::le16(f + 2);
      rate = detail::le32(f + 4);
      bits = detail::le16(f + 14);
      if (format == detail::kFormatExtensible) {
        if (size < 40) throw fail("short extensible fmt chunk");
        format = detail::le16(f + 24);  // first two bytes of the sub-format GUID
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      data_bytes = std::min<std::size_t>(size, buf.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");

  const bool pcm = format == detail::kFormatPcm;
  const bool flt = format == detail::kFormatFloat;
  if (!(pcm && (bits == 16 || bits == 24 || bits == 32)) && !(flt && (bits == 32 || bits == 64)))
    throw fail("unsupported sample format (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_bytes / (width * channels);
  Audio audio;
  audio.fs = rate;
  audio.channels.assign(channels, Vector::Zero(static_cast<Index>(frames)));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + (i * channels + c) * width;
      double v = 0.0;
      if (flt && bits == 32) {
        float f;
        std::uint32_t u = detail::le32(s);
        std::memcpy(&f, &u, 4);
        v = f;
      } else if (flt) {
        std::uint64_t u = std::uint64_t(detail::le32(s)) | std::uint64_t(detail::le32(s + 4)) << 32;
        std::memcpy(&v, &u, 8);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::le16(s)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = std::int32_t(s[0]) | std::int32_t(s[1]) << 8 | std::int32_t(s[2]) << 16;
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(detail::le32(s)) / 2147483648.0;
      }
      audio.channels[c][static_cast<Index>(i)] = v;
    }
  }
  return audio;
}

/// Read a file that must hold exactly one channel.
inline Vector read_mono(const std::filesystem::path& path, double* fs = nullptr) {
  Audio a = read(path);
  if (a.channels.size() != 1)
    throw LoadError("'" + path.string() + "': expected a mono file, found " +
                    std::to_string(a.channels.size()) + " channels");
  if (fs != nullptr) *fs = a.fs;
  return std::move(a.channels.front());
}

inline void write(const std::filesystem::path& path, const Audio& audio,
                  SampleFormat format = SampleFormat::float32) {
  if (audio.channels.empty()) throw InvalidArgument("wav::write: no channels");
  const Index frames = audio.frames();
  for (const auto& c : audio.channels)
    if (c.size() != frames) throw InvalidArgument("wav::write: channel lengths differ");

  const std::uint16_t nch = static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : format == SampleFormat::pcm24 ? 24 : 32;
  const std::uint32_t width = bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames) * nch * width;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(audio.fs));

  std::vector<unsigned char> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(b, 16);
  detail::put16(b, format == SampleFormat::float32 ? detail::kFormatFloat : detail::kFormatPcm);
  detail::put16(b, nch);
  detail::put32(b, rate);
  detail::put32(b, rate * nch * width);
  detail::put16(b, static_cast<std::uint16_t>(nch * width));
  detail::put16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put32(b, data_bytes);

  for (Index i = 0; i < frames; ++i) {
    for (const auto& c : audio.channels) {
      const double v = c[i];
      if (format == SampleFormat::float32) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put32(b, u);
      } else if (format == SampleFormat::pcm16) {
        const long q = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
        detail::put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        const long q = std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L);
        const auto u = static_cast<std::uint32_t>(q);
        for (int k = 0; k < 3; ++k) b.push_back(static_cast<unsigned char>(u >> (8 * k)));
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write WAV file '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

inline void write_mono(const std::filesystem::path& path, const Vector& samples, double fs,
                       SampleFormat format = SampleFormat::float32) {
  write(path, Audio{fs, {samples}}, format);
}

}  // namespace ssanc::wav
