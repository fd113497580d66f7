#pragma once

// RIFF/WAVE PCM 16-bit mono reader and writer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "onemax/binary_io.hpp"
#include "onemax/dsp.hpp"
#include "onemax/error.hpp"

namespace onemax {

// Decodes a WAV image. expected_rate == 0 accepts any rate; otherwise a
// differing rate is a format error (there is no resampling).
inline dsp::Waveform decode_wav(std::string_view bytes, std::uint32_t expected_rate = 16000,
                                const std::string& what = "WAV") {
  ByteReader r(bytes, what);
  r.expect_magic("RIFF");
  r.u32();  // RIFF size; files in the wild get this wrong, so it is not trusted
  r.expect_magic("WAVE");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (true) {
    if (r.remaining() < 8) r.fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
    std::string id(4, '\0');
    for (char& ch : id) ch = static_cast<char>(r.u8());
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) r.fail("chunk '" + id + "' runs past end of file (truncated?)");
    if (id == "fmt ") {
      if (size < 16) r.fail("fmt chunk too short");
      format = static_cast<std::uint16_t>(r.u8() | (r.u8() << 8));
      channels = static_cast<std::uint16_t>(r.u8() | (r.u8() << 8));
      rate = r.u32();
      r.u32();  // byte rate
      r.u8();
      r.u8();  // block align
      bits = static_cast<std::uint16_t>(r.u8() | (r.u8() << 8));
      std::uint32_t rest = size - 16;
      if (format == 0xFFFE && rest >= 10) {
        // WAVE_FORMAT_EXTENSIBLE: cbSize, valid bits, channel mask, subformat GUID.
        for (int i = 0; i < 8; ++i) r.u8();
        format = static_cast<std::uint16_t>(r.u8() | (r.u8() << 8));
        rest -= 10;
      }
      for (std::uint32_t i = 0; i < rest; ++i) r.u8();
      if (size % 2 && r.remaining() > 0) r.u8();
      have_fmt = true;
      if (format != 1) r.fail("not PCM (format tag " + std::to_string(format) + ")");
      if (channels != 1) r.fail("expected mono, found " + std::to_string(channels) + " channels");
      if (bits != 16) r.fail("expected 16-bit samples, found " + std::to_string(bits) + "-bit");
      if (rate == 0) r.fail("sample rate is zero");
      if (expected_rate != 0 && rate != expected_rate)
        r.fail("sample rate " + std::to_string(rate) + " Hz, expected " + std::to_string(expected_rate) +
               " Hz (no resampling is performed)");
    } else if (id == "data") {
      if (!have_fmt) r.fail("data chunk before fmt chunk");
      if (size % 2) r.fail("data chunk has odd byte count for 16-bit samples");
      dsp::Waveform wave;
      wave.sample_rate = rate;
      wave.samples.resize(size / 2);
      for (double& s : wave.samples) {
        const auto lo = r.u8();
        const auto hi = r.u8();
        const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        s = static_cast<double>(v) / 32768.0;
      }
      return wave;
    } else {
      for (std::uint32_t i = 0; i < size; ++i) r.u8();
      if (size % 2 && r.remaining() > 0) r.u8();
    }
  }
}

inline dsp::Waveform load_wav(const std::filesystem::path& path, std::uint32_t expected_rate = 16000) {
  return decode_wav(read_file_bytes(path), expected_rate, path.string());
}

struct WavEncoding {
  std::string bytes;
  std::size_t clamped = 0;  // samples outside the int16 range
};

// Quantizes to int16 with round-to-nearest, clamping out-of-range samples.
inline WavEncoding encode_wav(const dsp::Waveform& wave) {
  WavEncoding enc;
  ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  w.magic("RIFF");
  w.u32(36 + data_bytes);
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u8(1);
  w.u8(0);  // PCM
  w.u8(1);
  w.u8(0);  // mono
  w.u32(wave.sample_rate);
  w.u32(wave.sample_rate * 2);
  w.u8(2);
  w.u8(0);  // block align
  w.u8(16);
  w.u8(0);
  w.magic("data");
  w.u32(data_bytes);
  for (double s : wave.samples) {
    double q = std::nearbyint(s * 32768.0);
    if (q > 32767.0 || q < -32768.0) {
      ++enc.clamped;
      q = std::clamp(q, -32768.0, 32767.0);
    }
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    w.u8(static_cast<std::uint8_t>(v & 0xff));
    w.u8(static_cast<std::uint8_t>(v >> 8));
  }
  enc.bytes = w.take();
  return enc;
}

// Returns the number of clamped samples.
inline std::size_t save_wav(const std::filesystem::path& path, const dsp::Waveform& wave) {
  auto enc = encode_wav(wave);
  write_file_bytes(path, enc.bytes);
  return enc.clamped;
}

}  // namespace onemax
