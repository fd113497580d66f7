#pragma once

// Spectrogram image features: framed magnitude STFT, frequency averaging
// down to F bins, per-row minimum subtraction and an optional short-time
// energy row.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "onemax/binary_io.hpp"
#include "onemax/error.hpp"
#include "onemax/matrix.hpp"

namespace onemax::dsp {

struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 16000;
};

// Analysis window of `window_len` physical samples, zero-padded to `fft_size`.
struct FrameConfig {
  std::size_t window_len = 1600;  // 100 ms at 16 kHz
  std::size_t hop = 160;          // 10 ms at 16 kHz
  std::size_t fft_size = 2048;

  void validate() const {
    if (window_len == 0 || window_len > fft_size)
      throw InvalidArgument("FrameConfig: need 0 < window_len <= fft_size");
    if (hop == 0) throw InvalidArgument("FrameConfig: hop must be positive");
    if (!std::has_single_bit(fft_size)) throw InvalidArgument("FrameConfig: fft_size must be a power of two");
  }
};

// Non-negative magnitudes; rows are frequency bins, columns time frames.
struct Spectrogram {
  Matrix values;
  std::size_t n_bins() const { return values.rows(); }
  std::size_t n_frames() const { return values.cols(); }
};

struct Sif {
  Matrix values;
  std::size_t n_freq = 0;
  bool has_energy = false;
  std::size_t n_rows() const { return values.rows(); }
  std::size_t n_frames() const { return values.cols(); }
  friend bool operator==(const Sif&, const Sif&) = default;
};

// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (N - 1)).
inline std::vector<double> hamming_window(std::size_t length) {
  if (length == 0) throw InvalidArgument("hamming_window: length must be >= 1");
  if (length == 1) return {0.08};
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  return w;
}

// Iterative radix-2 complex FFT with a precomputed twiddle table. Twiddles
// are evaluated directly rather than by recurrence to keep the error at the
// level of a single cos/sin evaluation.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
    if (!std::has_single_bit(n)) throw InvalidArgument("Fft: size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    const int bits = std::countr_zero(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  void transform(std::vector<std::complex<double>>& x) const {
    if (x.size() != n_) throw ShapeError("Fft: buffer size mismatch");
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const auto t = twiddle_[k * stride] * x[start + k + half];
          x[start + k + half] = x[start + k] - t;
          x[start + k] += t;
        }
      }
    }
  }

  // |X(f)| for f = 0 .. n/2 - 1 of a real frame zero-padded to n.
  void half_magnitudes(std::span<const double> frame, std::span<double> out,
                       std::vector<std::complex<double>>& scratch) const {
    if (frame.size() > n_) throw InvalidArgument("dft_magnitude: frame longer than fft_size");
    scratch.assign(n_, {0.0, 0.0});
    for (std::size_t i = 0; i < frame.size(); ++i) scratch[i] = {frame[i], 0.0};
    transform(scratch);
    for (std::size_t f = 0; f < n_ / 2; ++f) out[f] = std::abs(scratch[f]);
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<std::size_t> rev_;
};

inline std::vector<double> dft_magnitude(std::span<const double> frame, std::size_t fft_size) {
  if (frame.size() > fft_size) throw InvalidArgument("dft_magnitude: frame longer than fft_size");
  Fft fft(fft_size);
  std::vector<double> out(fft_size / 2);
  std::vector<std::complex<double>> scratch;
  fft.half_magnitudes(frame, out, scratch);
  return out;
}

inline std::size_t frame_count(std::size_t n_samples, const FrameConfig& cfg) {
  if (n_samples < cfg.window_len) return 0;
  return 1 + (n_samples - cfg.window_len) / cfg.hop;
}

inline Spectrogram spectrogram(const Waveform& wave, const FrameConfig& cfg) {
  cfg.validate();
  if (wave.sample_rate == 0) throw InvalidArgument("spectrogram: sample_rate must be positive");
  if (wave.samples.size() < cfg.window_len)
    throw InvalidArgument("spectrogram: waveform has " + std::to_string(wave.samples.size()) +
                          " samples, shorter than one " + std::to_string(cfg.window_len) + "-sample window");
  const std::size_t n_frames = frame_count(wave.samples.size(), cfg);
  const auto window = hamming_window(cfg.window_len);
  const Fft fft(cfg.fft_size);

  Spectrogram spec{Matrix(cfg.fft_size / 2, n_frames)};
  std::vector<double> frame(cfg.window_len);
  std::vector<std::complex<double>> scratch;
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* src = wave.samples.data() + t * cfg.hop;
    for (std::size_t n = 0; n < cfg.window_len; ++n) frame[n] = src[n] * window[n];
    fft.half_magnitudes(frame, spec.values.col(t), scratch);
  }
  return spec;
}

// Averages W = floor(n_bins / n_out) adjacent bins; bins past n_out * W are
// dropped.
inline Spectrogram downsample_freq(const Spectrogram& spec, std::size_t n_out_bins) {
  if (n_out_bins == 0) throw InvalidArgument("downsample_freq: n_out_bins must be >= 1");
  if (n_out_bins > spec.n_bins())
    throw InvalidArgument("downsample_freq: n_out_bins exceeds input bin count");
  const std::size_t w = spec.n_bins() / n_out_bins;
  Spectrogram out{Matrix(n_out_bins, spec.n_frames())};
  for (std::size_t t = 0; t < spec.n_frames(); ++t) {
    const auto in = spec.values.col(t);
    auto dst = out.values.col(t);
    for (std::size_t f = 0; f < n_out_bins; ++f) {
      double sum = 0.0;
      for (std::size_t k = 0; k < w; ++k) sum += in[f * w + k];
      dst[f] = sum / static_cast<double>(w);
    }
  }
  return out;
}

// Subtracts each row's minimum over time. x - min(x) is exact for the
// minimising entry, so every row minimum is exactly zero afterwards.
inline Spectrogram denoise(const Spectrogram& spec) {
  if (spec.values.empty()) throw InvalidArgument("denoise: empty spectrogram");
  Spectrogram out = spec;
  for (std::size_t f = 0; f < spec.n_bins(); ++f) {
    double lo = spec.values(f, 0);
    for (std::size_t t = 1; t < spec.n_frames(); ++t) lo = std::min(lo, spec.values(f, t));
    for (std::size_t t = 0; t < spec.n_frames(); ++t) out.values(f, t) = spec.values(f, t) - lo;
  }
  return out;
}

struct SifConfig {
  FrameConfig frame;
  std::size_t n_freq = 52;
  bool with_energy = false;
  // Multiplies the appended energy row; 1.0 keeps the raw column sum.
  double energy_scale = 1.0;
};

inline Sif extract_sif(const Waveform& wave, const SifConfig& cfg) {
  const Spectrogram dn = denoise(downsample_freq(spectrogram(wave, cfg.frame), cfg.n_freq));
  Sif sif{dn.values, cfg.n_freq, cfg.with_energy};
  if (cfg.with_energy) {
    std::vector<double> energy(sif.n_frames());
    for (std::size_t t = 0; t < sif.n_frames(); ++t) {
      double e = 0.0;
      for (double v : dn.values.col(t)) e += v;
      energy[t] = e * cfg.energy_scale;
    }
    sif.values.append_row(energy);
  }
  return sif;
}

inline Sif extract_sif(const Waveform& wave, const FrameConfig& frame, std::size_t n_freq,
                       bool with_energy) {
  return extract_sif(wave, SifConfig{frame, n_freq, with_energy, 1.0});
}

// "SIF1", u32 rows, u32 cols, u8 has_energy, rows*cols f64 column-major.
inline std::string encode_sif(const Sif& sif) {
  ByteWriter w;
  w.magic("SIF1");
  w.u32(static_cast<std::uint32_t>(sif.n_rows()));
  w.u32(static_cast<std::uint32_t>(sif.n_frames()));
  w.u8(sif.has_energy ? 1 : 0);
  w.f64s(sif.values.data());
  return w.take();
}

inline Sif decode_sif(std::string_view bytes, const std::string& what = "SIF") {
  ByteReader r(bytes, what);
  r.expect_magic("SIF1");
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  const std::uint8_t flag = r.u8();
  if (flag > 1) r.fail("has_energy flag must be 0 or 1");
  if (flag == 1 && rows < 1) r.fail("energy flag set on an empty image");
  if (r.remaining() != rows * cols * 8) r.fail("payload size does not match header");
  Sif sif{Matrix(rows, cols), rows - flag, flag == 1};
  r.f64s(sif.values.data());
  return sif;
}

inline void write_sif(const std::filesystem::path& path, const Sif& sif) {
  write_file_bytes(path, encode_sif(sif));
}

inline Sif read_sif(const std::filesystem::path& path) {
  return decode_sif(read_file_bytes(path), path.string());
}

}  // namespace onemax::dsp
