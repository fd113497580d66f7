#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "onemax/dsp.hpp"
#include "onemax/error.hpp"
#include "onemax/rng.hpp"

using namespace onemax;
using namespace onemax::dsp;

namespace {

// O(L^2) reference, independent of the FFT code path.
std::vector<double> naive_dft_magnitude(const std::vector<double>& frame, std::size_t n) {
  std::vector<double> out(n / 2);
  for (std::size_t f = 0; f < n / 2; ++f) {
    long double re = 0, im = 0;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((f * i) % n) / n;
      re += frame[i] * std::cos(a);
      im += frame[i] * std::sin(a);
    }
    out[f] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

std::vector<double> random_frame(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

Waveform tone(double freq, double seconds, double amp = 0.5) {
  Waveform w;
  const auto n = static_cast<std::size_t>(seconds * 16000);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * std::numbers::pi * freq * i / 16000.0);
  return w;
}

}  // namespace

TEST(Hamming, LengthOneIsPointZeroEight) {
  const auto w = hamming_window(1);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_DOUBLE_EQ(w[0], 0.08);
}

TEST(Hamming, SymmetricWithUnitPeak) {
  const auto w = hamming_window(1601);
  EXPECT_NEAR(w.front(), 0.08, 1e-15);
  EXPECT_NEAR(w.back(), 0.08, 1e-15);
  EXPECT_NEAR(w[800], 1.0, 1e-15);
  for (std::size_t n = 0; n < w.size(); ++n) EXPECT_NEAR(w[n], w[w.size() - 1 - n], 1e-15);
  const auto w2 = hamming_window(1600);
  for (std::size_t n = 0; n < 1600; ++n)
    EXPECT_NEAR(w2[n], 0.54 - 0.46 * std::cos(2 * std::numbers::pi * n / 1599.0), 1e-15);
}

TEST(Hamming, ZeroLengthThrows) { EXPECT_THROW(hamming_window(0), InvalidArgument); }

TEST(Fft, MatchesNaiveDftAcrossSizes) {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 256u, 2048u}) {
    for (std::size_t len : {std::size_t{1}, n / 2 + 1, n}) {
      if (len > n) continue;
      const auto x = random_frame(rng, len);
      const auto got = dft_magnitude(x, n);
      const auto want = naive_dft_magnitude(x, n);
      ASSERT_EQ(got.size(), n / 2);
      for (std::size_t f = 0; f < n / 2; ++f) EXPECT_NEAR(got[f], want[f], 1e-9) << "n=" << n << " f=" << f;
    }
  }
}

TEST(Fft, Parseval) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2048;
    const auto x = random_frame(rng, 1600);
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
    Fft(n).transform(buf);
    double time_energy = 0, freq_energy = 0;
    for (double v : x) time_energy += v * v;
    for (const auto& c : buf) freq_energy += std::norm(c);
    EXPECT_NEAR(freq_energy / n, time_energy, 1e-9 * time_energy);
  }
}

TEST(Fft, PureBinToneConcentrates) {
  const std::size_t n = 2048, k = 100;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2 * std::numbers::pi * k * i / n);
  const auto m = dft_magnitude(x, n);
  EXPECT_NEAR(m[k], n / 2.0, 1e-8);
  for (std::size_t f = 0; f < n / 2; ++f) {
    if (f != k) {
      EXPECT_LT(m[f], 1e-8);
    }
  }
}

TEST(Fft, RejectsBadSizes) {
  EXPECT_THROW(Fft(1000), InvalidArgument);
  EXPECT_THROW(dft_magnitude(std::vector<double>(9, 0.0), 8), InvalidArgument);
}

TEST(Framing, FrameCount) {
  FrameConfig cfg;
  EXPECT_EQ(frame_count(16000, cfg), 91u);
  EXPECT_EQ(frame_count(1600, cfg), 1u);
  EXPECT_EQ(frame_count(1599, cfg), 0u);
  EXPECT_EQ(frame_count(1759, cfg), 1u);
  EXPECT_EQ(frame_count(1760, cfg), 2u);
}

TEST(Framing, ConfigValidation) {
  EXPECT_THROW((FrameConfig{0, 160, 2048}.validate()), InvalidArgument);
  EXPECT_THROW((FrameConfig{4096, 160, 2048}.validate()), InvalidArgument);
  EXPECT_THROW((FrameConfig{1600, 0, 2048}.validate()), InvalidArgument);
  EXPECT_THROW((FrameConfig{1600, 160, 2000}.validate()), InvalidArgument);
  EXPECT_NO_THROW(FrameConfig{}.validate());
}

TEST(Spectrogram, ShapeAndColumnsMatchWindowedDft) {
  Rng rng(3);
  Waveform w;
  w.samples = random_frame(rng, 16000);
  FrameConfig cfg;
  const auto s = spectrogram(w, cfg);
  EXPECT_EQ(s.n_bins(), 1024u);
  EXPECT_EQ(s.n_frames(), 91u);
  const auto win = hamming_window(1600);
  for (std::size_t t : {0u, 45u, 90u}) {
    std::vector<double> frame(1600);
    for (std::size_t i = 0; i < 1600; ++i) frame[i] = w.samples[t * 160 + i] * win[i];
    const auto want = naive_dft_magnitude(frame, 2048);
    for (std::size_t f = 0; f < 1024; f += 37) EXPECT_NEAR(s.values(f, t), want[f], 1e-9);
  }
}

TEST(Spectrogram, RejectsShortWave) {
  Waveform w;
  w.samples.assign(1599, 0.1);
  EXPECT_THROW(spectrogram(w, FrameConfig{}), InvalidArgument);
}

TEST(Spectrogram, ToneLandsInExpectedBin) {
  const auto s = spectrogram(tone(1000.0, 0.5), FrameConfig{});
  // 1000 Hz at 16 kHz with 2048 points: bin 128.
  for (std::size_t t = 0; t < s.n_frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < s.n_bins(); ++f)
      if (s.values(f, t) > s.values(best, t)) best = f;
    EXPECT_EQ(best, 128u);
  }
}

TEST(Downsample, AveragesNineteenBinsAndDropsTail) {
  Spectrogram s{Matrix(1024, 2)};
  for (std::size_t f = 0; f < 1024; ++f) {
    s.values(f, 0) = static_cast<double>(f);
    s.values(f, 1) = 1.0;
  }
  const auto d = downsample_freq(s, 52);
  ASSERT_EQ(d.n_bins(), 52u);
  for (std::size_t k = 0; k < 52; ++k) {
    double sum = 0;
    for (std::size_t j = 0; j < 19; ++j) sum += static_cast<double>(k * 19 + j);
    EXPECT_DOUBLE_EQ(d.values(k, 0), sum / 19.0);
    EXPECT_DOUBLE_EQ(d.values(k, 1), 1.0);
  }
  // Bins 988..1023 never contribute.
  Spectrogram spike{Matrix(1024, 1)};
  for (std::size_t f = 988; f < 1024; ++f) spike.values(f, 0) = 1e6;
  const auto ds = downsample_freq(spike, 52);
  for (std::size_t k = 0; k < 52; ++k) EXPECT_EQ(ds.values(k, 0), 0.0);
}

TEST(Downsample, IdentityAndErrors) {
  Spectrogram s{Matrix(8, 3, 2.5)};
  EXPECT_EQ(downsample_freq(s, 8).values, s.values);
  EXPECT_THROW(downsample_freq(s, 0), InvalidArgument);
  EXPECT_THROW(downsample_freq(s, 9), InvalidArgument);
}

TEST(Denoise, RowMinimaExactlyZero) {
  Rng rng(9);
  Spectrogram s{Matrix(20, 37)};
  for (double& v : s.values.data()) v = rng.uniform(0.1, 7.3);
  const auto d = denoise(s);
  for (std::size_t f = 0; f < 20; ++f) {
    double lo = d.values(f, 0);
    for (std::size_t t = 0; t < 37; ++t) {
      lo = std::min(lo, d.values(f, t));
      EXPECT_GE(d.values(f, t), 0.0);
    }
    EXPECT_EQ(lo, 0.0);
  }
}

TEST(Denoise, ConstantRowAndSingleFrameBecomeZero) {
  const auto flat = denoise(Spectrogram{Matrix(3, 5, 4.25)});
  for (double v : flat.values.data()) EXPECT_EQ(v, 0.0);
  const auto one = denoise(Spectrogram{Matrix(4, 1, 1.5)});
  for (double v : one.values.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(denoise(Spectrogram{}), InvalidArgument);
}

TEST(Sif, ShapeWithAndWithoutEnergy) {
  const auto w = tone(700.0, 1.0);
  const auto a = extract_sif(w, FrameConfig{}, 52, false);
  EXPECT_EQ(a.n_rows(), 52u);
  EXPECT_EQ(a.n_frames(), 91u);
  EXPECT_FALSE(a.has_energy);
  const auto b = extract_sif(w, FrameConfig{}, 52, true);
  EXPECT_EQ(b.n_rows(), 53u);
  EXPECT_TRUE(b.has_energy);
  for (std::size_t t = 0; t < b.n_frames(); ++t) {
    double sum = 0;
    for (std::size_t k = 0; k < 52; ++k) {
      EXPECT_EQ(b.values(k, t), a.values(k, t));
      sum += a.values(k, t);
    }
    EXPECT_DOUBLE_EQ(b.values(52, t), sum);
  }
}

TEST(Sif, EnergyScaleMultipliesOnlyEnergyRow) {
  const auto w = tone(1500.0, 0.4);
  SifConfig c1, c2;
  c1.with_energy = c2.with_energy = true;
  c2.energy_scale = 0.25;
  const auto a = extract_sif(w, c1), b = extract_sif(w, c2);
  for (std::size_t t = 0; t < a.n_frames(); ++t) {
    for (std::size_t k = 0; k < 52; ++k) EXPECT_EQ(a.values(k, t), b.values(k, t));
    EXPECT_DOUBLE_EQ(b.values(52, t), 0.25 * a.values(52, t));
  }
}

TEST(Sif, ShortestValidWaveHasOneFrameOfZeros) {
  Waveform w;
  w.samples.assign(1600, 0.3);
  const auto s = extract_sif(w, SifConfig{});
  EXPECT_EQ(s.n_frames(), 1u);
  for (double v : s.values.data()) EXPECT_EQ(v, 0.0);
}

TEST(SifFormat, RoundTripBitExact) {
  Rng rng(1);
  for (bool energy : {false, true}) {
    Sif s{Matrix(energy ? 53 : 52, 17), 52, energy};
    for (double& v : s.values.data()) v = rng.normal() * 1e3;
    s.values(0, 0) = -0.0;
    s.values(1, 0) = 5e-324;
    const auto bytes = encode_sif(s);
    EXPECT_EQ(bytes.substr(0, 4), "SIF1");
    const auto back = decode_sif(bytes);
    EXPECT_EQ(back, s);
    EXPECT_TRUE(std::signbit(back.values(0, 0)));
    EXPECT_EQ(encode_sif(back), bytes);
  }
}

TEST(SifFormat, RejectsCorruption) {
  Sif s{Matrix(3, 2, 1.0), 3, false};
  const auto bytes = encode_sif(s);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_sif(bad), FormatError);
  EXPECT_THROW(decode_sif(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_sif(bytes + "x"), FormatError);
  auto flag = bytes;
  flag[12] = 2;
  EXPECT_THROW(decode_sif(flag), FormatError);
  EXPECT_THROW(decode_sif(""), FormatError);
}
