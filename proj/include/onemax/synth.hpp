#pragma once

// Synthetic desk-scale event corpus: C event classes with distinct
// time-frequency signatures plus four environmental-style noises, written
// as 16-bit WAVs with a manifest.
//
// Class c uses signature kind c % 6; classes beyond the first six reuse a
// kind with its frequencies shifted by 45% per cycle.
//   0 tone burst        2 down-chirp        4 click train
//   1 up-chirp          3 AM band noise     5 harmonic stack

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "onemax/data.hpp"
#include "onemax/dsp.hpp"
#include "onemax/error.hpp"
#include "onemax/manifest.hpp"
#include "onemax/rng.hpp"
#include "onemax/wav.hpp"

namespace onemax::synth {

struct SynthConfig {
  std::size_t n_classes = 5;
  std::size_t per_class = 16;
  std::uint32_t sample_rate = 16000;
  double min_duration = 0.3;  // seconds
  double max_duration = 1.5;
  double noise_duration = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) throw InvalidArgument("synth: need at least 2 classes");
    if (per_class < 3) throw InvalidArgument("synth: need at least 3 instances per class (train/validation/test)");
    if (sample_rate < 8000) throw InvalidArgument("synth: sample rate must be >= 8000 Hz");
    if (!(min_duration > 0.0 && min_duration <= max_duration))
      throw InvalidArgument("synth: need 0 < min_duration <= max_duration");
    if (min_duration * sample_rate < sample_rate / 10.0)
      throw InvalidArgument("synth: events must be at least one 100 ms analysis window long");
    if (noise_duration < max_duration) throw InvalidArgument("synth: noise must be at least as long as the longest event");
  }
};

inline constexpr std::array<const char*, 6> kKindNames = {"tone", "upchirp", "downchirp", "amnoise", "clicks",
                                                          "harmonic"};
inline constexpr std::array<const char*, 4> kNoiseNames = {"babble", "machinery", "pink", "white"};

inline std::string class_label(std::size_t c) {
  const std::string idx = (c < 10 ? "0" : "") + std::to_string(c);
  return "c" + idx + "_" + kKindNames[c % kKindNames.size()];
}

// Per-class counts in 40/10/30 proportion.
struct SplitCounts {
  std::size_t train, validation, test;
};

inline SplitCounts split_counts(std::size_t per_class) {
  const std::size_t train = std::max<std::size_t>(1, per_class / 2);
  const std::size_t val = std::max<std::size_t>(1, per_class / 8);
  if (train + val >= per_class) throw InvalidArgument("synth: too few instances per class for three splits");
  return {train, val, per_class - train - val};
}

namespace detail {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double envelope(std::size_t n, std::size_t len, std::size_t ramp) {
  ramp = std::min(ramp, len / 2);
  if (ramp == 0) return 1.0;
  if (n < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n) / static_cast<double>(ramp));
  if (n >= len - ramp)
    return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(len - 1 - n) / static_cast<double>(ramp));
  return 1.0;
}

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

inline void normalize_rms(std::vector<double>& x, double rms) {
  const double cur = std::sqrt(data::mean_square(x));
  if (cur > 0.0)
    for (double& v : x) v *= rms / cur;
}

}  // namespace detail

struct EventInfo {
  std::size_t class_index = 0;
  double duration = 0.0;  // seconds
  double pitch = 1.0;     // jitter factor
  double amplitude = 0.0; // peak
};

inline dsp::Waveform make_event(std::size_t class_index, const SynthConfig& cfg, std::uint64_t seed,
                                EventInfo* info = nullptr) {
  using detail::kTwoPi;
  Rng rng(seed);
  const double fs = cfg.sample_rate;
  const double duration = rng.uniform(cfg.min_duration, cfg.max_duration);
  const double pitch = rng.uniform(0.95, 1.05);
  const double amplitude = rng.uniform(0.3, 0.9);
  const double shift = 1.0 + 0.45 * static_cast<double>(class_index / kKindNames.size());
  const double f = pitch * shift;
  const double nyq_guard = 0.45 * fs;
  const auto total = static_cast<std::size_t>(std::floor(duration * fs));
  const double clip_dur = static_cast<double>(total) / fs;
  // Recordings start with silence and the event sits inside the clip.
  // Without a fully silent frame, min-subtraction would erase stationary
  // classes (tones, clicks, harmonics) row by row.
  const std::size_t lead = std::min(total / 2, static_cast<std::size_t>(rng.uniform(0.10, 0.15) * fs));
  const std::size_t tail = std::min(total / 8, static_cast<std::size_t>(0.02 * fs));
  const std::size_t n = total - lead - tail;
  const double dur = static_cast<double>(n) / fs;

  std::vector<double> x(n, 0.0);
  const double phase0 = rng.uniform(0.0, kTwoPi);
  switch (class_index % kKindNames.size()) {
    case 0: {  // stationary tone
      const double f0 = std::min(1000.0 * f, nyq_guard);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(kTwoPi * f0 * (i / fs) + phase0);
      break;
    }
    case 1:
    case 2: {  // linear chirp
      const bool up = class_index % kKindNames.size() == 1;
      const double fa = std::min((up ? 400.0 : 3200.0) * f, nyq_guard);
      const double fb = std::min((up ? 2800.0 : 600.0) * f, nyq_guard);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / fs;
        x[i] = std::sin(kTwoPi * (fa * t + 0.5 * (fb - fa) * t * t / dur) + phase0);
      }
      break;
    }
    case 3: {  // amplitude-modulated band noise around 2.2 kHz
      const double fc = std::min(2200.0 * f, nyq_guard / 1.2);
      constexpr int kPartials = 40;
      for (int k = 0; k < kPartials; ++k) {
        const double fk = rng.uniform(0.8 * fc, 1.2 * fc);
        const double ph = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(kTwoPi * fk * (i / fs) + ph);
      }
      const double fm = 8.0 * pitch;
      for (std::size_t i = 0; i < n; ++i) x[i] *= 0.5 + 0.5 * std::sin(kTwoPi * fm * (i / fs));
      break;
    }
    case 4: {  // click train: 2 ms decaying bursts at ~40 Hz
      const double carrier = std::min(4000.0 * f, nyq_guard);
      const auto period = static_cast<std::size_t>(fs / (40.0 * pitch));
      const auto click_len = static_cast<std::size_t>(0.006 * fs);
      for (std::size_t start = 0; start < n; start += period)
        for (std::size_t k = 0; k < click_len && start + k < n; ++k) {
          const double t = k / fs;
          x[start + k] += std::exp(-t / 0.0015) * std::sin(kTwoPi * carrier * t);
        }
      break;
    }
    case 5: {  // harmonic stack on a 220 Hz fundamental
      const double f0 = 220.0 * f;
      for (int h = 1; h <= 8; ++h) {
        if (h * f0 >= nyq_guard) break;
        const double ph = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(kTwoPi * h * f0 * (i / fs) + ph) / h;
      }
      break;
    }
  }
  const auto ramp = static_cast<std::size_t>(0.01 * fs);
  for (std::size_t i = 0; i < n; ++i) x[i] *= detail::envelope(i, n, ramp);
  detail::normalize_peak(x, amplitude);

  std::vector<double> clip(total, 0.0);
  std::copy(x.begin(), x.end(), clip.begin() + static_cast<std::ptrdiff_t>(lead));
  if (info) *info = {class_index, clip_dur, pitch, amplitude};
  return {std::move(clip), cfg.sample_rate};
}

// The four noises, in kNoiseNames order, each RMS 0.1.
inline dsp::Waveform make_noise(std::size_t kind, const SynthConfig& cfg, std::uint64_t seed) {
  using detail::kTwoPi;
  Rng rng(seed);
  const double fs = cfg.sample_rate;
  const auto n = static_cast<std::size_t>(std::ceil(cfg.noise_duration * fs));
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case 0: {  // babble: 20 voiced "talkers" with syllabic modulation
      for (int talker = 0; talker < 20; ++talker) {
        const double f0 = rng.uniform(100.0, 250.0);
        const double rate = rng.uniform(3.0, 6.0);
        const double am_phase = rng.uniform(0.0, kTwoPi);
        const double vib = rng.uniform(2.0, 5.0);
        std::array<double, 5> ph;
        for (double& p : ph) p = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < n; ++i) {
          const double t = i / fs;
          const double am = std::abs(std::sin(std::numbers::pi * rate * t + am_phase));
          const double inst = f0 * (1.0 + 0.03 * std::sin(kTwoPi * vib * t));
          double v = 0.0;
          for (int h = 1; h <= 5; ++h) v += std::sin(kTwoPi * h * inst * t + ph[h - 1]) / h;
          x[i] += am * v;
        }
      }
      break;
    }
    case 1: {  // machinery: 50 Hz hum harmonics with slow AM and a broadband floor
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / fs;
        double hum = 0.0;
        for (int h = 1; h <= 10; ++h) hum += std::sin(kTwoPi * 50.0 * h * t + 0.3 * h) / h;
        x[i] = hum * (1.0 + 0.5 * std::sin(kTwoPi * 2.0 * t)) + 0.2 * rng.normal();
      }
      break;
    }
    case 2: {  // pink-like: white noise through a 1/f shaping filter bank
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        x[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case 3:
    default:
      for (double& v : x) v = rng.normal();
      break;
  }
  detail::normalize_rms(x, 0.1);
  return {std::move(x), cfg.sample_rate};
}

struct SynthResult {
  Manifest manifest;
  std::filesystem::path manifest_path;
  std::filesystem::path noise_dir;
  std::vector<EventInfo> events;  // in manifest record order
};

// Writes <out>/events/*.wav, <out>/noise/*.wav and <out>/manifest.tsv.
inline SynthResult synth_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "events", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "noise", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const auto counts = split_counts(cfg.per_class);
  SynthResult res;
  std::vector<ManifestRecord> records;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const std::string label = class_label(c);
    for (std::size_t k = 0; k < cfg.per_class; ++k) {
      EventInfo info;
      const auto wave = make_event(c, cfg, derive_seed(cfg.seed, "synth.event", c, k), &info);
      const std::string rel = "events/" + label + "_" + (k < 10 ? "0" : "") + std::to_string(k) + ".wav";
      save_wav(out_dir / rel, wave);
      const Split split = k < counts.train                      ? Split::Train
                          : k < counts.train + counts.validation ? Split::Validation
                                                                 : Split::Test;
      records.push_back({rel, label, split, Condition::Clean, "-"});
      res.events.push_back(info);
    }
  }
  for (std::size_t i = 0; i < kNoiseNames.size(); ++i)
    save_wav(out_dir / "noise" / (std::string(kNoiseNames[i]) + ".wav"),
             make_noise(i, cfg, derive_seed(cfg.seed, "synth.noise", i)));

  res.manifest = Manifest(std::move(records), out_dir);
  res.manifest_path = out_dir / "manifest.tsv";
  res.noise_dir = out_dir / "noise";
  res.manifest.save(res.manifest_path);
  return res;
}

}  // namespace onemax::synth
