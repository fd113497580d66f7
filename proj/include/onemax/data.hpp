#pragma once

// Noise corruption at a target SNR, clean/multi-condition sample streams and
// zero-padded minibatches.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onemax/dsp.hpp"
#include "onemax/error.hpp"
#include "onemax/manifest.hpp"
#include "onemax/matrix.hpp"
#include "onemax/rng.hpp"
#include "onemax/wav.hpp"

namespace onemax::data {

struct NamedNoise {
  std::string name;
  dsp::Waveform wave;
};

struct NoiseBank {
  std::vector<NamedNoise> noises;

  std::size_t shortest() const {
    std::size_t n = noises.empty() ? 0 : noises.front().wave.samples.size();
    for (const auto& x : noises) n = std::min(n, x.wave.samples.size());
    return n;
  }

  void validate(std::uint32_t sample_rate) const {
    if (noises.empty()) throw InvalidArgument("noise bank is empty");
    for (const auto& n : noises)
      if (n.wave.sample_rate != sample_rate)
        throw InvalidArgument("noise '" + n.name + "' sampled at " + std::to_string(n.wave.sample_rate) +
                              " Hz, events at " + std::to_string(sample_rate) + " Hz");
  }

  // Order-sensitive hash of names and samples, used as a cache key.
  std::uint64_t fingerprint() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& n : noises) {
      h = fnv1a(n.name.data(), n.name.size(), h);
      h = fnv1a(n.wave.samples.data(), n.wave.samples.size() * sizeof(double), h);
    }
    return h;
  }
};

// Every *.wav in `dir`, sorted by file name.
inline NoiseBank load_noise_bank(const std::filesystem::path& dir, std::uint32_t expected_rate = 16000) {
  if (!std::filesystem::is_directory(dir)) throw IoError("noise directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  NoiseBank bank;
  for (const auto& f : files) bank.noises.push_back({f.stem().string(), load_wav(f, expected_rate)});
  if (bank.noises.empty()) throw IoError("no .wav files in noise directory " + dir.string());
  return bank;
}

inline double mean_square(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

struct NoiseMix {
  dsp::Waveform mixed;
  std::size_t noise_index = 0;
  std::size_t offset = 0;
  double gain = 0.0;
};

// Adds a randomly chosen noise, starting at a random offset, scaled so that
// 10 log10(P_clean / P_scaled_noise) = snr_db over the clean extent.
inline NoiseMix mix_noise_detailed(const dsp::Waveform& clean, const NoiseBank& bank, double snr_db,
                                   std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw InvalidArgument("mix_noise_at_snr: SNR must be finite");
  bank.validate(clean.sample_rate);
  const std::size_t n = clean.samples.size();
  if (n == 0) throw InvalidArgument("mix_noise_at_snr: empty clean signal");
  if (bank.shortest() < n)
    throw InvalidArgument("mix_noise_at_snr: noise shorter than event (" + std::to_string(bank.shortest()) + " < " +
                          std::to_string(n) + " samples)");
  const double ps = mean_square(clean.samples);
  if (ps == 0.0) throw InvalidArgument("mix_noise_at_snr: clean signal is silent, SNR undefined");

  Rng rng(seed);
  NoiseMix out;
  out.noise_index = static_cast<std::size_t>(rng.below(bank.noises.size()));
  const auto& noise = bank.noises[out.noise_index].wave.samples;
  out.offset = static_cast<std::size_t>(rng.below(noise.size() - n + 1));
  const std::span<const double> segment(noise.data() + out.offset, n);
  const double pn = mean_square(segment);
  if (pn == 0.0) throw InvalidArgument("mix_noise_at_snr: chosen noise segment is silent");
  out.gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  out.mixed.sample_rate = clean.sample_rate;
  out.mixed.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.mixed.samples[i] = clean.samples[i] + out.gain * segment[i];
  return out;
}

inline dsp::Waveform mix_noise_at_snr(const dsp::Waveform& clean, const NoiseBank& bank, double snr_db,
                                      std::uint64_t seed) {
  return mix_noise_detailed(clean, bank, snr_db, seed).mixed;
}

// ---------------------------------------------------------------------------
// Condition sets

enum class Regime { Mismatched, Multi };

inline std::string_view to_string(Regime r) { return r == Regime::Multi ? "multi" : "mismatched"; }

inline Regime parse_regime(std::string_view s) {
  if (s == "multi") return Regime::Multi;
  if (s == "mismatched") return Regime::Mismatched;
  throw InvalidArgument("unknown regime '" + std::string(s) + "' (expected mismatched or multi)");
}

struct ConditionOptions {
  // Corrupted copies per clean training instance, per SNR level (multi only).
  std::size_t copies_per_snr = 1;
  // Multi regime: validate on clean plus corrupted copies, not clean only.
  bool corrupted_validation = true;
};

// One sample of a stream: the clean record it comes from, the condition it
// is presented in, and how to produce it.
struct SampleRef {
  std::size_t record = 0;        // manifest record holding the clean source
  Condition condition = Condition::Clean;
  std::size_t copy = 0;          // distinguishes repeated corruptions of one source
  std::size_t class_index = 0;
  // Set when the manifest already holds this corrupted version as a file;
  // otherwise corrupted samples are mixed on the fly from mix_seed.
  std::optional<std::size_t> premixed_record;
  std::uint64_t mix_seed = 0;
  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct ConditionSet {
  std::vector<SampleRef> train;
  std::vector<SampleRef> validation;
  std::array<std::vector<SampleRef>, 4> test;  // indexed by condition_index()
};

// Mixing seed for (source, condition, copy); keyed on the path so it does
// not move when records are reordered.
inline std::uint64_t mix_seed_for(std::uint64_t seed, const std::string& source_path, Condition c, std::size_t copy) {
  return derive_seed(seed, "mix", fnv1a(source_path.data(), source_path.size()), condition_index(c), copy);
}

inline ConditionSet build_condition_set(const Manifest& manifest, Regime regime, const ConditionOptions& opt,
                                        std::uint64_t seed) {
  if (opt.copies_per_snr == 0) throw InvalidArgument("build_condition_set: copies_per_snr must be >= 1");
  std::map<std::pair<std::string, Condition>, std::size_t> premixed;
  const auto& recs = manifest.records();
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (recs[i].condition != Condition::Clean) premixed[{recs[i].source_path, recs[i].condition}] = i;

  auto make = [&](std::size_t i, Condition c, std::size_t copy) {
    SampleRef s;
    s.record = i;
    s.condition = c;
    s.copy = copy;
    s.class_index = manifest.class_index(recs[i].label);
    if (c != Condition::Clean) {
      if (auto it = premixed.find({recs[i].path, c}); it != premixed.end() && copy == 0)
        s.premixed_record = it->second;
      else
        s.mix_seed = mix_seed_for(seed, recs[i].path, c, copy);
    }
    return s;
  };

  ConditionSet set;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (r.condition != Condition::Clean) continue;
    switch (r.split) {
      case Split::Train:
      case Split::Validation: {
        auto& stream = r.split == Split::Train ? set.train : set.validation;
        stream.push_back(make(i, Condition::Clean, 0));
        const bool corrupt = regime == Regime::Multi && (r.split == Split::Train || opt.corrupted_validation);
        if (corrupt)
          for (Condition c : {Condition::Snr20, Condition::Snr10, Condition::Snr0})
            for (std::size_t k = 0; k < opt.copies_per_snr; ++k) stream.push_back(make(i, c, k));
        break;
      }
      case Split::Test:
        for (Condition c : kAllConditions) set.test[condition_index(c)].push_back(make(i, c, 0));
        break;
    }
  }
  return set;
}

// Loads (and, for generated conditions, corrupts) the waveform of a sample.
inline dsp::Waveform load_sample(const Manifest& manifest, const NoiseBank* bank, const SampleRef& s,
                                 std::uint32_t expected_rate = 16000) {
  const auto& recs = manifest.records();
  if (s.premixed_record) return load_wav(manifest.resolve(recs[*s.premixed_record].path), expected_rate);
  auto clean = load_wav(manifest.resolve(recs[s.record].path), expected_rate);
  if (s.condition == Condition::Clean) return clean;
  if (!bank) throw InvalidArgument("load_sample: corrupted condition requested without a noise bank");
  return mix_noise_at_snr(clean, *bank, snr_db(s.condition), s.mix_seed);
}

// ---------------------------------------------------------------------------
// Batching

struct Batch {
  std::size_t rows = 0;
  std::size_t max_t = 0;
  std::vector<Matrix> inputs;            // each rows x max_t, zero beyond true_len
  std::vector<std::size_t> true_lens;
  std::vector<std::size_t> classes;
  std::vector<std::size_t> indices;      // position in the source dataset
};

// Shuffles with shuffle_seed and cuts consecutive batches; the last batch
// may be short. Each batch is padded to max(longest member, min_cols).
inline std::vector<Batch> make_batches(std::span<const Matrix> inputs, std::span<const std::size_t> labels,
                                       std::size_t batch_size, std::size_t min_cols, std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw InvalidArgument("make_batches: batch_size must be >= 1");
  if (inputs.empty()) throw InvalidArgument("make_batches: empty dataset");
  if (inputs.size() != labels.size()) throw ShapeError("make_batches: inputs and labels differ in length");
  const std::size_t rows = inputs.front().rows();
  for (const auto& m : inputs)
    if (m.rows() != rows || m.cols() == 0) throw ShapeError("make_batches: inconsistent input shapes");

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(shuffle_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.rows = rows;
    b.max_t = min_cols;
    for (std::size_t k = start; k < end; ++k) b.max_t = std::max(b.max_t, inputs[order[k]].cols());
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t i = order[k];
      Matrix m = inputs[i];
      m.pad_cols(b.max_t);
      b.inputs.push_back(std::move(m));
      b.true_lens.push_back(inputs[i].cols());
      b.classes.push_back(labels[i]);
      b.indices.push_back(i);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace onemax::data
