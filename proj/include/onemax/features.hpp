#pragma once

// Feature extraction over manifest sample streams with an on-disk SIF cache.
//
// Cache layout: <root>/<key>/<record-stem>.<condition>[.<copy>].sif where
// <key> hashes everything that affects the features (SIF configuration,
// mixing seed, noise bank contents). A different configuration lands in a
// different key directory, so stale files are never read.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "onemax/data.hpp"
#include "onemax/dsp.hpp"
#include "onemax/manifest.hpp"
#include "onemax/parallel.hpp"

namespace onemax::features {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string describe(const dsp::SifConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "window=" << c.frame.window_len << " hop=" << c.frame.hop << " fft=" << c.frame.fft_size
    << " n_freq=" << c.n_freq << " energy=" << c.with_energy << " energy_scale=" << c.energy_scale;
  return s.str();
}

inline std::uint64_t cache_key(const dsp::SifConfig& cfg, std::uint64_t seed, const data::NoiseBank& bank) {
  const std::string d = describe(cfg) + " seed=" + std::to_string(seed);
  return fnv1a(d.data(), d.size(), bank.fingerprint());
}

class SifCache {
 public:
  SifCache(std::filesystem::path root, std::uint64_t key) : dir_(std::move(root) / hex64(key)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const Manifest& m, const data::SampleRef& s) const {
    std::string stem = m.records()[s.record].path;
    for (char& ch : stem)
      if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
    if (auto dot = stem.rfind(".wav"); dot != std::string::npos && dot + 4 == stem.size()) stem.resize(dot);
    std::string name = stem + "." + std::string(to_string(s.condition));
    if (s.copy > 0) name += "." + std::to_string(s.copy);
    return dir_ / (name + ".sif");
  }

 private:
  std::filesystem::path dir_;
};

struct ExtractOutcome {
  std::vector<std::optional<dsp::Sif>> sifs;  // per requested sample; empty on failure
  std::vector<std::string> errors;            // one line per failed sample
  std::size_t cache_hits = 0;
  std::size_t written = 0;
};

// Extracts one SIF per sample. Failures are collected per sample rather
// than aborting the batch.
inline ExtractOutcome extract_samples(const Manifest& manifest, const data::NoiseBank* bank,
                                      const std::vector<data::SampleRef>& samples, const dsp::SifConfig& cfg,
                                      const SifCache* cache, std::size_t jobs, std::uint32_t sample_rate = 16000) {
  ExtractOutcome out;
  out.sifs.resize(samples.size());
  std::vector<std::string> err(samples.size());
  std::vector<char> hit(samples.size(), 0), wrote(samples.size(), 0);
  if (cache) std::filesystem::create_directories(cache->dir());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    try {
      if (cache) {
        const auto p = cache->path_for(manifest, s);
        if (std::filesystem::exists(p)) {
          out.sifs[i] = dsp::read_sif(p);
          hit[i] = 1;
          return;
        }
      }
      auto sif = dsp::extract_sif(data::load_sample(manifest, bank, s, sample_rate), cfg);
      if (cache) {
        // Write to a temporary name first so a half-written file is never
        // mistaken for a cache hit.
        const auto p = cache->path_for(manifest, s);
        auto tmp = p;
        tmp += ".tmp";
        dsp::write_sif(tmp, sif);
        std::filesystem::rename(tmp, p);
        wrote[i] = 1;
      }
      out.sifs[i] = std::move(sif);
    } catch (const std::exception& e) {
      err[i] = manifest.records()[s.record].path + " [" + std::string(to_string(s.condition)) + "]: " + e.what();
    }
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!err[i].empty()) out.errors.push_back(err[i]);
    out.cache_hits += static_cast<std::size_t>(hit[i]);
    out.written += static_cast<std::size_t>(wrote[i]);
  }
  return out;
}

}  // namespace onemax::features
