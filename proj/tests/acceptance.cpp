// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "onemax/onemax.hpp"

using namespace onemax;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("[%s] %2d %-26s %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void run_criterion(int id, const char* name, const std::function<void(bool&, std::string&)>& body,
                   double time_limit = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    body(ok, detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double s = elapsed(t0);
  if (time_limit > 0 && s >= time_limit) {
    ok = false;
    detail += fmt(" [over %.0fs limit]", time_limit);
  }
  report(id, name, ok, detail, s);
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("onemax_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Direct O(L^2) sum over a precomputed table of the n roots of unity.
class NaiveDft {
 public:
  explicit NaiveDft(std::size_t n) : n_(n), cos_(n), sin_(n) {
    for (std::size_t m = 0; m < n; ++m) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(m) / n;
      cos_[m] = static_cast<double>(std::cos(a));
      sin_[m] = static_cast<double>(std::sin(a));
    }
  }
  std::vector<double> magnitude(const std::vector<double>& x) const {
    std::vector<double> out(n_ / 2);
    for (std::size_t f = 0; f < n_ / 2; ++f) {
      double re = 0, im = 0;
      std::size_t m = 0;
      for (std::size_t i = 0; i < x.size(); ++i, m = (m + f) % n_) {
        re += x[i] * cos_[m];
        im += x[i] * sin_[m];
      }
      out[f] = std::sqrt(re * re + im * im);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> cos_, sin_;
};

model::ModelShape desk_shape(std::size_t rows = 52, std::size_t classes = 5) {
  model::ModelShape s;
  s.input_rows = rows;
  s.widths = {1, 3, 5, 7, 9};
  s.filters_per_width = 16;
  s.n_classes = classes;
  return s;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& n_files) {
  const auto fa = files_under(a), fb = files_under(b);
  n_files = fa.size();
  if (fa != fb) return false;
  for (const auto& f : fa)
    if (read_file_bytes(a / f) != read_file_bytes(b / f)) return false;
  return true;
}

constexpr std::uint64_t kCorpusSeed = 7;

}  // namespace

int main() {
  // 1. Analytic gradients vs central differences.
  run_criterion(1, "gradient oracle", [](bool& ok, std::string& d) {
    double worst = 0;
    std::size_t params = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
      const auto p = gradcheck::random_problem(derive_seed(2024, "acceptance.gradcheck", t));
      const auto tr = model::forward(p.params, p.input, p.true_len);
      const auto g = model::backward(p.params, tr, p.input, p.target, p.lambda);
      const auto r = gradcheck::compare(p, g, 1e-5);
      worst = std::max(worst, r.max_rel_error);
      params += r.n_checked;
    }
    ok = worst < 1e-6;
    d = fmt("%.0f models, %.0f params, max rel error %.2e (< 1e-6)", trials, static_cast<double>(params), worst);
  }, 60.0);

  // 2. FFT magnitudes vs O(L^2) DFT.
  run_criterion(2, "DFT oracle", [](bool& ok, std::string& d) {
    Rng rng(derive_seed(2024, "acceptance.dft"));
    double worst = 0;
    std::vector<double> x(2048);
    const NaiveDft oracle(2048);
    for (int t = 0; t < 1000; ++t) {
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      const auto got = dsp::dft_magnitude(x, 2048);
      const auto want = oracle.magnitude(x);
      for (std::size_t f = 0; f < want.size(); ++f) worst = std::max(worst, std::abs(got[f] - want[f]));
    }
    ok = worst < 1e-9;
    d = fmt("1000 frames, max abs error %.2e (< 1e-9)", worst);
  }, 60.0);

  // 3. Shift invariance with zero biases on a zero background.
  run_criterion(3, "shift invariance", [](bool& ok, std::string& d) {
    const std::size_t rows = 52, t_len = 60, k = 10;
    bool all = true;
    std::size_t checked = 0, border_diff = 0, border_total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto params = model::init_params(desk_shape(rows), derive_seed(2024, "acceptance.shift", seed));
      Rng rng(derive_seed(2024, "acceptance.shift.patch", seed));
      Matrix patch(rows, k);
      for (double& v : patch.data()) v = rng.uniform(0.0, 1.0);
      const auto pooled_at = [&](std::size_t off) {
        Matrix x(rows, t_len, 0.0);
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t r = 0; r < rows; ++r) x(r, off + c) = patch(r, c);
        return model::forward(params, x, t_len).pooled;
      };
      // Offsets at which every window overlapping the patch lies inside the
      // input. Nearer the edges a valid correlation loses partial-overlap
      // windows, so exact equality does not hold there.
      const std::size_t margin = params.bank.max_width() - 1;
      const std::size_t lo = margin, hi = t_len - k - margin;
      const auto ref = pooled_at(lo);
      for (std::size_t off = lo; off <= hi; ++off, ++checked) all = all && pooled_at(off) == ref;
      for (std::size_t off = 0; off <= t_len - k; ++off)
        if (off < lo || off > hi) {
          ++border_total;
          border_diff += pooled_at(off) != ref;
        }
    }
    ok = all && checked > 0;
    d = fmt("5 models, %.0f interior offsets exact; edge offsets differing %.0f/%.0f", static_cast<double>(checked),
            static_cast<double>(border_diff), static_cast<double>(border_total));
  });

  // 4. Variable-length contract.
  run_criterion(4, "variable length", [](bool& ok, std::string& d) {
    const auto params = model::init_params(desk_shape(), derive_seed(2024, "acceptance.varlen"));
    Rng rng(derive_seed(2024, "acceptance.varlen.input"));
    ok = true;
    for (std::size_t t : {1u, 30u, 100u, 300u}) {
      Matrix x(52, t);
      for (double& v : x.data()) v = rng.uniform(0.0, 3.0);
      const auto padded = model::pad_to_min(x, params.bank.max_width());
      const auto ref = model::forward(params, padded.values, t);
      ok = ok && ref.pooled.size() == 16u * 5;
      for (std::size_t extra : {1u, 9u, 250u}) {
        Matrix y = padded.values;
        y.pad_cols(y.cols() + extra);
        const auto tr = model::forward(params, y, t);
        ok = ok && tr.pooled == ref.pooled && tr.logits == ref.logits && tr.probs == ref.probs;
      }
    }
    d = "T in {1,30,100,300}: pooled dim 80 = P*Q, zero padding exact";
  });

  // 5. SNR calibration.
  run_criterion(5, "SNR calibration", [](bool& ok, std::string& d) {
    synth::SynthConfig sc;
    data::NoiseBank bank;
    for (std::size_t i = 0; i < synth::kNoiseNames.size(); ++i)
      bank.noises.push_back({synth::kNoiseNames[i], synth::make_noise(i, sc, derive_seed(2024, "acceptance.noise", i))});
    Rng rng(derive_seed(2024, "acceptance.snr"));
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      const auto clean = synth::make_event(rng.below(5), sc, rng.next());
      const double snr = rng.uniform(-5.0, 30.0);
      const auto mixed = data::mix_noise_at_snr(clean, bank, snr, rng.next());
      std::vector<double> noise(clean.samples.size());
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = mixed.samples[i] - clean.samples[i];
      const double measured = 10.0 * std::log10(data::mean_square(clean.samples) / data::mean_square(noise));
      worst = std::max(worst, std::abs(measured - snr));
    }
    ok = worst < 1e-9;
    d = fmt("200 draws in [-5,30] dB, max deviation %.2e dB (< 1e-9)", worst);
  });

  // 6. Every de-noised row has minimum exactly zero.
  run_criterion(6, "de-noise invariant", [](bool& ok, std::string& d) {
    synth::SynthConfig sc;
    data::NoiseBank bank;
    for (std::size_t i = 0; i < synth::kNoiseNames.size(); ++i)
      bank.noises.push_back({synth::kNoiseNames[i], synth::make_noise(i, sc, derive_seed(2024, "acceptance.noise", i))});
    Rng rng(derive_seed(2024, "acceptance.denoise"));
    ok = true;
    std::size_t rows_checked = 0;
    for (int t = 0; t < 100; ++t) {
      auto wave = synth::make_event(rng.below(6), sc, rng.next());
      if (t % 2) wave = data::mix_noise_at_snr(wave, bank, rng.uniform(-5.0, 30.0), rng.next());
      const auto sif = dsp::extract_sif(wave, dsp::SifConfig{});
      for (std::size_t r = 0; r < sif.n_rows(); ++r, ++rows_checked) {
        double lo = sif.values(r, 0);
        for (std::size_t c = 1; c < sif.n_frames(); ++c) lo = std::min(lo, sif.values(r, c));
        ok = ok && lo == 0.0;
      }
    }
    d = fmt("100 extractions (clean and noisy), %.0f rows with min == 0", static_cast<double>(rows_checked));
  });

  // 7. Overfit one sample.
  run_criterion(7, "overfit one sample", [](bool& ok, std::string& d) {
    synth::SynthConfig sc;
    const auto sif = dsp::extract_sif(synth::make_event(2, sc, derive_seed(2024, "acceptance.overfit")), dsp::SifConfig{});
    auto params = model::init_params(desk_shape(), derive_seed(2024, "acceptance.overfit.init"));
    auto adam = optim::adam_init(params, optim::AdamConfig{1e-4});
    const auto x = model::pad_to_min(sif.values, params.bank.max_width());
    const std::size_t target = 3;
    double ce = 0;
    std::size_t step = 0;
    for (; step <= 2000; ++step) {
      const auto tr = model::forward(params, x.values, x.true_len);
      ce = model::cross_entropy(tr, target);
      if (ce < 1e-2 || step == 2000) break;
      optim::adam_step(adam, params, model::backward(params, tr, x.values, target, 0.0));
    }
    ok = ce < 1e-2;
    d = fmt("cross-entropy %.3e after %.0f Adam steps (< 1e-2 within 2000)", ce, static_cast<double>(step));
  }, 60.0);

  // 8. Adam on a scalar quadratic.
  run_criterion(8, "Adam oracle", [](bool& ok, std::string& d) {
    const double alpha = 0.1;
    std::vector<double> x = {0.0};
    auto st = optim::adam_init(x, optim::AdamConfig{alpha});
    optim::adam_step(st, x, std::vector<double>{2.0 * (x[0] - 3.0)});
    const double first = std::abs(x[0]);
    std::size_t reached = 0;
    for (std::size_t step = 2; step <= 10000; ++step) {
      optim::adam_step(st, x, std::vector<double>{2.0 * (x[0] - 3.0)});
      if (!reached && std::abs(x[0] - 3.0) < 1e-3) reached = step;
    }
    const double final_err = std::abs(x[0] - 3.0);
    ok = std::abs(first - alpha) < 1e-6 * alpha && reached > 0 && final_err < 1e-3;
    d = fmt("first step %.9f (alpha 0.1), within 1e-3 at step %.0f, |x-3| = %.1e after 10000", first,
            static_cast<double>(reached), final_err);
  });

  // 9. Desk-scale end-to-end on the frozen synthetic corpus.
  run_criterion(9, "desk end-to-end", [](bool& ok, std::string& d) {
    const auto root = scratch("desk");
    synth::SynthConfig sc;
    sc.n_classes = 5;
    sc.per_class = 16;
    sc.seed = kCorpusSeed;
    const auto corpus = synth::synth_corpus(sc, root / "corpus");
    const auto bank = data::load_noise_bank(corpus.noise_dir);

    train::TrainConfig cfg;
    cfg.widths = {1, 3, 5, 7, 9};
    cfg.filters_per_width = 16;
    cfg.epochs = 100;
    cfg.seed = kCorpusSeed;
    cfg.jobs = default_jobs();
    const features::SifCache cache(root / "cache", features::cache_key(cfg.sif_config(), cfg.seed, bank));

    cfg.regime = data::Regime::Multi;
    const auto multi = train::run(cfg, train::prepare(corpus.manifest, bank, cfg, &cache));
    cfg.regime = data::Regime::Mismatched;
    const auto mism = train::run(cfg, train::prepare(corpus.manifest, bank, cfg, &cache));
    const auto& mt = *multi.report.test;
    const auto& st = *mism.report.test;
    ok = mt.at(Condition::Clean) >= 0.95 && mt.at(Condition::Snr0) >= st.at(Condition::Snr0);
    d = fmt("multi clean %.3f (>= 0.95), 0 dB multi %.3f >= mismatched %.3f; multi mean %.3f", mt.at(Condition::Clean),
            mt.at(Condition::Snr0), st.at(Condition::Snr0), mt.mean());
  }, 900.0);

  // 10. Determinism and bit-exact formats.
  run_criterion(10, "determinism & formats", [](bool& ok, std::string& d) {
    synth::SynthConfig sc;
    sc.n_classes = 3;
    sc.per_class = 8;
    sc.seed = kCorpusSeed;
    const auto ra = scratch("det_a"), rb = scratch("det_b");
    const auto ca = synth::synth_corpus(sc, ra / "corpus");
    const auto cb = synth::synth_corpus(sc, rb / "corpus");
    std::size_t n_corpus = 0, n_sif = 0;
    const bool corpora = same_tree(ra / "corpus", rb / "corpus", n_corpus);

    train::TrainConfig cfg;
    cfg.widths = {1, 3, 5};
    cfg.filters_per_width = 8;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = kCorpusSeed;
    std::string ckpt[2], report[2], jsonl[2];
    for (int i = 0; i < 2; ++i) {
      const auto& root = i == 0 ? ra : rb;
      const auto& c = i == 0 ? ca : cb;
      const auto bank = data::load_noise_bank(c.noise_dir);
      cfg.jobs = i == 0 ? 1 : 4;
      const features::SifCache cache(root / "cache", features::cache_key(cfg.sif_config(), cfg.seed, bank));
      const auto res = train::run(cfg, train::prepare(c.manifest, bank, cfg, &cache));
      ckpt[i] = encode_checkpoint(res.best);
      report[i] = res.report.to_text();
      jsonl[i] = res.report.epoch_jsonl();
    }
    const bool sifs = same_tree(ra / "cache", rb / "cache", n_sif);
    const bool runs = ckpt[0] == ckpt[1] && report[0] == report[1] && jsonl[0] == jsonl[1];

    const auto params = decode_checkpoint(ckpt[0]);
    const bool ckpt_rt = encode_checkpoint(params) == ckpt[0] && decode_checkpoint(encode_checkpoint(params)) == params;
    bool sif_rt = true;
    for (const auto& f : files_under(ra / "cache")) {
      const auto bytes = read_file_bytes(ra / "cache" / f);
      const auto s = dsp::decode_sif(bytes);
      sif_rt = sif_rt && dsp::encode_sif(s) == bytes && dsp::decode_sif(dsp::encode_sif(s)) == s;
    }
    ok = corpora && sifs && runs && ckpt_rt && sif_rt && n_sif > 0;
    d = std::string("corpora ") + (corpora ? "same" : "DIFFER") + fmt(" (%.0f files), SIFs ", n_corpus) +
        (sifs ? "same" : "DIFFER") + fmt(" (%.0f), checkpoint/report ", n_sif) + (runs ? "same" : "DIFFER") +
        ", round-trips " + (ckpt_rt && sif_rt ? "bit-exact" : "BROKEN");
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
