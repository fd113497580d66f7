#pragma once

// Minibatch Adam training with validation-based retention, per-condition
// evaluation, single-width sweeps and resumable training state.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "onemax/binary_io.hpp"
#include "onemax/checkpoint.hpp"
#include "onemax/data.hpp"
#include "onemax/dsp.hpp"
#include "onemax/error.hpp"
#include "onemax/features.hpp"
#include "onemax/manifest.hpp"
#include "onemax/matrix.hpp"
#include "onemax/model.hpp"
#include "onemax/optim.hpp"
#include "onemax/parallel.hpp"
#include "onemax/rng.hpp"

namespace onemax::train {

using data::Regime;

// Shortest round-trip decimal form; plain notation for moderate magnitudes.
inline std::string format_double(double v) {
  char buf[400];
  const double a = std::abs(v);
  const bool plain = a == 0.0 || (a >= 1e-5 && a < 1e15);
  auto res = plain ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                   : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::size_t> odd_widths(std::size_t max_width) {
  std::vector<std::size_t> w;
  for (std::size_t x = 1; x <= max_width; x += 2) w.push_back(x);
  return w;
}

struct TrainConfig {
  std::vector<std::size_t> widths = odd_widths(9);
  std::size_t filters_per_width = 16;
  double learning_rate = 1e-4;
  double dropout = 0.5;
  double lambda = 1e-4;
  std::size_t batch_size = 100;
  std::optional<std::size_t> epochs;  // unset: 1000 mismatched, 500 multi
  std::uint64_t seed = 0;
  Regime regime = Regime::Multi;
  bool energy = false;
  double energy_scale = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool regularize_biases = false;
  bool unmasked_pool = false;
  bool corrupted_validation = true;
  std::size_t copies_per_snr = 1;
  std::size_t n_freq = 52;
  std::size_t jobs = 1;

  // Filter widths 1..25 odd and P = 100; the remaining values coincide with
  // the desk defaults.
  static TrainConfig paper_defaults() {
    TrainConfig c;
    c.widths = odd_widths(25);
    c.filters_per_width = 100;
    return c;
  }

  std::size_t resolved_epochs() const {
    return epochs.value_or(regime == Regime::Mismatched ? 1000 : 500);
  }

  optim::AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }

  dsp::SifConfig sif_config() const {
    dsp::SifConfig s;
    s.n_freq = n_freq;
    s.with_energy = energy;
    s.energy_scale = energy_scale;
    return s;
  }

  data::ConditionOptions condition_options() const { return {copies_per_snr, corrupted_validation}; }

  void validate() const {
    model::ModelShape shape{n_freq, widths, filters_per_width, 2};
    shape.validate();
    adam().validate();
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must be in [0, 1)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be non-negative");
    if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
    if (!std::isfinite(energy_scale)) throw InvalidArgument("energy_scale must be finite");
    if (copies_per_snr == 0) throw InvalidArgument("copies_per_snr must be >= 1");
    if (jobs == 0) throw InvalidArgument("jobs must be >= 1");
  }

  // key=value lines, one per setting.
  std::string to_text() const {
    std::string w;
    for (std::size_t i = 0; i < widths.size(); ++i) w += (i ? "," : "") + std::to_string(widths[i]);
    std::ostringstream s;
    s << "widths=" << w << "\n"
      << "filters_per_width=" << filters_per_width << "\n"
      << "learning_rate=" << format_double(learning_rate) << "\n"
      << "dropout=" << format_double(dropout) << "\n"
      << "lambda=" << format_double(lambda) << "\n"
      << "batch_size=" << batch_size << "\n"
      << "epochs=" << resolved_epochs() << "\n"
      << "seed=" << seed << "\n"
      << "regime=" << to_string(regime) << "\n"
      << "energy=" << (energy ? "true" : "false") << "\n"
      << "energy_scale=" << format_double(energy_scale) << "\n"
      << "beta1=" << format_double(beta1) << "\n"
      << "beta2=" << format_double(beta2) << "\n"
      << "epsilon=" << format_double(epsilon) << "\n"
      << "regularize_biases=" << (regularize_biases ? "true" : "false") << "\n"
      << "unmasked_pool=" << (unmasked_pool ? "true" : "false") << "\n"
      << "corrupted_validation=" << (corrupted_validation ? "true" : "false") << "\n"
      << "copies_per_snr=" << copies_per_snr << "\n"
      << "n_freq=" << n_freq << "\n";
    return s.str();
  }
};

struct LabeledSet {
  std::vector<Matrix> inputs;  // unpadded SIF values
  std::vector<std::size_t> labels;
  std::size_t size() const { return inputs.size(); }
};

struct TrainData {
  LabeledSet train;
  LabeledSet validation;
  std::size_t input_rows = 0;
  std::size_t n_classes = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct AccuracyTable {
  std::array<double, 4> accuracy{};  // indexed by condition_index()
  std::array<std::size_t, 4> counts{};
  double mean() const { return (accuracy[0] + accuracy[1] + accuracy[2] + accuracy[3]) / 4.0; }
  double at(Condition c) const { return accuracy[condition_index(c)]; }
  friend bool operator==(const AccuracyTable&, const AccuracyTable&) = default;

  std::string to_text() const {
    std::ostringstream s;
    char buf[64];
    s << "clean\t20dB\t10dB\t0dB\tmean\n";
    for (double a : accuracy) {
      std::snprintf(buf, sizeof buf, "%.2f\t", 100.0 * a);
      s << buf;
    }
    std::snprintf(buf, sizeof buf, "%.2f\n", 100.0 * mean());
    s << buf;
    return s.str();
  }

  std::string to_tsv() const {
    std::string s = "clean\tsnr20\tsnr10\tsnr0\tmean\n";
    for (double a : accuracy) s += format_double(a) + "\t";
    return s + format_double(mean()) + "\n";
  }
};

struct TrainReport {
  double init_val_acc = 0.0;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0 is the initial parameters
  double best_val_acc = 0.0;
  std::optional<AccuracyTable> test;
  friend bool operator==(const TrainReport&, const TrainReport&) = default;

  // One JSON object per epoch with keys epoch, train_loss, val_acc.
  std::string epoch_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
      nlohmann::ordered_json j;
      j["epoch"] = e.epoch;
      j["train_loss"] = e.train_loss;
      j["val_acc"] = e.val_acc;
      out += j.dump() + "\n";
    }
    return out;
  }

  std::string to_text() const {
    std::ostringstream s;
    char buf[96];
    s << "epoch\ttrain_loss\tval_acc\n";
    std::snprintf(buf, sizeof buf, "0\t-\t%.4f\n", init_val_acc);
    s << buf;
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.4f\n", e.epoch, e.train_loss, e.val_acc);
      s << buf;
    }
    std::snprintf(buf, sizeof buf, "best_epoch\t%zu\nbest_val_acc\t%.4f\n", best_epoch, best_val_acc);
    s << buf;
    if (test) s << "\ntest accuracy (%)\n" << test->to_text();
    return s.str();
  }
};

// Everything needed to continue training bit-exactly.
struct TrainState {
  std::size_t epochs_done = 0;
  model::ModelParams params;
  optim::AdamState<model::ModelParams> adam;
  model::ModelParams best;
  TrainReport report;
  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct TrainResult {
  model::ModelParams best;
  TrainReport report;
  TrainState state;
};

// ---------------------------------------------------------------------------

inline std::vector<model::ForwardTrace> forward_all(const model::ModelParams& params, const LabeledSet& set,
                                                    bool unmasked_pool, std::size_t jobs) {
  std::vector<model::ForwardTrace> traces(set.size());
  const std::size_t min_cols = params.bank.max_width();
  model::ForwardOptions opt;
  opt.unmasked_pool = unmasked_pool;
  parallel_for(set.size(), jobs, [&](std::size_t i) {
    const auto padded = model::pad_to_min(set.inputs[i], min_cols);
    traces[i] = model::forward(params, padded.values, padded.true_len, opt);
  });
  return traces;
}

inline double accuracy(const model::ModelParams& params, const LabeledSet& set, bool unmasked_pool = false,
                       std::size_t jobs = 1) {
  if (set.size() == 0) throw InvalidArgument("accuracy: empty evaluation set");
  const auto traces = forward_all(params, set, unmasked_pool, jobs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) correct += model::predicted_class(traces[i]) == set.labels[i];
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

inline AccuracyTable evaluate(const model::ModelParams& params, const std::array<LabeledSet, 4>& tests,
                              bool unmasked_pool = false, std::size_t jobs = 1) {
  AccuracyTable t;
  for (std::size_t c = 0; c < 4; ++c) {
    t.accuracy[c] = accuracy(params, tests[c], unmasked_pool, jobs);
    t.counts[c] = tests[c].size();
  }
  return t;
}

namespace detail {

inline void check_data(const TrainConfig& cfg, const TrainData& data) {
  if (data.train.size() == 0) throw InvalidArgument("train: empty training set");
  if (data.validation.size() == 0) throw InvalidArgument("train: empty validation set");
  if (data.train.inputs.size() != data.train.labels.size() ||
      data.validation.inputs.size() != data.validation.labels.size())
    throw ShapeError("train: inputs and labels differ in length");
  for (const auto* set : {&data.train, &data.validation}) {
    for (const auto& m : set->inputs)
      if (m.rows() != data.input_rows || m.cols() == 0) throw ShapeError("train: input shape inconsistent");
    for (std::size_t l : set->labels)
      if (l >= data.n_classes) throw InvalidArgument("train: label out of range");
  }
  (void)cfg;
}

}  // namespace detail

inline model::ModelShape model_shape(const TrainConfig& cfg, const TrainData& data) {
  return {data.input_rows, cfg.widths, cfg.filters_per_width, data.n_classes};
}

// Runs epochs resume->epochs_done+1 .. resolved_epochs(). Every random draw
// is derived from (seed, epoch, ...) so a resumed run matches an
// uninterrupted one bit for bit.
inline TrainResult train(const TrainConfig& cfg, const TrainData& data, const TrainState* resume = nullptr,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  detail::check_data(cfg, data);
  const auto shape = model_shape(cfg, data);
  shape.validate();

  TrainState st;
  if (resume) {
    st = *resume;
    if (st.params.shape().widths != shape.widths || st.params.shape().filters_per_width != shape.filters_per_width ||
        st.params.input_rows() != shape.input_rows || st.params.n_classes() != shape.n_classes)
      throw ConfigError("train: resume state does not match the configured model");
  } else {
    st.params = model::init_params(shape, derive_seed(cfg.seed, "init"));
    st.adam = optim::adam_init(st.params, cfg.adam());
    st.best = st.params;
    st.report.init_val_acc = accuracy(st.params, data.validation, cfg.unmasked_pool, cfg.jobs);
    st.report.best_val_acc = st.report.init_val_acc;
    st.report.best_epoch = 0;
  }

  const std::size_t total = cfg.resolved_epochs();
  const std::size_t min_cols = shape.max_width();
  for (std::size_t epoch = st.epochs_done + 1; epoch <= total; ++epoch) {
    const auto batches = data::make_batches(data.train.inputs, data.train.labels, cfg.batch_size, min_cols,
                                            derive_seed(cfg.seed, "shuffle", epoch));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      const std::size_t n = batch.inputs.size();
      std::vector<model::ForwardTrace> traces(n);
      parallel_for(n, cfg.jobs, [&](std::size_t i) {
        model::ForwardOptions opt;
        opt.mode = model::Mode::Train;
        opt.dropout_rate = cfg.dropout;
        opt.seed = derive_seed(cfg.seed, "dropout", epoch, batch.indices[i]);
        opt.unmasked_pool = cfg.unmasked_pool;
        traces[i] = model::forward(st.params, batch.inputs[i], batch.true_lens[i], opt);
      });

      // Fixed summation order (batch position) keeps the reduction
      // independent of the worker count.
      auto grads = model::Gradients::zeros_like(st.params);
      double ce = 0.0;
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        ce += model::cross_entropy(traces[i], batch.classes[i]);
        model::accumulate_gradient(st.params, traces[i], batch.inputs[i], batch.classes[i], inv_n, grads);
      }
      const double batch_loss = ce * inv_n + model::regularizer(st.params, cfg.lambda, cfg.regularize_biases);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b + 1));
      model::add_regularizer_gradient(st.params, cfg.lambda, cfg.regularize_biases, grads);
      try {
        optim::adam_step(st.adam, st.params, grads);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b + 1));
      }
      loss_sum += batch_loss;
    }

    EpochLog log{epoch, loss_sum / static_cast<double>(batches.size()),
                 accuracy(st.params, data.validation, cfg.unmasked_pool, cfg.jobs)};
    st.report.epochs.push_back(log);
    if (log.val_acc > st.report.best_val_acc) {
      st.report.best_val_acc = log.val_acc;
      st.report.best_epoch = epoch;
      st.best = st.params;
    }
    st.epochs_done = epoch;
    if (on_epoch) on_epoch(log);
  }
  return {st.best, st.report, st};
}

// ---------------------------------------------------------------------------
// Manifest-level pipeline

struct PreparedData {
  TrainData data;
  std::array<LabeledSet, 4> test;
  std::vector<std::string> labels;
};

namespace detail {

inline LabeledSet collect(const Manifest& m, const data::NoiseBank& bank, const std::vector<data::SampleRef>& refs,
                          const dsp::SifConfig& sif, const features::SifCache* cache, std::size_t jobs,
                          std::vector<std::string>& errors) {
  auto out = features::extract_samples(m, &bank, refs, sif, cache, jobs);
  errors.insert(errors.end(), out.errors.begin(), out.errors.end());
  LabeledSet set;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!out.sifs[i]) continue;
    set.inputs.push_back(std::move(out.sifs[i]->values));
    set.labels.push_back(refs[i].class_index);
  }
  return set;
}

}  // namespace detail

// Builds the regime's sample streams and extracts (or reads cached) SIFs.
// Any per-file failure aborts with the full list of failures.
inline PreparedData prepare(const Manifest& manifest, const data::NoiseBank& bank, const TrainConfig& cfg,
                            const features::SifCache* cache = nullptr, bool need_training = true) {
  const auto set = data::build_condition_set(manifest, cfg.regime, cfg.condition_options(), cfg.seed);
  const auto sif = cfg.sif_config();
  std::vector<std::string> errors;
  PreparedData p;
  p.labels = manifest.labels();
  p.data.n_classes = manifest.n_classes();
  p.data.input_rows = cfg.n_freq + (cfg.energy ? 1 : 0);
  if (need_training) {
    p.data.train = detail::collect(manifest, bank, set.train, sif, cache, cfg.jobs, errors);
    p.data.validation = detail::collect(manifest, bank, set.validation, sif, cache, cfg.jobs, errors);
  }
  for (std::size_t c = 0; c < 4; ++c)
    p.test[c] = detail::collect(manifest, bank, set.test[c], sif, cache, cfg.jobs, errors);
  if (!errors.empty()) {
    std::string msg = "feature extraction failed for " + std::to_string(errors.size()) + " sample(s):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw IoError(msg);
  }
  return p;
}

inline void check_class_table(const model::ModelParams& params, const PreparedData& p) {
  if (params.n_classes() != p.data.n_classes)
    throw ConfigError("model has " + std::to_string(params.n_classes()) + " classes, manifest has " +
                      std::to_string(p.data.n_classes));
  if (params.input_rows() != p.data.input_rows)
    throw ConfigError("model expects " + std::to_string(params.input_rows()) + " input rows, features have " +
                      std::to_string(p.data.input_rows) + " (energy flag mismatch?)");
}

inline AccuracyTable evaluate(const model::ModelParams& params, const PreparedData& p, bool unmasked_pool = false,
                              std::size_t jobs = 1) {
  check_class_table(params, p);
  return evaluate(params, p.test, unmasked_pool, jobs);
}

// Trains and tests on a prepared corpus; the report carries the test table.
inline TrainResult run(const TrainConfig& cfg, const PreparedData& p, const TrainState* resume = nullptr,
                       const std::function<void(const EpochLog&)>& on_epoch = {}) {
  auto res = train(cfg, p.data, resume, on_epoch);
  res.report.test = evaluate(res.best, p, cfg.unmasked_pool, cfg.jobs);
  res.state.report.test = res.report.test;
  return res;
}

struct SweepRow {
  std::size_t width = 0;
  std::optional<AccuracyTable> table;
  std::string error;
};

// One single-width model per entry; a failing width is recorded and the
// sweep moves on.
inline std::vector<SweepRow> width_sweep(const TrainConfig& base, const std::vector<std::size_t>& widths,
                                         const PreparedData& p,
                                         const std::function<void(const SweepRow&)>& on_row = {}) {
  std::vector<SweepRow> rows;
  for (std::size_t w : widths) {
    SweepRow row{w, std::nullopt, {}};
    try {
      if (w == 0) throw InvalidArgument("filter width must be >= 1");
      TrainConfig cfg = base;
      cfg.widths = {w};
      row.table = run(cfg, p).report.test;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

// width <TAB> condition <TAB> accuracy, one line per width x condition.
inline std::string sweep_tsv(const std::vector<SweepRow>& rows) {
  std::string s = "width\tcondition\taccuracy\n";
  for (const auto& r : rows) {
    if (!r.table) continue;
    for (Condition c : kAllConditions)
      s += std::to_string(r.width) + "\t" + std::string(to_string(c)) + "\t" + format_double(r.table->at(c)) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training state file: "1MXS" u32 version u64 epochs_done, params body,
// Adam record, best params body, report, checksum.

inline std::string encode_train_state(const TrainState& s) {
  ByteWriter w;
  w.magic("1MXS");
  w.u32(kCheckpointVersion);
  w.u64(s.epochs_done);
  onemax::detail::put_params(w, s.params);
  put_adam_state(w, s.adam);
  onemax::detail::put_params(w, s.best);
  w.f64(s.report.init_val_acc);
  w.u64(s.report.best_epoch);
  w.f64(s.report.best_val_acc);
  w.u64(s.report.epochs.size());
  for (const auto& e : s.report.epochs) {
    w.u64(e.epoch);
    w.f64(e.train_loss);
    w.f64(e.val_acc);
  }
  w.checksum();
  return w.take();
}

inline TrainState decode_train_state(std::string_view bytes, const std::string& what = "train state") {
  ByteReader r(bytes, what);
  r.expect_magic("1MXS");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported version " + std::to_string(v));
  TrainState s;
  s.epochs_done = r.u64();
  s.params = onemax::detail::get_params<model::ParamTag>(r);
  s.adam = get_adam_state(r);
  s.best = onemax::detail::get_params<model::ParamTag>(r);
  if (!s.params.same_layout(s.adam.m) || !s.params.same_layout(s.best)) r.fail("inconsistent parameter layouts");
  s.report.init_val_acc = r.f64();
  s.report.best_epoch = r.u64();
  s.report.best_val_acc = r.f64();
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 24) r.fail("unexpected end of data");
  for (std::uint64_t i = 0; i < n; ++i) {
    EpochLog e;
    e.epoch = r.u64();
    e.train_loss = r.f64();
    e.val_acc = r.f64();
    s.report.epochs.push_back(e);
  }
  r.verify_checksum();
  r.expect_end();
  return s;
}

}  // namespace onemax::train
