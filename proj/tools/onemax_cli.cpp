// onemax: synthetic corpus generation, SIF extraction, training, evaluation,
// filter-width sweeps and gradient checking for the 1-max pooling CNN.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration
// error.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "onemax/onemax.hpp"

namespace fs = std::filesystem;
using namespace onemax;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string config;
};

struct CorpusFlags {
  std::string manifest;
  std::string noise_dir;
  std::string cache;
};

struct FeatureFlags {
  bool energy = false;
  double energy_scale = 1.0;
  std::size_t n_freq = 52;
};

struct ModelFlags {
  std::string regime = "multi";
  std::string widths = "1,3,5,7,9";
  std::size_t filters = 16;
  double lr = 1e-4;
  double dropout = 0.5;
  double lambda = 1e-4;
  std::size_t batch_size = 100;
  std::optional<std::size_t> epochs;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool regularize_biases = false;
  bool unmasked_pool = false;
  bool clean_validation = false;
  std::size_t copies_per_snr = 1;
  bool paper_defaults = false;
};

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t pos = 0;
      const long v = std::stol(tok, &pos);
      if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("invalid filter width '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("empty filter width list");
  return out;
}

void add_corpus_flags(CLI::App* sub, CorpusFlags& c) {
  sub->add_option("--manifest", c.manifest, "Manifest TSV (#manifest-v1)")->required();
  sub->add_option("--noise-dir", c.noise_dir, "Directory of noise WAVs (default: <manifest dir>/noise)");
  sub->add_option("--cache", c.cache, "SIF cache root (default: $ONEMAX_CACHE or <manifest dir>/sif_cache)");
}

void add_feature_flags(CLI::App* sub, FeatureFlags& f) {
  sub->add_flag("--energy", f.energy, "Append the short-time energy row (F+1 input rows)");
  sub->add_option("--energy-scale", f.energy_scale, "Multiplier for the energy row")->capture_default_str();
  sub->add_option("--n-freq", f.n_freq, "Frequency bins F after down-sampling")->capture_default_str();
}

void add_model_flags(CLI::App* sub, ModelFlags& m) {
  sub->add_option("--regime", m.regime, "Training regime: mismatched (clean only) or multi (clean + 20/10/0 dB)")
      ->capture_default_str()
      ->check(CLI::IsMember({"mismatched", "multi"}));
  sub->add_option("--widths", m.widths, "Comma-separated filter widths (full scale: 1,3,...,25)")->capture_default_str();
  sub->add_option("--filters", m.filters, "Filters P per width (full scale: 100)")->capture_default_str();
  sub->add_option("--lr", m.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--dropout", m.dropout, "Dropout rate on the pooled vector")->capture_default_str();
  sub->add_option("--lambda", m.lambda, "L2 regularization weight")->capture_default_str();
  sub->add_option("--batch-size", m.batch_size, "Minibatch size")->capture_default_str();
  sub->add_option("--epochs", m.epochs, "Epochs (default: 1000 mismatched, 500 multi)");
  sub->add_option("--beta1", m.beta1, "Adam beta1")->capture_default_str();
  sub->add_option("--beta2", m.beta2, "Adam beta2")->capture_default_str();
  sub->add_option("--epsilon", m.epsilon, "Adam epsilon")->capture_default_str();
  sub->add_flag("--regularize-biases", m.regularize_biases, "Include biases in the L2 term");
  sub->add_flag("--unmasked-pool", m.unmasked_pool, "Pool over zero-padded positions too");
  sub->add_flag("--clean-validation", m.clean_validation, "Multi regime: validate on clean samples only");
  sub->add_option("--copies-per-snr", m.copies_per_snr, "Multi regime: corrupted copies per SNR level")
      ->capture_default_str();
  sub->add_flag("--paper-defaults", m.paper_defaults,
                "Table-scale model: widths 1,3,...,25 and P=100 (overrides --widths/--filters)");
}

train::TrainConfig resolve_config(const Globals& g, const FeatureFlags& f, const ModelFlags& m) {
  train::TrainConfig c;
  c.widths = parse_widths(m.widths);
  c.filters_per_width = m.filters;
  if (m.paper_defaults) {
    const auto p = train::TrainConfig::paper_defaults();
    c.widths = p.widths;
    c.filters_per_width = p.filters_per_width;
  }
  c.learning_rate = m.lr;
  c.dropout = m.dropout;
  c.lambda = m.lambda;
  c.batch_size = m.batch_size;
  c.epochs = m.epochs;
  c.seed = g.seed;
  c.regime = data::parse_regime(m.regime);
  c.energy = f.energy;
  c.energy_scale = f.energy_scale;
  c.beta1 = m.beta1;
  c.beta2 = m.beta2;
  c.epsilon = m.epsilon;
  c.regularize_biases = m.regularize_biases;
  c.unmasked_pool = m.unmasked_pool;
  c.corrupted_validation = !m.clean_validation;
  c.copies_per_snr = m.copies_per_snr;
  c.n_freq = f.n_freq;
  c.jobs = g.jobs;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

struct Corpus {
  Manifest manifest;
  data::NoiseBank bank;
  fs::path cache_root;
};

Corpus open_corpus(const CorpusFlags& c) {
  Corpus out;
  out.manifest = Manifest::load(c.manifest);
  const fs::path base = fs::path(c.manifest).parent_path();
  out.bank = data::load_noise_bank(c.noise_dir.empty() ? base / "noise" : fs::path(c.noise_dir));
  if (!c.cache.empty())
    out.cache_root = c.cache;
  else if (const char* env = std::getenv("ONEMAX_CACHE"); env && *env)
    out.cache_root = env;
  else
    out.cache_root = base / "sif_cache";
  return out;
}

features::SifCache make_cache(const Corpus& corpus, const dsp::SifConfig& sif, std::uint64_t seed) {
  return features::SifCache(corpus.cache_root, features::cache_key(sif, seed, corpus.bank));
}

void write_text(const fs::path& path, const std::string& text) { write_file_bytes(path, text); }

// ---------------------------------------------------------------------------

struct SynthFlags {
  std::string out;
  std::size_t classes = 5;
  std::size_t per_class = 16;
  double min_dur = 0.3;
  double max_dur = 1.5;
  double noise_dur = 5.0;
};

int cmd_synth(const Globals& g, const SynthFlags& f) {
  synth::SynthConfig cfg;
  cfg.n_classes = f.classes;
  cfg.per_class = f.per_class;
  cfg.min_duration = f.min_dur;
  cfg.max_duration = f.max_dur;
  cfg.noise_duration = f.noise_dur;
  cfg.seed = g.seed;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto res = synth::synth_corpus(cfg, f.out);
  const auto counts = synth::split_counts(cfg.per_class);
  double total = 0.0, lo = 1e300, hi = 0.0;
  for (const auto& e : res.events) {
    total += e.duration;
    lo = std::min(lo, e.duration);
    hi = std::max(hi, e.duration);
  }
  std::cout << "manifest\t" << res.manifest_path.string() << "\n"
            << "noise_dir\t" << res.noise_dir.string() << "\n"
            << "classes\t" << cfg.n_classes << "\n"
            << "records\t" << res.manifest.records().size() << "\n"
            << "per_class_split\t" << counts.train << "/" << counts.validation << "/" << counts.test << "\n"
            << "duration_total_s\t" << train::format_double(total) << "\n"
            << "duration_min_s\t" << train::format_double(lo) << "\n"
            << "duration_max_s\t" << train::format_double(hi) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractFlags {
  CorpusFlags corpus;
  FeatureFlags feat;
  std::size_t copies_per_snr = 1;
};

int cmd_extract(const Globals& g, const ExtractFlags& f) {
  dsp::SifConfig sif;
  sif.n_freq = f.feat.n_freq;
  sif.with_energy = f.feat.energy;
  sif.energy_scale = f.feat.energy_scale;
  if (sif.n_freq == 0 || sif.n_freq > sif.frame.fft_size / 2) throw UsageError("--n-freq out of range");
  if (f.copies_per_snr == 0) throw UsageError("--copies-per-snr must be >= 1");
  auto corpus = open_corpus(f.corpus);
  const auto cache = make_cache(corpus, sif, g.seed);

  // The multi-condition streams cover every (record, condition) either
  // regime will ask for.
  const auto set = data::build_condition_set(corpus.manifest, data::Regime::Multi, {f.copies_per_snr, true}, g.seed);
  std::vector<data::SampleRef> all = set.train;
  all.insert(all.end(), set.validation.begin(), set.validation.end());
  for (const auto& t : set.test) all.insert(all.end(), t.begin(), t.end());

  const auto out = features::extract_samples(corpus.manifest, &corpus.bank, all, sif, &cache, g.jobs);
  for (const auto& e : out.errors) std::cerr << "error: " << e << "\n";
  if (out.cache_hits > 0)
    std::cerr << "notice: " << out.cache_hits << " file(s) already in cache, skipped\n";
  std::cout << "cache_dir\t" << cache.dir().string() << "\n"
            << "samples\t" << all.size() << "\n"
            << "written\t" << out.written << "\n"
            << "cached\t" << out.cache_hits << "\n"
            << "failed\t" << out.errors.size() << "\n"
            << "rows\t" << (sif.n_freq + (sif.with_energy ? 1 : 0)) << "\n";
  return out.errors.empty() ? 0 : kExitRuntime;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  CorpusFlags corpus;
  FeatureFlags feat;
  ModelFlags model;
  std::string out = "run";
  std::string resume;
  std::size_t log_every = 10;
  bool print_config = false;
};

std::string sidecar(const train::TrainConfig& cfg, const Corpus& corpus, const features::SifCache& cache,
                    const std::string& manifest_path) {
  std::string s = "# resolved training configuration\n" + cfg.to_text();
  s += "manifest=" + manifest_path + "\n";
  s += "cache_dir=" + cache.dir().string() + "\n";
  s += "seed.init=" + std::to_string(derive_seed(cfg.seed, "init")) + "\n";
  s += "noise_bank_fingerprint=" + features::hex64(corpus.bank.fingerprint()) + "\n";
  std::string labels;
  for (std::size_t i = 0; i < corpus.manifest.labels().size(); ++i)
    labels += (i ? "," : "") + corpus.manifest.labels()[i];
  s += "labels=" + labels + "\n";
  return s;
}

int cmd_train(const Globals& g, const TrainFlags& f) {
  const auto cfg = resolve_config(g, f.feat, f.model);
  if (f.print_config) {
    std::cout << cfg.to_text();
    return 0;
  }
  std::cerr << cfg.to_text();
  auto corpus = open_corpus(f.corpus);
  const auto cache = make_cache(corpus, cfg.sif_config(), cfg.seed);
  const auto prepared = train::prepare(corpus.manifest, corpus.bank, cfg, &cache);

  std::optional<train::TrainState> resume;
  if (!f.resume.empty()) resume = train::decode_train_state(read_file_bytes(f.resume), f.resume);

  const fs::path out(f.out);
  fs::create_directories(out);
  std::ofstream jsonl(out / "epochs.jsonl", resume ? std::ios::app : std::ios::trunc);
  auto res = train::run(cfg, prepared, resume ? &*resume : nullptr, [&](const train::EpochLog& e) {
    train::TrainReport one;
    one.epochs.push_back(e);
    jsonl << one.epoch_jsonl() << std::flush;
    if (f.log_every > 0 && (e.epoch % f.log_every == 0 || e.epoch == cfg.resolved_epochs()))
      std::cerr << "epoch " << e.epoch << "  train_loss " << e.train_loss << "  val_acc " << e.val_acc << "\n";
  });
  save_checkpoint(out / "best.1max", res.best);
  write_file_bytes(out / "last.state", train::encode_train_state(res.state));
  write_text(out / "report.txt", res.report.to_text());
  write_text(out / "config.txt", sidecar(cfg, corpus, cache, f.corpus.manifest));
  std::cout << "checkpoint\t" << (out / "best.1max").string() << "\n"
            << "best_epoch\t" << res.report.best_epoch << "\n"
            << "best_val_acc\t" << train::format_double(res.report.best_val_acc) << "\n\n"
            << res.report.test->to_text();
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  CorpusFlags corpus;
  std::string ckpt;
  double energy_scale = 1.0;
  std::size_t n_freq = 52;
  bool unmasked_pool = false;
  bool tsv = false;
};

int cmd_eval(const Globals& g, const EvalFlags& f) {
  if (!fs::exists(f.ckpt)) throw IoError("checkpoint not found: " + f.ckpt);
  const auto params = load_checkpoint(f.ckpt);
  if (params.input_rows() != f.n_freq && params.input_rows() != f.n_freq + 1)
    throw ConfigError("checkpoint expects " + std::to_string(params.input_rows()) + " input rows, incompatible with "
                      "--n-freq " + std::to_string(f.n_freq));
  train::TrainConfig cfg;
  cfg.seed = g.seed;
  cfg.jobs = g.jobs;
  cfg.n_freq = f.n_freq;
  cfg.energy = params.input_rows() == f.n_freq + 1;
  cfg.energy_scale = f.energy_scale;
  auto corpus = open_corpus(f.corpus);
  const auto cache = make_cache(corpus, cfg.sif_config(), cfg.seed);
  const auto prepared = train::prepare(corpus.manifest, corpus.bank, cfg, &cache, /*need_training=*/false);
  const auto table = train::evaluate(params, prepared, f.unmasked_pool, g.jobs);
  std::cout << (f.tsv ? table.to_tsv() : table.to_text());
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepFlags {
  CorpusFlags corpus;
  FeatureFlags feat;
  ModelFlags model;
  std::string sweep_widths = "1,3,5,7,9";
  std::string out;
};

int cmd_sweep(const Globals& g, const SweepFlags& f) {
  auto cfg = resolve_config(g, f.feat, f.model);
  const auto widths = parse_widths(f.model.paper_defaults ? "1,3,5,7,9,11,13,15,17,19,21,23,25" : f.sweep_widths);
  auto corpus = open_corpus(f.corpus);
  const auto cache = make_cache(corpus, cfg.sif_config(), cfg.seed);
  const auto prepared = train::prepare(corpus.manifest, corpus.bank, cfg, &cache);
  std::size_t failed = 0;
  const auto rows = train::width_sweep(cfg, widths, prepared, [&](const train::SweepRow& r) {
    if (r.table) {
      std::cerr << "width " << r.width << "  mean " << r.table->mean() << "\n";
    } else {
      ++failed;
      std::cerr << "error: width " << r.width << ": " << r.error << "\n";
    }
  });
  const auto tsv = train::sweep_tsv(rows);
  if (!f.out.empty()) write_text(f.out, tsv);
  std::cout << tsv;
  return failed == 0 ? 0 : kExitRuntime;
}

// ---------------------------------------------------------------------------

struct GradcheckFlags {
  std::size_t trials = 20;
  double h = 1e-5;
  double tol = 1e-6;
  bool break_gradient = false;
};

int cmd_gradcheck(const Globals& g, const GradcheckFlags& f) {
  if (f.trials == 0) throw UsageError("--trials must be >= 1");
  if (!(f.h > 0.0)) throw UsageError("--step must be positive");
  double worst = 0.0;
  for (std::size_t t = 0; t < f.trials; ++t) {
    const auto p = gradcheck::random_problem(derive_seed(g.seed, "gradcheck", t));
    const auto tr = model::forward(p.params, p.input, p.true_len);
    auto grads = model::backward(p.params, tr, p.input, p.target, p.lambda);
    if (f.break_gradient) grads.softmax.biases[0] = -grads.softmax.biases[0] + 1e-3;
    const auto r = gradcheck::compare(p, grads, f.h);
    worst = std::max(worst, r.max_rel_error);
    const auto shape = p.params.shape();
    std::cout << "trial " << t << "  rows " << shape.input_rows << "  T " << p.true_len << "  widths " << shape.widths.size()
              << "  P " << shape.filters_per_width << "  classes " << shape.n_classes << "  params " << r.n_checked
              << "  max_rel_error " << r.max_rel_error << "  (" << r.worst_block << ")\n";
  }
  const bool ok = worst < f.tol;
  std::cout << "max_rel_error\t" << worst << "\n" << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : kExitRuntime;
}

// ---------------------------------------------------------------------------
// Config file: key=value lines, '#' comments. Keys are long flag names
// without dashes. Values are injected ahead of the command-line flags, and
// options keep their last value, so flags override the file.

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::size_t sub_pos = args.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (auto* s = app.get_subcommand_no_throw(args[i])) {
      sub = s;
      sub_pos = i;
      break;
    }
  }
  std::vector<std::string> global_part, sub_part;
  for (const auto& [key, value] : read_config_file(config_path)) {
    const std::string flag = "--" + key;
    CLI::Option* opt = nullptr;
    std::vector<std::string>* dst = nullptr;
    if (sub && (opt = sub->get_option_no_throw(flag))) {
      dst = &sub_part;
    } else if ((opt = app.get_option_no_throw(flag))) {
      dst = &global_part;
    } else {
      throw UsageError("unknown key '" + key + "' in config file " + config_path);
    }
    if (key == "config") continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value.empty()) dst->push_back(flag);
      else if (value != "false" && value != "0") throw UsageError("config key '" + key + "' expects true/false");
    } else {
      dst->push_back(flag);
      dst->push_back(value);
    }
  }
  std::vector<std::string> out(global_part);
  out.insert(out.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(std::min(sub_pos + 1, args.size())));
  out.insert(out.end(), sub_part.begin(), sub_part.end());
  if (sub_pos + 1 < args.size()) out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"onemax: 1-max pooling CNN for robust audio event recognition"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Global seed; every random stream derives from it")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for extraction, training and evaluation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Config file of key=value lines (flags override it)");

  SynthFlags synth_f;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event corpus with noises and a manifest");
  synth->add_option("--out", synth_f.out, "Output directory")->required();
  synth->add_option("--classes", synth_f.classes, "Number of event classes")->capture_default_str();
  synth->add_option("--per-class", synth_f.per_class, "Instances per class (split 40/10/30)")->capture_default_str();
  synth->add_option("--min-dur", synth_f.min_dur, "Shortest event, seconds")->capture_default_str();
  synth->add_option("--max-dur", synth_f.max_dur, "Longest event, seconds")->capture_default_str();
  synth->add_option("--noise-dur", synth_f.noise_dur, "Noise recording length, seconds")->capture_default_str();

  ExtractFlags extract_f;
  auto* extract = app.add_subcommand("extract", "Extract SIFs for every (record, condition) into the cache");
  add_corpus_flags(extract, extract_f.corpus);
  add_feature_flags(extract, extract_f.feat);
  extract->add_option("--copies-per-snr", extract_f.copies_per_snr, "Corrupted copies per SNR level")
      ->capture_default_str();

  TrainFlags train_f;
  auto* trainc = app.add_subcommand("train", "Train with validation-based retention and report test accuracy");
  add_corpus_flags(trainc, train_f.corpus);
  add_feature_flags(trainc, train_f.feat);
  add_model_flags(trainc, train_f.model);
  trainc->add_option("--out", train_f.out, "Output directory for checkpoint and reports")->capture_default_str();
  trainc->add_option("--resume", train_f.resume, "Continue from a last.state file");
  trainc->add_option("--log-every", train_f.log_every, "Progress line every N epochs (0 = quiet)")
      ->capture_default_str();
  trainc->add_flag("--print-config", train_f.print_config, "Print the resolved configuration and exit");
  // --manifest is not needed to print the configuration.
  trainc->get_option("--manifest")->required(false);

  EvalFlags eval_f;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on the test split under all noise conditions");
  add_corpus_flags(evalc, eval_f.corpus);
  evalc->add_option("--ckpt", eval_f.ckpt, "Model checkpoint (.1max)")->required();
  evalc->add_option("--energy-scale", eval_f.energy_scale, "Multiplier for the energy row")->capture_default_str();
  evalc->add_option("--n-freq", eval_f.n_freq, "Frequency bins F")->capture_default_str();
  evalc->add_flag("--unmasked-pool", eval_f.unmasked_pool, "Pool over zero-padded positions too");
  evalc->add_flag("--tsv", eval_f.tsv, "Tab-separated output with fractional accuracies");

  SweepFlags sweep_f;
  auto* sweep = app.add_subcommand("sweep", "Train one single-width model per width; emit width/condition/accuracy TSV");
  add_corpus_flags(sweep, sweep_f.corpus);
  add_feature_flags(sweep, sweep_f.feat);
  add_model_flags(sweep, sweep_f.model);
  sweep->add_option("--sweep-widths", sweep_f.sweep_widths, "Widths to sweep")->capture_default_str();
  sweep->add_option("--out", sweep_f.out, "Also write the TSV to this file");

  GradcheckFlags grad_f;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  grad->add_option("--trials", grad_f.trials, "Random model configurations")->capture_default_str();
  grad->add_option("--step", grad_f.h, "Finite-difference step")->capture_default_str();
  grad->add_option("--tol", grad_f.tol, "Pass threshold on max relative error")->capture_default_str();
  grad->add_flag("--break-gradient", grad_f.break_gradient, "Corrupt one analytic gradient (negative control)")
      ->group("");

  try {
    auto expanded = expand_config(app, std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(g, synth_f);
    if (*extract) return cmd_extract(g, extract_f);
    if (*trainc) {
      if (!train_f.print_config && train_f.corpus.manifest.empty()) throw UsageError("--manifest is required");
      return cmd_train(g, train_f);
    }
    if (*evalc) return cmd_eval(g, eval_f);
    if (*sweep) return cmd_sweep(g, sweep_f);
    if (*grad) return cmd_gradcheck(g, grad_f);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
