#pragma once

// Three-layer 1-max pooling CNN: time-direction convolution with Q filter
// widths of P full-height filters each, ReLU, 1-max pooling over the valid
// positions of each feature map, inverted dropout on the pooled vector and a
// softmax output layer. Gradients are derived by hand for exactly this graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onemax/error.hpp"
#include "onemax/matrix.hpp"
#include "onemax/params.hpp"
#include "onemax/rng.hpp"

namespace onemax::model {

struct ModelShape {
  std::size_t input_rows = 52;
  std::vector<std::size_t> widths = {1, 3, 5, 7, 9};
  std::size_t filters_per_width = 16;
  std::size_t n_classes = 2;

  std::size_t pooled_dim() const { return widths.size() * filters_per_width; }
  std::size_t max_width() const { return widths.empty() ? 0 : widths.back(); }

  void validate() const {
    if (input_rows == 0) throw InvalidArgument("model: input_rows must be >= 1");
    if (widths.empty()) throw InvalidArgument("model: need at least one filter width");
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (widths[i] == 0) throw InvalidArgument("model: filter widths must be >= 1");
      if (i > 0 && widths[i] <= widths[i - 1])
        throw InvalidArgument("model: filter widths must be strictly increasing");
    }
    if (filters_per_width == 0) throw InvalidArgument("model: filters_per_width must be >= 1");
    if (n_classes < 2) throw InvalidArgument("model: need at least two classes");
  }
};

// P filters of one width. Filter p is a column-major [input_rows x width]
// block starting at weights[p * input_rows * width]: element (row k, time
// offset l) sits at p * rows * width + l * rows + k.
struct FilterGroup {
  std::size_t width = 0;
  std::size_t count = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  std::span<const double> filter(std::size_t p, std::size_t rows) const {
    return {weights.data() + p * rows * width, rows * width};
  }
  std::span<double> filter(std::size_t p, std::size_t rows) {
    return {weights.data() + p * rows * width, rows * width};
  }
  friend bool operator==(const FilterGroup&, const FilterGroup&) = default;
};

struct FilterBank {
  std::size_t input_rows = 0;
  std::vector<FilterGroup> groups;

  std::size_t pooled_dim() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.count;
    return n;
  }
  std::size_t max_width() const { return groups.empty() ? 0 : groups.back().width; }
  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

// Row-major [n_classes x input_dim] weights.
struct SoftmaxParams {
  std::size_t n_classes = 0;
  std::size_t input_dim = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  friend bool operator==(const SoftmaxParams&, const SoftmaxParams&) = default;
};

struct ParamTag {};
struct GradTag {};

// The trainable state. ModelParams and Gradients share the layout but are
// distinct types so one cannot be passed where the other is expected.
template <class Tag>
struct BasicParams {
  FilterBank bank;
  SoftmaxParams softmax;

  std::size_t n_classes() const { return softmax.n_classes; }
  std::size_t input_rows() const { return bank.input_rows; }
  std::size_t pooled_dim() const { return bank.pooled_dim(); }

  ModelShape shape() const {
    ModelShape s;
    s.input_rows = bank.input_rows;
    s.widths.clear();
    for (const auto& g : bank.groups) s.widths.push_back(g.width);
    s.filters_per_width = bank.groups.empty() ? 0 : bank.groups.front().count;
    s.n_classes = softmax.n_classes;
    return s;
  }

  static BasicParams zeros(const ModelShape& shape) {
    shape.validate();
    BasicParams p;
    p.bank.input_rows = shape.input_rows;
    for (std::size_t w : shape.widths) {
      FilterGroup g;
      g.width = w;
      g.count = shape.filters_per_width;
      g.weights.assign(g.count * shape.input_rows * w, 0.0);
      g.biases.assign(g.count, 0.0);
      p.bank.groups.push_back(std::move(g));
    }
    p.softmax.n_classes = shape.n_classes;
    p.softmax.input_dim = shape.pooled_dim();
    p.softmax.weights.assign(shape.n_classes * shape.pooled_dim(), 0.0);
    p.softmax.biases.assign(shape.n_classes, 0.0);
    return p;
  }

  // Zero-valued set with the same layout as `other` (groups may differ in P).
  template <class OtherTag>
  static BasicParams zeros_like(const BasicParams<OtherTag>& other) {
    BasicParams p;
    p.bank.input_rows = other.bank.input_rows;
    for (const auto& g : other.bank.groups)
      p.bank.groups.push_back({g.width, g.count, std::vector<double>(g.weights.size(), 0.0),
                               std::vector<double>(g.biases.size(), 0.0)});
    p.softmax = {other.softmax.n_classes, other.softmax.input_dim,
                 std::vector<double>(other.softmax.weights.size(), 0.0),
                 std::vector<double>(other.softmax.biases.size(), 0.0)};
    return p;
  }

  template <class OtherTag>
  bool same_layout(const BasicParams<OtherTag>& o) const {
    if (bank.input_rows != o.bank.input_rows || bank.groups.size() != o.bank.groups.size()) return false;
    for (std::size_t q = 0; q < bank.groups.size(); ++q) {
      const auto& a = bank.groups[q];
      const auto& b = o.bank.groups[q];
      if (a.width != b.width || a.count != b.count || a.weights.size() != b.weights.size() ||
          a.biases.size() != b.biases.size())
        return false;
    }
    return softmax.n_classes == o.softmax.n_classes && softmax.input_dim == o.softmax.input_dim &&
           softmax.weights.size() == o.softmax.weights.size() &&
           softmax.biases.size() == o.softmax.biases.size();
  }

  friend bool operator==(const BasicParams&, const BasicParams&) = default;
};

using ModelParams = BasicParams<ParamTag>;
using Gradients = BasicParams<GradTag>;

template <class Tag>
std::vector<ParamBlock> param_blocks(BasicParams<Tag>& p) {
  std::vector<ParamBlock> blocks;
  for (auto& g : p.bank.groups) {
    const std::string prefix = "conv.w" + std::to_string(g.width);
    blocks.push_back({prefix + ".weights", g.weights, false});
    blocks.push_back({prefix + ".biases", g.biases, true});
  }
  blocks.push_back({"softmax.weights", p.softmax.weights, false});
  blocks.push_back({"softmax.biases", p.softmax.biases, true});
  return blocks;
}

template <class Tag>
std::vector<ConstParamBlock> param_blocks(const BasicParams<Tag>& p) {
  std::vector<ConstParamBlock> blocks;
  for (const auto& g : p.bank.groups) {
    const std::string prefix = "conv.w" + std::to_string(g.width);
    blocks.push_back({prefix + ".weights", g.weights, false});
    blocks.push_back({prefix + ".biases", g.biases, true});
  }
  blocks.push_back({"softmax.weights", p.softmax.weights, false});
  blocks.push_back({"softmax.biases", p.softmax.biases, true});
  return blocks;
}

template <class Tag>
BasicParams<Tag> zeros_like(const BasicParams<Tag>& p) {
  return BasicParams<Tag>::zeros_like(p);
}

// Uniform [-s, s] with s = sqrt(6 / (fan_in + fan_out)); biases zero.
// Filters: fan_in = rows * w, fan_out = P * w. Softmax: fan_in = P * Q,
// fan_out = n_classes.
inline ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(shape);
  for (auto& g : p.bank.groups) {
    Rng rng(derive_seed(seed, "init.conv", g.width));
    const double s = std::sqrt(6.0 / static_cast<double>(shape.input_rows * g.width + g.count * g.width));
    for (double& w : g.weights) w = rng.uniform(-s, s);
  }
  Rng rng(derive_seed(seed, "init.softmax"));
  const double s = std::sqrt(6.0 / static_cast<double>(p.softmax.input_dim + p.softmax.n_classes));
  for (double& w : p.softmax.weights) w = rng.uniform(-s, s);
  return p;
}

// ---------------------------------------------------------------------------
// Layers

namespace detail {

// o_i + b for i in [0, n_positions), correlation (no kernel flip).
inline void correlate(const Matrix& input, std::span<const double> filter, std::size_t width,
                      double bias, std::size_t n_positions, std::span<double> out) {
  const std::size_t rows = input.rows();
  for (std::size_t i = 0; i < n_positions; ++i) {
    double acc = 0.0;
    for (std::size_t l = 0; l < width; ++l) {
      const double* s = input.col(i + l).data();
      const double* w = filter.data() + l * rows;
      for (std::size_t k = 0; k < rows; ++k) acc += s[k] * w[k];
    }
    out[i] = acc + bias;
  }
}

}  // namespace detail

// a_i = max(0, sum_{k,l} S[k, i+l] * W[k, l] + b), i = 0 .. T - w.
inline std::vector<double> conv_time_valid(const Matrix& input, const Matrix& filter, double bias) {
  if (input.rows() != filter.rows()) throw ShapeError("conv_time_valid: input and filter row counts differ");
  if (filter.cols() == 0) throw ShapeError("conv_time_valid: empty filter");
  if (input.cols() < filter.cols()) throw ShapeError("conv_time_valid: input narrower than filter");
  const std::size_t n = input.cols() - filter.cols() + 1;
  std::vector<double> out(n);
  detail::correlate(input, filter.data(), filter.cols(), bias, n, out);
  for (double& a : out) a = std::max(0.0, a);
  return out;
}

struct PoolResult {
  double value = 0.0;
  std::size_t index = 0;
};

// Max over the first valid_len entries; ties resolve to the earliest index.
inline PoolResult one_max_pool(std::span<const double> feature_map, std::size_t valid_len) {
  if (valid_len == 0) throw InvalidArgument("one_max_pool: valid_len must be >= 1");
  if (valid_len > feature_map.size()) throw InvalidArgument("one_max_pool: valid_len exceeds feature map");
  PoolResult r{feature_map[0], 0};
  for (std::size_t i = 1; i < valid_len; ++i)
    if (feature_map[i] > r.value) r = {feature_map[i], i};
  return r;
}

struct PaddedInput {
  Matrix values;
  std::size_t true_len = 0;
};

// Right-pads with zero columns to at least min_cols.
inline PaddedInput pad_to_min(const Matrix& input, std::size_t min_cols) {
  if (min_cols == 0) throw InvalidArgument("pad_to_min: min_cols must be >= 1");
  PaddedInput out{input, input.cols()};
  out.values.pad_cols(min_cols);
  return out;
}

struct Softmax {
  std::vector<double> probs;
  std::vector<double> log_probs;
};

// Max-subtracted softmax.
inline Softmax softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Softmax s{std::vector<double>(logits.size()), std::vector<double>(logits.size())};
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    s.probs[c] = std::exp(logits[c] - m);
    sum += s.probs[c];
  }
  const double log_sum = std::log(sum);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    s.probs[c] /= sum;
    s.log_probs[c] = (logits[c] - m) - log_sum;
  }
  return s;
}

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Eval;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  // Pool over every position of the padded input, padding included.
  bool unmasked_pool = false;
  // Keep the full pre-/post-activation feature maps in the trace.
  bool keep_maps = false;
};

struct ForwardTrace {
  std::size_t true_len = 0;
  std::size_t input_cols = 0;
  std::vector<double> pooled;      // 1-max of each post-ReLU map, length P*Q
  std::vector<std::size_t> argmax; // pooled position within each map
  std::vector<double> pooled_pre;  // o + b at the pooled position
  std::vector<double> mask;        // dropout multipliers: 0 or 1/(1-rate); 1 in eval
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> log_probs;
  std::vector<std::vector<double>> pre_maps;  // only with keep_maps
  std::vector<std::vector<double>> maps;      // only with keep_maps
  friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

// Number of pooled positions of a width-w map for an event of true_len
// columns. A padded input always has at least max-width columns, so the
// single position of an over-wide filter exists.
inline std::size_t valid_positions(std::size_t true_len, std::size_t width) {
  return true_len >= width ? true_len - width + 1 : 1;
}

inline ForwardTrace forward(const ModelParams& params, const Matrix& input, std::size_t true_len,
                            const ForwardOptions& opt = {}) {
  const std::size_t rows = params.input_rows();
  if (input.rows() != rows)
    throw ShapeError("forward: input has " + std::to_string(input.rows()) + " rows, model expects " +
                     std::to_string(rows));
  if (true_len == 0 || true_len > input.cols()) throw ShapeError("forward: true_len out of range");
  if (input.cols() < params.bank.max_width())
    throw ShapeError("forward: input narrower than the widest filter; pad_to_min first");
  if (opt.mode == Mode::Train && !(opt.dropout_rate >= 0.0 && opt.dropout_rate < 1.0))
    throw InvalidArgument("forward: dropout_rate must be in [0, 1)");
  if (params.softmax.input_dim != params.pooled_dim()) throw ShapeError("forward: softmax input dim mismatch");

  const std::size_t dim = params.pooled_dim();
  ForwardTrace tr;
  tr.true_len = true_len;
  tr.input_cols = input.cols();
  tr.pooled.resize(dim);
  tr.argmax.resize(dim);
  tr.pooled_pre.resize(dim);
  if (opt.keep_maps) {
    tr.pre_maps.resize(dim);
    tr.maps.resize(dim);
  }

  std::vector<double> pre;
  std::size_t j = 0;
  for (const auto& g : params.bank.groups) {
    const std::size_t n_positions = input.cols() - g.width + 1;
    const std::size_t valid = opt.unmasked_pool ? n_positions : valid_positions(true_len, g.width);
    for (std::size_t p = 0; p < g.count; ++p, ++j) {
      pre.resize(valid);
      detail::correlate(input, g.filter(p, rows), g.width, g.biases[p], valid, pre);
      // Pool the post-ReLU map; max(0, .) is monotone so the earliest
      // maximiser of the pre-activation is also the earliest maximiser of
      // the activation unless the whole map clips to zero.
      std::size_t best = 0;
      double best_act = std::max(0.0, pre[0]);
      for (std::size_t i = 1; i < valid; ++i) {
        const double a = std::max(0.0, pre[i]);
        if (a > best_act) {
          best_act = a;
          best = i;
        }
      }
      tr.pooled[j] = best_act;
      tr.argmax[j] = best;
      tr.pooled_pre[j] = pre[best];
      if (opt.keep_maps) {
        tr.pre_maps[j] = pre;
        tr.maps[j].resize(valid);
        for (std::size_t i = 0; i < valid; ++i) tr.maps[j][i] = std::max(0.0, pre[i]);
      }
    }
  }

  tr.mask.assign(dim, 1.0);
  if (opt.mode == Mode::Train && opt.dropout_rate > 0.0) {
    Rng rng(opt.seed);
    const double keep_scale = 1.0 / (1.0 - opt.dropout_rate);
    for (double& m : tr.mask) m = rng.uniform() < opt.dropout_rate ? 0.0 : keep_scale;
  }

  const auto& sm = params.softmax;
  tr.logits.assign(sm.n_classes, 0.0);
  for (std::size_t c = 0; c < sm.n_classes; ++c) {
    const double* w = sm.weights.data() + c * dim;
    double z = sm.biases[c];
    for (std::size_t k = 0; k < dim; ++k) z += w[k] * (tr.pooled[k] * tr.mask[k]);
    tr.logits[c] = z;
  }
  auto s = softmax(tr.logits);
  tr.probs = std::move(s.probs);
  tr.log_probs = std::move(s.log_probs);
  return tr;
}

// Class with the highest probability; ties resolve to the lowest index.
inline std::size_t predicted_class(const ForwardTrace& tr) {
  return static_cast<std::size_t>(std::max_element(tr.logits.begin(), tr.logits.end()) - tr.logits.begin());
}

// ---------------------------------------------------------------------------
// Objective

// (lambda / 2) * sum of squared weights; biases join only when asked.
template <class Tag>
double regularizer(const BasicParams<Tag>& params, double lambda, bool regularize_biases = false) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& b : param_blocks(params)) {
    if (b.is_bias && !regularize_biases) continue;
    for (double v : b.values) sum += v * v;
  }
  return 0.5 * lambda * sum;
}

struct LossTerms {
  double total = 0.0;
  double cross_entropy = 0.0;
  double regularizer = 0.0;
  bool clamped = false;  // target probability underflowed to zero
};

inline constexpr double kMinProbability = 1e-300;

inline double cross_entropy(const ForwardTrace& trace, std::size_t target, bool* clamped = nullptr) {
  if (target >= trace.probs.size()) throw InvalidArgument("loss: target class out of range");
  if (trace.probs[target] == 0.0) {
    if (clamped) *clamped = true;
    return -std::log(kMinProbability);
  }
  return -trace.log_probs[target];
}

inline LossTerms loss(const ForwardTrace& trace, std::size_t target, const ModelParams& params, double lambda,
                      bool regularize_biases = false) {
  if (trace.probs.size() != params.n_classes()) throw ShapeError("loss: trace/params class count mismatch");
  LossTerms t;
  t.cross_entropy = cross_entropy(trace, target, &t.clamped);
  t.regularizer = regularizer(params, lambda, regularize_biases);
  t.total = t.cross_entropy + t.regularizer;
  return t;
}

// ---------------------------------------------------------------------------
// Gradients

// Adds scale * d(cross-entropy)/d(theta) for one sample into `grads`. The
// conv gradient of each filter flows only through its pooled position and
// vanishes when that position was clipped by the ReLU.
inline void accumulate_gradient(const ModelParams& params, const ForwardTrace& trace, const Matrix& input,
                                std::size_t target, double scale, Gradients& grads) {
  const std::size_t dim = params.pooled_dim();
  const std::size_t n_classes = params.n_classes();
  const std::size_t rows = params.input_rows();
  if (trace.pooled.size() != dim || trace.probs.size() != n_classes || trace.mask.size() != dim ||
      trace.argmax.size() != dim)
    throw ShapeError("backward: trace does not match params");
  if (input.rows() != rows || input.cols() != trace.input_cols) throw ShapeError("backward: input does not match trace");
  if (!grads.same_layout(params)) throw ShapeError("backward: gradient layout does not match params");
  if (target >= n_classes) throw InvalidArgument("backward: target class out of range");

  std::vector<double> dlogit(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) dlogit[c] = scale * (trace.probs[c] - (c == target ? 1.0 : 0.0));

  const auto& w = params.softmax.weights;
  auto& gw = grads.softmax.weights;
  std::vector<double> dpooled(dim, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    grads.softmax.biases[c] += dlogit[c];
    const double dc = dlogit[c];
    for (std::size_t k = 0; k < dim; ++k) {
      const double dropped = trace.pooled[k] * trace.mask[k];
      gw[c * dim + k] += dc * dropped;
      dpooled[k] += dc * w[c * dim + k];
    }
  }

  std::size_t j = 0;
  for (std::size_t q = 0; q < params.bank.groups.size(); ++q) {
    const auto& g = params.bank.groups[q];
    auto& gg = grads.bank.groups[q];
    for (std::size_t p = 0; p < g.count; ++p, ++j) {
      if (!(trace.pooled_pre[j] > 0.0)) continue;
      const double d = dpooled[j] * trace.mask[j];
      if (d == 0.0) continue;
      gg.biases[p] += d;
      auto gf = gg.filter(p, rows);
      for (std::size_t l = 0; l < g.width; ++l) {
        const auto col = input.col(trace.argmax[j] + l);
        for (std::size_t k = 0; k < rows; ++k) gf[l * rows + k] += d * col[k];
      }
    }
  }
}

// Adds lambda * theta for every regularized parameter.
inline void add_regularizer_gradient(const ModelParams& params, double lambda, bool regularize_biases,
                                     Gradients& grads) {
  if (lambda == 0.0) return;
  auto src = param_blocks(params);
  auto dst = param_blocks(grads);
  for (std::size_t b = 0; b < src.size(); ++b) {
    if (src[b].is_bias && !regularize_biases) continue;
    for (std::size_t i = 0; i < src[b].values.size(); ++i) dst[b].values[i] += lambda * src[b].values[i];
  }
}

inline Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& input,
                          std::size_t target, double lambda, bool regularize_biases = false) {
  Gradients g = Gradients::zeros_like(params);
  accumulate_gradient(params, trace, input, target, 1.0, g);
  add_regularizer_gradient(params, lambda, regularize_biases, g);
  return g;
}

}  // namespace onemax::model
