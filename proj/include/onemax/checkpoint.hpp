#pragma once

// Binary model checkpoints ("1MAX") and Adam state records ("1MXA").
//
// Model checkpoint, all little-endian:
//   "1MAX" u32 version=1 u32 n_classes u32 input_rows u32 Q
//   Q x { u32 width u32 P f64[P*input_rows*width] weights f64[P] biases }
//   f64[n_classes*P*Q] softmax weights   f64[n_classes] softmax biases
//   u64 FNV-1a of all preceding bytes
//
// Filter weights are laid out as in FilterGroup: filter-major, then time
// offset, then frequency row.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "onemax/binary_io.hpp"
#include "onemax/model.hpp"
#include "onemax/optim.hpp"

namespace onemax {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class Tag>
void put_params(ByteWriter& w, const model::BasicParams<Tag>& p) {
  w.u32(static_cast<std::uint32_t>(p.n_classes()));
  w.u32(static_cast<std::uint32_t>(p.input_rows()));
  w.u32(static_cast<std::uint32_t>(p.bank.groups.size()));
  for (const auto& g : p.bank.groups) {
    w.u32(static_cast<std::uint32_t>(g.width));
    w.u32(static_cast<std::uint32_t>(g.count));
    w.f64s(g.weights);
    w.f64s(g.biases);
  }
  w.f64s(p.softmax.weights);
  w.f64s(p.softmax.biases);
}

template <class Tag>
model::BasicParams<Tag> get_params(ByteReader& r) {
  model::BasicParams<Tag> p;
  const std::size_t n_classes = r.u32();
  const std::size_t rows = r.u32();
  const std::size_t q = r.u32();
  if (n_classes < 2) r.fail("n_classes must be >= 2");
  if (rows == 0) r.fail("input_rows must be >= 1");
  if (q == 0) r.fail("need at least one filter group");
  p.bank.input_rows = rows;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < q; ++i) {
    model::FilterGroup g;
    g.width = r.u32();
    g.count = r.u32();
    if (g.width == 0 || g.count == 0) r.fail("filter group with zero width or count");
    if (i > 0 && g.width <= p.bank.groups.back().width) r.fail("filter widths not strictly increasing");
    if (r.remaining() / 8 < g.count * rows * g.width) r.fail("unexpected end of data");
    g.weights.resize(g.count * rows * g.width);
    g.biases.resize(g.count);
    r.f64s(g.weights);
    r.f64s(g.biases);
    dim += g.count;
    p.bank.groups.push_back(std::move(g));
  }
  p.softmax.n_classes = n_classes;
  p.softmax.input_dim = dim;
  if (r.remaining() / 8 < n_classes * dim) r.fail("unexpected end of data");
  p.softmax.weights.resize(n_classes * dim);
  p.softmax.biases.resize(n_classes);
  r.f64s(p.softmax.weights);
  r.f64s(p.softmax.biases);
  return p;
}

}  // namespace detail

inline std::string encode_checkpoint(const model::ModelParams& params) {
  ByteWriter w;
  w.magic("1MAX");
  w.u32(kCheckpointVersion);
  detail::put_params(w, params);
  w.checksum();
  return w.take();
}

inline model::ModelParams decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint") {
  ByteReader r(bytes, what);
  r.expect_magic("1MAX");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported version " + std::to_string(v));
  auto p = detail::get_params<model::ParamTag>(r);
  r.verify_checksum();
  r.expect_end();
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const model::ModelParams& params) {
  write_file_bytes(path, encode_checkpoint(params));
}

inline model::ModelParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

// Adam state: "1MXA" u32 version u64 step f64 alpha beta1 beta2 epsilon,
// then m and v each in the model checkpoint body layout, then a checksum.
inline void put_adam_state(ByteWriter& w, const optim::AdamState<model::ModelParams>& s) {
  w.magic("1MXA");
  w.u32(kCheckpointVersion);
  w.u64(s.step);
  w.f64(s.config.alpha);
  w.f64(s.config.beta1);
  w.f64(s.config.beta2);
  w.f64(s.config.epsilon);
  detail::put_params(w, s.m);
  detail::put_params(w, s.v);
}

inline optim::AdamState<model::ModelParams> get_adam_state(ByteReader& r) {
  r.expect_magic("1MXA");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported adam state version " + std::to_string(v));
  optim::AdamState<model::ModelParams> s;
  s.step = r.u64();
  s.config.alpha = r.f64();
  s.config.beta1 = r.f64();
  s.config.beta2 = r.f64();
  s.config.epsilon = r.f64();
  s.m = detail::get_params<model::ParamTag>(r);
  s.v = detail::get_params<model::ParamTag>(r);
  if (!s.m.same_layout(s.v)) r.fail("adam moment layouts differ");
  return s;
}

inline std::string encode_adam_state(const optim::AdamState<model::ModelParams>& s) {
  ByteWriter w;
  put_adam_state(w, s);
  w.checksum();
  return w.take();
}

inline optim::AdamState<model::ModelParams> decode_adam_state(std::string_view bytes,
                                                              const std::string& what = "adam state") {
  ByteReader r(bytes, what);
  auto s = get_adam_state(r);
  r.verify_checksum();
  r.expect_end();
  return s;
}

}  // namespace onemax
