#pragma once

#include <span>
#include <string>
#include <vector>

namespace onemax {

// A named, contiguous run of trainable values. Optimizers and serializers
// walk a parameter set as an ordered list of blocks.
struct ParamBlock {
  std::string name;
  std::span<double> values;
  bool is_bias = false;
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
  bool is_bias = false;
};

// A flat vector is a parameter set with a single block.
inline std::vector<ParamBlock> param_blocks(std::vector<double>& v) { return {{"x", v, false}}; }
inline std::vector<ConstParamBlock> param_blocks(const std::vector<double>& v) { return {{"x", v, false}}; }
inline std::vector<double> zeros_like(const std::vector<double>& v) { return std::vector<double>(v.size(), 0.0); }

}  // namespace onemax
