#pragma once

// Central finite-difference check of backward(). The numeric side only
// calls forward() and loss(); it never touches the analytic gradient code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "onemax/matrix.hpp"
#include "onemax/model.hpp"
#include "onemax/rng.hpp"

namespace onemax::gradcheck {

// |a - n| / max(|a|, |n|, floor). The floor keeps parameters whose true
// derivative is zero from dividing rounding noise by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct CheckResult {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  std::size_t n_checked = 0;
};

struct Problem {
  model::ModelParams params;
  Matrix input;
  std::size_t true_len = 0;
  std::size_t target = 0;
  double lambda = 0.0;
};

inline double objective(const Problem& p, const model::ModelParams& params) {
  const auto tr = model::forward(params, p.input, p.true_len);
  return model::loss(tr, p.target, params, p.lambda).total;
}

// Compares `analytic` to central differences with step h for every
// parameter of p.params.
inline CheckResult compare(const Problem& p, const model::Gradients& analytic, double h = 1e-5) {
  CheckResult res;
  model::ModelParams work = p.params;
  auto wb = param_blocks(work);
  const auto ab = param_blocks(analytic);
  for (std::size_t b = 0; b < wb.size(); ++b) {
    for (std::size_t i = 0; i < wb[b].values.size(); ++i) {
      const double orig = wb[b].values[i];
      wb[b].values[i] = orig + h;
      const double fp = objective(p, work);
      wb[b].values[i] = orig - h;
      const double fm = objective(p, work);
      wb[b].values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = relative_error(ab[b].values[i], numeric);
      ++res.n_checked;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_block = wb[b].name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

struct ProblemRanges {
  std::size_t min_rows = 8, max_rows = 53;
  std::size_t min_t = 5, max_t = 40;
  std::size_t min_p = 2, max_p = 5;
  std::size_t min_classes = 2, max_classes = 6;
  std::vector<std::size_t> width_pool = {1, 3, 5};
};

// Random small model and input. Weights are drawn at a scale where ReLU
// clipping and 1-max switching are rare under an h-sized perturbation.
inline Problem random_problem(std::uint64_t seed, const ProblemRanges& r = {}) {
  Rng rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
  model::ModelShape shape;
  shape.input_rows = pick(r.min_rows, r.max_rows);
  shape.filters_per_width = pick(r.min_p, r.max_p);
  shape.n_classes = pick(r.min_classes, r.max_classes);
  shape.widths.clear();
  while (shape.widths.empty())
    for (std::size_t w : r.width_pool)
      if (rng.uniform() < 0.6) shape.widths.push_back(w);

  Problem p;
  p.params = model::init_params(shape, rng.next());
  for (auto& g : p.params.bank.groups)
    for (double& b : g.biases) b = rng.uniform(-0.1, 0.1);
  for (double& b : p.params.softmax.biases) b = rng.uniform(-0.1, 0.1);

  const std::size_t t = pick(r.min_t, r.max_t);
  p.true_len = t;
  p.input = Matrix(shape.input_rows, std::max(t, shape.max_width()));
  for (std::size_t c = 0; c < t; ++c)
    for (std::size_t k = 0; k < shape.input_rows; ++k) p.input(k, c) = rng.uniform(0.0, 1.0);
  p.target = static_cast<std::size_t>(rng.below(shape.n_classes));
  p.lambda = rng.uniform(0.0, 1e-2);
  return p;
}

}  // namespace onemax::gradcheck
