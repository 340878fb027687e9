#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dot/matrix.hpp"
#include "dot/rng.hpp"
#include "dot/tape.hpp"

namespace dot {

// Builds a scalar loss on the given tape; handles[i] is the registered
// tape variable for params[i].
using LossBuilder = std::function<int(Tape&, const std::vector<int>&)>;

// Compares analytic gradients against central differences. Returns the max
// over sampled coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
// max_coords <= 0 checks every coordinate; otherwise a seeded sample per
// parameter is probed.
inline double grad_check(std::vector<Matrix*> params, const LossBuilder& build,
                         double step, int max_coords = -1, uint64_t seed = 0) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw ParamError("grad_check: step must lie in [1e-7, 1e-3], got " +
                     std::to_string(step));

  auto eval = [&]() -> double {
    Tape t;
    std::vector<int> handles;
    handles.reserve(params.size());
    for (Matrix* p : params) handles.push_back(t.param(*p));
    const int loss = build(t, handles);
    return t.value(loss)(0, 0);
  };

  // analytic pass
  std::vector<Matrix> analytic;
  {
    Tape t;
    std::vector<int> handles;
    for (Matrix* p : params) handles.push_back(t.param(*p));
    const int loss = build(t, handles);
    t.backward(loss);
    for (int h : handles) analytic.push_back(t.grad(h));
  }

  Rng rng(seed);
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& p = *params[pi];
    const size_t n = p.size();
    std::vector<size_t> coords;
    if (max_coords <= 0 || n <= static_cast<size_t>(max_coords)) {
      coords.resize(n);
      for (size_t c = 0; c < n; ++c) coords[c] = c;
    } else {
      for (int c = 0; c < max_coords; ++c) coords.push_back(rng.below(n));
    }
    for (size_t c : coords) {
      const double saved = p.data()[c];
      p.data()[c] = saved + step;
      const double fp = eval();
      p.data()[c] = saved - step;
      const double fm = eval();
      p.data()[c] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("grad_check: non-finite loss probing param " +
                           std::to_string(pi) + " coord " + std::to_string(c));
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi].data()[c];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dot
