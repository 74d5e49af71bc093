#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mpf/param_view.hpp"

namespace mpf {

/// Central-difference gradient of a scalar function with respect to every
/// coordinate of the given parameter views: (f(p+h) - f(p-h)) / (2h).
/// Parameters are perturbed in place and restored exactly. The evaluation
/// never touches the reverse-mode tape, which is what makes it usable as an
/// independent oracle for backward().
inline std::vector<std::vector<double>> finite_diff_grad(
    const std::function<double()>& f,
    const std::vector<ParamView>& params,
    double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be > 0");
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const ParamView& p : params) {
    std::vector<double> g(p.size);
    for (std::size_t i = 0; i < p.size; ++i) {
      double saved = p.data[i];
      p.data[i] = saved + step;
      double fp = f();
      p.data[i] = saved - step;
      double fm = f();
      p.data[i] = saved;
      g[i] = (fp - fm) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Relative error with the denominator floored at `floor`; gradients below
/// the floor are compared absolutely against it (central differences with
/// step 1e-5 cannot resolve anything smaller).
inline double grad_rel_err(double a, double b, double floor = 1e-5) {
  double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace mpf
