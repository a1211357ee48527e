// Shared test oracles. These stay independent of the implementation paths
// they check: the matmul oracle is a plain triple loop, and the gradient
// oracle is central finite differences over a scalar-valued function.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sbrl/nn.hpp"
#include "sbrl/tensor.hpp"

namespace sbrl::test {

// Naive dense multiply, deliberately written in a different loop order than
// the production kernel.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros({a.rows(), b.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

struct GradCheckResult {
  bool ok = true;
  double worst_rel = 0.0;
  std::string detail;
};

// Central finite differences with step h against analytic gradients.
// Tolerance: |ad - fd| <= max(abs_floor, rel * max(|ad|, |fd|)).
inline GradCheckResult check_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, const std::vector<double>& analytic,
    double rel = 1e-4, double abs_floor = 1e-7, double h = 1e-5) {
  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double ad = analytic[i];
    const double err = std::fabs(ad - fd);
    const double tol = std::max(abs_floor, rel * std::max(std::fabs(ad), std::fabs(fd)));
    const double rel_err = err / std::max({std::fabs(ad), std::fabs(fd), abs_floor});
    result.worst_rel = std::max(result.worst_rel, rel_err);
    if (err > tol) {
      result.ok = false;
      result.detail = "entry " + std::to_string(i) + ": ad=" + std::to_string(ad) +
                      " fd=" + std::to_string(fd);
      return result;
    }
  }
  return result;
}

// Flatten a ParamSet into one vector (and back) for finite-difference loops.
inline std::vector<double> flatten(const ParamSet& params) {
  std::vector<double> flat;
  for (const auto& [name, t] : params.entries)
    flat.insert(flat.end(), t.data().begin(), t.data().end());
  return flat;
}

inline ParamSet unflatten(const ParamSet& like, const std::vector<double>& flat) {
  ParamSet out = like;
  std::size_t at = 0;
  for (auto& [name, t] : out.entries)
    for (int i = 0; i < t.size(); ++i) t[i] = flat[at++];
  return out;
}

// Finite-difference check of d(loss)/d(params) for a scalar loss over a
// ParamSet, reusing check_gradient entry by entry.
inline GradCheckResult check_param_gradient(
    const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
    const ParamSet& analytic, double rel = 1e-4, double abs_floor = 1e-7,
    double h = 1e-5) {
  const std::vector<double> x = flatten(params);
  return check_gradient(
      [&](const std::vector<double>& flat) { return loss(unflatten(params, flat)); }, x,
      flatten(analytic), rel, abs_floor, h);
}

}  // namespace sbrl::test
