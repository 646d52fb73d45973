#pragma once

#include "oed/kernels.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace oed {

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradients for a symmetric positive definite operator given as
/// apply(p, q) : q = A p. `x` holds the initial guess on entry. Stops when
/// ||b - A x|| <= tol ||b||. All vector arithmetic goes through the
/// dispatched kernels.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, std::span<const double> b, std::span<double> x, double tol, int max_iter) {
  const std::size_t n = b.size();
  std::vector<double> r(n), p(n), q(n);
  CgResult res;

  const double bnorm = std::sqrt(kernels::dot(b, b));
  if (bnorm == 0.0) {
    for (auto& v : x) v = 0.0;
    res.converged = true;
    return res;
  }

  apply(std::span<const double>(x.data(), n), std::span<double>(q));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  p = r;
  double rr = kernels::dot(r, r);
  const double target = tol * bnorm;
  res.relative_residual = std::sqrt(rr) / bnorm;
  if (std::sqrt(rr) <= target) {
    res.converged = true;
    return res;
  }

  for (int it = 1; it <= max_iter; ++it) {
    apply(std::span<const double>(p), std::span<double>(q));
    const double pq = kernels::dot(p, q);
    if (!(pq > 0.0)) break;  // loss of positive definiteness or breakdown
    const double alpha = rr / pq;
    kernels::axpy(alpha, p, x);
    kernels::axpy(-alpha, q, r);
    const double rr_new = kernels::dot(r, r);
    res.iterations = it;
    res.relative_residual = std::sqrt(rr_new) / bnorm;
    if (std::sqrt(rr_new) <= target) {
      res.converged = true;
      return res;
    }
    kernels::xpby(r, rr_new / rr, p);
    rr = rr_new;
  }
  return res;
}

}  // namespace oed
