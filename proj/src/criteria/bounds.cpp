#include "oed/criteria.hpp"

#include "oed/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace oed {

double bound_constant_C(int k, int p, int r) {
  if (p <= 1) throw ContractError("bound constant: p must exceed 1");
  if (k < 1) throw ContractError("bound constant: k must be at least 1");
  if (r < k) throw ContractError("bound constant: r must be at least k");
  const double kp = k + p;
  const double p1 = p + 1.0;
  const double mu = std::sqrt(static_cast<double>(r - k)) + std::sqrt(kp);
  const double e2 = std::numbers::e * std::numbers::e;
  return e2 * kp / (p1 * p1) * std::pow(1.0 / (2.0 * std::numbers::pi * p1), 2.0 / p1) *
         (mu + std::numbers::sqrt2) * (mu + std::numbers::sqrt2) * p1 / (p - 1.0);
}

BoundReport theorem_bound(const Vector& lambda, int k, int p, int q, double z_norm, Criterion mode) {
  const Index n = lambda.size();
  if (k < 1 || k >= n) throw ContractError("theorem bound: need 1 <= k < spectrum length");
  if (q < 1) throw ContractError("theorem bound: q must be at least 1");
  if (!(z_norm > 0.0)) throw ContractError("theorem bound: ||Z|| must be positive");
  for (Index i = 1; i < n; ++i) {
    if (lambda(i) > lambda(i - 1) * (1.0 + 1e-12) + 1e-300) {
      throw ContractError("theorem bound: spectrum must be sorted in descending order");
    }
  }
  const double lk = lambda(k - 1);
  const double lk1 = lambda(k);
  if (!(lk > 0.0)) throw AssumptionError("theorem bound: lambda_k must be positive");
  const double gamma = lk1 / lk;
  if (!(gamma < 1.0)) {
    throw AssumptionError("theorem bound: eigenvalue ratio gamma_k = " + std::to_string(gamma) + " is not below 1");
  }

  int r = 0;
  for (Index i = 0; i < n; ++i) {
    if (lambda(i) > 1e-12 * lambda(0)) ++r;
  }
  r = std::max(r, k);

  BoundReport b;
  b.criterion = mode;
  b.k = k;
  b.p = p;
  b.q = q;
  b.r = r;
  b.gamma_k = gamma;
  b.C = bound_constant_C(k, p, r);
  b.z_norm = mode == Criterion::mod ? 1.0 : z_norm;
  const double scale = std::pow(gamma, 2 * q - 1) * b.C;
  for (Index i = k; i < n; ++i) {
    const double li = std::max(0.0, lambda(i));
    b.trace_tail += li / (1.0 + li);
    const double ls = scale * li;
    b.trace_sketched += ls / (1.0 + ls);
  }
  b.bound_value = b.z_norm * (b.trace_tail + b.trace_sketched);
  return b;
}

double gradient_bound(const BoundReport& value_bound, double pj_norm) {
  if (pj_norm < 0.0) throw ContractError("gradient bound: ||P_j|| must be nonnegative");
  return 2.0 * pj_norm * value_bound.bound_value;
}

nlohmann::json BoundReport::to_json() const {
  return {{"criterion", to_string(criterion)},
          {"k", k},
          {"p", p},
          {"q", q},
          {"r", r},
          {"gamma_k", gamma_k},
          {"C", C},
          {"z_norm", z_norm},
          {"trace_tail", trace_tail},
          {"trace_sketched", trace_sketched},
          {"bound_value", bound_value}};
}

}  // namespace oed
