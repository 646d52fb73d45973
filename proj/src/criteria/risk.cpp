#include "oed/criteria.hpp"

#include "oed/cg.hpp"
#include "oed/errors.hpp"
#include "oed/parallel.hpp"
#include "oed/rng.hpp"

#include <cmath>
#include <vector>

namespace oed {

RiskEstimate bayes_risk_mc(const LinearOperator& fcal, const LinearOperator& z_sqrt, const NoiseWeights& noise,
                           const Vector& w_in, int n_samples, std::uint64_t seed, double cg_tol) {
  if (n_samples < 10) throw ContractError("bayes risk: need at least 10 samples");
  if (!fcal.euclidean_domain()) throw ContractError("bayes risk: fcal must have a Euclidean domain");
  if (z_sqrt.rows() != fcal.cols() || z_sqrt.cols() != fcal.cols()) {
    throw ContractError("bayes risk: z_sqrt must be square with fcal's column count");
  }
  const Vector w = ingest_design(w_in, noise.n_sensors());
  const Vector wv = noise.observation_weights(w);
  const Index n = fcal.cols();
  const Index ns = noise.n_sensors();
  Vector noise_sd(noise.n_obs());
  for (int t = 0; t < noise.n_times; ++t) {
    for (Index i = 0; i < ns; ++i) {
      noise_sd(t * ns + i) = w(i) > 0.0 ? noise.sigmas(i) / std::sqrt(w(i)) : 0.0;
    }
  }

  std::vector<double> values(static_cast<std::size_t>(n_samples), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(n_samples), 0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t sample) {
    const Vector u = rng::gaussian_vector(n, rng::split(seed, 2 * sample));
    const Vector eta = rng::gaussian_vector(noise.n_obs(), rng::split(seed, 2 * sample + 1));
    // By linearity m_post - m = (I + H)^{-1} (fcal^T W noise - u).
    const Vector rhs = fcal.apply_adjoint(wv.cwiseProduct(noise_sd.cwiseProduct(eta))) - u;
    Vector err = Vector::Zero(n);
    auto apply = [&](std::span<const double> p, std::span<double> q) {
      const Vector pv = Eigen::Map<const Vector>(p.data(), n);
      Eigen::Map<Vector>(q.data(), n) = pv + fcal.apply_adjoint(wv.cwiseProduct(fcal.apply(pv)));
    };
    const CgResult res = conjugate_gradient(apply, as_span(rhs), as_span(err), cg_tol, 10 * static_cast<int>(n));
    if (!res.converged) return;
    values[sample] = z_sqrt.apply(err).squaredNorm() - z_sqrt.apply(u).squaredNorm();
    ok[sample] = 1;
  });

  RiskEstimate out;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!ok[i]) {
      ++out.samples_skipped;
      continue;
    }
    ++out.samples_used;
    const double delta = values[i] - mean;
    mean += delta / out.samples_used;
    m2 += delta * (values[i] - mean);
  }
  if (out.samples_skipped * 10 > n_samples) {
    throw NumericalError("bayes risk: " + std::to_string(out.samples_skipped) + " of " + std::to_string(n_samples) +
                         " posterior solves failed");
  }
  out.estimate = mean;
  out.std_error = out.samples_used > 1 ? std::sqrt(m2 / (out.samples_used - 1) / out.samples_used) : 0.0;
  return out;
}

RiskEstimate bayes_risk_mc(const ModelProblem& problem, const Vector& w, int n_samples, std::uint64_t seed) {
  return bayes_risk_mc(build_fcal(problem), problem.prior_sqrt_operator(), NoiseWeights(problem.observations()), w,
                       n_samples, seed);
}

}  // namespace oed
