#pragma once

// Design criteria and their gradients.
//
// With the prior-preconditioned forward operator fcal and observation
// weights W(w) = diag(w_i / sigma_i^2) (repeated over the n_t observation
// times), the data-misfit Hessian is H(w) = fcal^T W(w) fcal and
//
//   Phi_aopt(w) = trace(Z ((I + H)^{-1} - I)),   Phi_mod(w) = trace((I + H)^{-1} - I).
//
// Estimators share one core: given an approximate eigenbasis V of H with
// d_i = lambda_i / (1 + lambda_i), the value is -sum_i d_i v_i^T Z v_i and
// the gradient is assembled from A = fcal V and B = fcal Z V by per-sensor
// gathering of observation rows.

#include "oed/linops.hpp"
#include "oed/model.hpp"
#include "oed/sketch.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace oed {

enum class Criterion { aopt, mod };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

/// Per-sensor noise levels; observation entry t * n_s + i has standard
/// deviation sigmas(i).
struct NoiseWeights {
  Vector sigmas;
  int n_times = 1;

  NoiseWeights() = default;
  NoiseWeights(Vector sigmas_, int n_times_);
  explicit NoiseWeights(const ObservationSetup& obs);

  Index n_sensors() const { return sigmas.size(); }
  Index n_obs() const { return sigmas.size() * n_times; }
  /// Length n_obs vector of w_i / sigma_i^2.
  Vector observation_weights(const Vector& w) const;
  /// Sum over the n_t entries of each sensor, times sigma_i^{-2}.
  Vector gather(const Vector& per_observation) const;
};

/// Validate and clamp a design onto [0, 1]^{n_s}. Entries outside the box by
/// more than 1e-12 are clamped with a warning on stderr. Throws ContractError
/// on a length mismatch or non-finite entries.
Vector ingest_design(const Vector& w, Index n_sensors);

/// x -> fcal^T W(w) fcal x.
LinearOperator hm_operator(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w);
Vector hm_apply(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w, const Vector& v);

/// x -> fcal^T E_j fcal x for sensor j (E_j keeps that sensor's n_t rows,
/// scaled by sigma_j^{-2}).
LinearOperator sensor_block_operator(const LinearOperator& fcal, const NoiseWeights& noise, Index j);

struct PrecomputedS {
  Criterion mode = Criterion::aopt;
  Vector s;
  std::int64_t pde_solves_spent = 0;
};

/// s_j = -sigma_j^{-2} sum_t (fcal^T e_(t,j))^T Z (fcal^T e_(t,j)); Z is the
/// identity in mod mode. Exactly n_s * n_t adjoint applications of fcal.
PrecomputedS precompute_s(const LinearOperator& fcal, const LinearOperator* z_op, const NoiseWeights& noise,
                          Criterion mode);

/// Disk cache for PrecomputedS keyed by a content hash. A missing file or a
/// different key yields nullopt (the caller recomputes).
std::optional<PrecomputedS> load_s_cache(const std::filesystem::path& path, const std::string& key);
void save_s_cache(const std::filesystem::path& path, const std::string& key, const PrecomputedS& s);

struct EstimatorReport {
  Criterion criterion = Criterion::aopt;
  std::string method;
  double value = 0.0;
  Vector gradient;
  int ell = 0;
  int k = 0;
  int p = 0;
  int q = 0;
  std::uint64_t seed = 0;
  Vector lambda_T;
  std::int64_t pde_solves = 0;
  bool degenerate = false;

  nlohmann::json to_json() const;
};

/// Value and gradient from an approximate eigenbasis.
///   a = fcal V (n_obs x l), b = fcal Z V (aopt only), vzv = V^T Z V (aopt only).
struct SpectralInputs {
  Matrix a;
  Matrix b;
  Matrix vzv;
  Vector d;
};
void estimate_from_spectrum(const SpectralInputs& in, const NoiseWeights& noise, const Vector& s, Criterion mode,
                            double& value, Vector& gradient);

/// Subspace iteration on H(w) with the starting block fixed by cfg.seed,
/// then the spectral core. 6l PDE solves at q = 1.
EstimatorReport randomized_aopt(const LinearOperator& fcal, const LinearOperator& z_op, const NoiseWeights& noise,
                                const Vector& w, const SketchConfig& cfg, const PrecomputedS& s);

/// Modified criterion: only fcal V is needed. 5l PDE solves at q = 1.
EstimatorReport randomized_moda(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w,
                                const SketchConfig& cfg, const PrecomputedS& s);

struct ExactValues {
  double phi_aopt = 0.0;
  Vector grad_aopt;
  double phi_mod = 0.0;
  Vector grad_mod;
};

/// Working precision of the dense reference solves. quad is exact enough
/// for finite-difference checks on small problems; extended suits n_obs in
/// the hundreds; standard is the fast choice inside optimization loops.
enum class OraclePrecision { standard, extended, quad };

/// Dense reference. Materializes fcal once (min(n_obs, n) applications) and
/// evaluates both criteria and all partial derivatives by dense algebra.
/// Without a Z operator the A-optimal fields use Z = I.
class ExactOracle {
 public:
  ExactOracle(const LinearOperator& fcal, const LinearOperator* z_op, NoiseWeights noise,
              OraclePrecision precision = OraclePrecision::extended, std::int64_t cap = kDefaultDenseCap);

  ExactValues evaluate(const Vector& w) const;
  /// Full spectrum of H(w), descending.
  Vector spectrum(const Vector& w) const;
  /// ||fcal^T E_j fcal||_2 for sensor j.
  double sensor_block_norm(Index j) const;
  /// s vectors implied by the dense operator (gradients at w = 0).
  Vector s_aopt() const;
  Vector s_mod() const;

  const Matrix& fcal_dense() const { return f_; }
  const Matrix& gram() const { return g_; }
  const Matrix& gram_z() const { return gz_; }
  const NoiseWeights& noise() const { return noise_; }
  std::int64_t pde_solves_spent() const { return spent_; }

 private:
  NoiseWeights noise_;
  Matrix f_;
  Matrix g_;   // fcal fcal^T
  Matrix gz_;  // fcal Z fcal^T
  Matrix zd_;  // dense Z (parameter-space route only)
  bool obs_space_ = true;
  OraclePrecision precision_ = OraclePrecision::extended;
  std::int64_t spent_ = 0;
};

ExactValues exact_reference(const ModelProblem& problem, const Vector& w);

/// Top-k eigenpairs of H(w) by Lanczos with full reorthogonalization,
/// run as Golub-Kahan bidiagonalization of W^{1/2} fcal so that small
/// eigenvalues keep their relative accuracy. Packaged so the spectral core
/// applies (Q = V, T = diag(lambda)). Runs until every wanted Ritz pair has
/// residual at most tol * lambda_i, or a Krylov basis is exhausted.
LowRankFactors eigk_factors(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w, int k,
                            double tol = 1e-8, std::uint64_t seed = 1);

EstimatorReport eigk_estimate(const LinearOperator& fcal, const LinearOperator* z_op, const NoiseWeights& noise,
                              const Vector& w, int k, const PrecomputedS& s, Criterion mode);

/// Rank-k truncated SVD of fcal computed once; evaluations reuse it without
/// touching the PDE model.
class FrozenSvd {
 public:
  FrozenSvd(const LinearOperator& fcal, const LinearOperator* z_op, int k, NoiseWeights noise,
            std::int64_t cap = kDefaultDenseCap);

  EstimatorReport evaluate(const Vector& w, Criterion mode) const;

  int rank() const { return static_cast<int>(sigma_.size()); }
  bool reduced() const { return reduced_; }
  const Vector& singular_values() const { return sigma_; }

 private:
  NoiseWeights noise_;
  Matrix u_;     // n_obs x k
  Vector sigma_;
  Matrix vzv_;   // V_k^T Z V_k
  Vector s_aopt_;
  Vector s_mod_;
  bool has_z_ = false;
  bool reduced_ = false;
};

FrozenSvd frozen_svd(const LinearOperator& fcal, const LinearOperator* z_op, int k, const NoiseWeights& noise);

struct BoundReport {
  Criterion criterion = Criterion::aopt;
  int k = 0;
  int p = 0;
  int q = 0;
  int r = 0;
  double gamma_k = 0.0;
  double C = 0.0;
  double z_norm = 1.0;
  double trace_tail = 0.0;      // sum_{i>k} f(lambda_i)
  double trace_sketched = 0.0;  // sum_{i>k} f(gamma^{2q-1} C lambda_i)
  double bound_value = 0.0;

  nlohmann::json to_json() const;
};

/// C = e^2 (k+p)/(p+1)^2 (1/(2 pi (p+1)))^{2/(p+1)} (mu + sqrt 2)^2 (p+1)/(p-1),
/// mu = sqrt(r - k) + sqrt(k + p). Throws ContractError for p <= 1 or r < k.
double bound_constant_C(int k, int p, int r);

/// Expected absolute error bound for the value estimators. `lambda` is the
/// full descending spectrum of H(w); r counts eigenvalues above
/// 1e-12 * lambda_1. Throws AssumptionError unless lambda_k > 0 and
/// gamma_k < 1. In mod mode z_norm is forced to 1.
BoundReport theorem_bound(const Vector& lambda, int k, int p, int q, double z_norm, Criterion mode);

/// Componentwise gradient bound: 2 ||P_j||_2 times the value bound.
double gradient_bound(const BoundReport& value_bound, double pj_norm);

struct RiskEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  int samples_used = 0;
  int samples_skipped = 0;
};

/// Monte Carlo estimate of E ||m_post - m||_M^2 - ||m_pr - m||_M^2 over
/// m ~ prior and data from the weighted likelihood. Works in whitened
/// coordinates u ~ N(0, I): `z_sqrt` maps u to M^{1/2} m, so the squared
/// M-norm of m is ||z_sqrt u||^2.
RiskEstimate bayes_risk_mc(const LinearOperator& fcal, const LinearOperator& z_sqrt, const NoiseWeights& noise,
                           const Vector& w, int n_samples, std::uint64_t seed, double cg_tol = 1e-10);

RiskEstimate bayes_risk_mc(const ModelProblem& problem, const Vector& w, int n_samples, std::uint64_t seed);

}  // namespace oed
