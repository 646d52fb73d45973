#pragma once

// Randomized subspace iteration for symmetric positive semidefinite
// operators and the spectral post-processing of the projected matrix
// T = Q^T A Q.

#include "oed/linops.hpp"

#include <cstdint>

namespace oed {

struct SketchConfig {
  int k = 20;
  int p = 5;
  int q = 1;
  std::uint64_t seed = 1;
  /// Re-orthonormalize between the q power steps.
  bool stabilize = true;

  int ell() const { return k + p; }
  /// Throws ContractError unless k >= 1, p >= 2, q >= 1 and k + p <= n.
  void validate(Index n) const;
};

struct LowRankFactors {
  Matrix Q;          // n x l, orthonormal columns
  Matrix T;          // l x l, symmetric
  Matrix V;          // n x l, Q U
  Vector lambda;     // eigenvalues of T, descending, clamped at 0
  Vector d;          // lambda / (1 + lambda)
  bool reduced = false;  // fewer than the requested columns survived
  int requested_ell = 0;

  Index ell() const { return Q.cols(); }
};

/// n x l standard normal matrix from the counter-based generator in rng.hpp.
Matrix sample_gaussian(Index n, Index l, std::uint64_t seed);

/// Y = A^q Omega, Householder QR, T = Q^T (A Q), then factorize_T.
/// Applies `a` exactly (q + 1) * l times.
LowRankFactors subspace_iteration(const LinearOperator& a, const SketchConfig& cfg);

/// Same with a caller-supplied starting block (held fixed across calls).
LowRankFactors subspace_iteration(const LinearOperator& a, const Matrix& omega, int q, bool stabilize = true,
                                  std::uint64_t refill_seed = 0);

/// Symmetrize T and fill V, lambda and d. Idempotent.
LowRankFactors factorize_T(LowRankFactors factors);

}  // namespace oed
