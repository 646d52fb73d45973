#include "oed/sketch.hpp"

#include "oed/errors.hpp"
#include "oed/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace oed {

namespace {

Matrix thin_q(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

// Orthonormal basis for range(y). Columns whose R diagonal is at rounding
// level (l * eps relative to the largest) are replaced by fresh Gaussian
// directions orthogonalized against the rest.
Matrix orthonormal_basis(const Matrix& y, std::uint64_t refill_seed, bool& reduced) {
  const Index n = y.rows();
  const Index l = y.cols();
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(n, l);
  const Matrix& r = qr.matrixQR();
  double rmax = 0.0;
  for (Index j = 0; j < l; ++j) rmax = std::max(rmax, std::abs(r(j, j)));

  const double floor = std::numeric_limits<double>::epsilon() * static_cast<double>(l) * rmax;
  std::vector<Index> good;
  std::vector<Index> bad;
  for (Index j = 0; j < l; ++j) {
    if (rmax > 0.0 && std::abs(r(j, j)) > floor) {
      good.push_back(j);
    } else {
      bad.push_back(j);
    }
  }
  if (bad.empty()) return q;

  Matrix basis(n, l);
  Index filled = 0;
  for (Index j : good) basis.col(filled++) = q.col(j);
  std::uint64_t draw = 0;
  for (std::size_t b = 0; b < bad.size(); ++b) {
    Vector g = rng::gaussian_vector(n, rng::split(refill_seed, draw++));
    for (int pass = 0; pass < 2; ++pass) {
      if (filled > 0) g -= basis.leftCols(filled) * (basis.leftCols(filled).transpose() * g);
    }
    const double norm = g.norm();
    if (!(norm > 1e-8)) continue;
    basis.col(filled++) = g / norm;
  }
  if (filled < l) reduced = true;
  return basis.leftCols(filled);
}

}  // namespace

void SketchConfig::validate(Index n) const {
  if (k < 1) throw ContractError("sketch: k must be at least 1");
  if (p < 2) throw ContractError("sketch: oversampling p must be at least 2");
  if (q < 1) throw ContractError("sketch: q must be at least 1");
  if (ell() > n) {
    throw ContractError("sketch: k + p = " + std::to_string(ell()) + " exceeds the dimension " + std::to_string(n));
  }
}

Matrix sample_gaussian(Index n, Index l, std::uint64_t seed) { return rng::gaussian_matrix(n, l, seed); }

LowRankFactors subspace_iteration(const LinearOperator& a, const SketchConfig& cfg) {
  if (!a.square()) throw ContractError("subspace_iteration: operator must be square");
  cfg.validate(a.rows());
  return subspace_iteration(a, sample_gaussian(a.rows(), cfg.ell(), cfg.seed), cfg.q, cfg.stabilize,
                            rng::split(cfg.seed, 0x5eed));
}

LowRankFactors subspace_iteration(const LinearOperator& a, const Matrix& omega, int q, bool stabilize,
                                  std::uint64_t refill_seed) {
  if (!a.square()) throw ContractError("subspace_iteration: operator must be square");
  if (omega.rows() != a.cols()) throw ContractError("subspace_iteration: starting block has the wrong row count");
  if (omega.cols() < 1 || omega.cols() > a.rows()) {
    throw ContractError("subspace_iteration: starting block needs between 1 and n columns");
  }
  if (q < 1) throw ContractError("subspace_iteration: q must be at least 1");

  Matrix y = omega;
  for (int step = 0; step < q; ++step) {
    if (stabilize && step > 0) y = thin_q(y);
    y = a.apply_block(y);
  }

  LowRankFactors f;
  f.requested_ell = static_cast<int>(omega.cols());
  f.Q = orthonormal_basis(y, refill_seed, f.reduced);
  f.T = f.Q.transpose() * a.apply_block(f.Q);
  return factorize_T(std::move(f));
}

LowRankFactors factorize_T(LowRankFactors f) {
  const Index l = f.T.rows();
  if (f.T.cols() != l || f.Q.cols() != l) throw ContractError("factorize_T: Q and T sizes disagree");
  if (!f.T.allFinite()) throw NumericalError("factorize_T: T has non-finite entries");
  f.T = 0.5 * (f.T + f.T.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(f.T);
  if (eig.info() != Eigen::Success) {
    const double fro = f.T.norm();
    throw NumericalError("factorize_T: symmetric eigensolver failed (ell = " + std::to_string(l) +
                         ", ||T||_F = " + std::to_string(fro) + ")");
  }
  // Eigen sorts ascending.
  Vector lambda = eig.eigenvalues().reverse();
  Matrix u = eig.eigenvectors().rowwise().reverse();
  lambda = lambda.cwiseMax(0.0);

  f.lambda = lambda;
  f.V = f.Q * u;
  f.d = lambda.array() / (1.0 + lambda.array());
  return f;
}

}  // namespace oed
