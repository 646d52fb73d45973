#include "oed/criteria.hpp"

#include "oed/errors.hpp"
#include "oed/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oed {

LowRankFactors eigk_factors(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w, int k, double tol,
                            std::uint64_t seed) {
  const Index n = fcal.cols();
  const Index n_obs = fcal.rows();
  if (fcal.rows() != noise.n_obs()) throw ContractError("eigk: fcal rows do not match the observation count");
  if (k < 1 || k > std::min(n_obs, n)) {
    throw ContractError("eigk: k = " + std::to_string(k) + " must lie in [1, min(n_obs, n)]");
  }
  const Vector root = noise.observation_weights(ingest_design(w, noise.n_sensors())).cwiseSqrt();
  auto b_apply = [&](const Vector& x) -> Vector { return root.cwiseProduct(fcal.apply(x)); };
  auto bt_apply = [&](const Vector& y) -> Vector { return fcal.apply_adjoint(root.cwiseProduct(y)); };

  // Golub-Kahan bidiagonalization of B = W^{1/2} fcal started in the data
  // space, i.e. Lanczos on H = B^T B carried out on the factor. Both bases
  // are fully reorthogonalized and the projection U^T B V is kept explicitly,
  // so restarts after breakdown need no special bookkeeping.
  const Index start_cols = std::min<Index>(std::max(n_obs, n), 2 * k + 20);
  Matrix u(n_obs, std::min(n_obs, start_cols)), btu(n, std::min(n_obs, start_cols));
  Matrix v(n, std::min(n, start_cols)), bv(n_obs, std::min(n, start_cols));
  auto reserve = [](Matrix& a, Matrix& b, Index used, Index limit) {
    if (used < a.cols()) return;
    const Index cols = std::min(limit, 2 * a.cols());
    a.conservativeResize(Eigen::NoChange, cols);
    b.conservativeResize(Eigen::NoChange, cols);
  };
  Index nu = 0;
  Index nv = 0;
  Index nbt = 0;
  std::uint64_t draws = 0;

  auto orthogonalize = [](Vector& x, const Matrix& basis, Index cols) {
    for (int pass = 0; pass < 2; ++pass) {
      if (cols > 0) x -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * x);
    }
  };
  auto fresh = [&](const Matrix& basis, Index cols, Index dim) -> Vector {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vector x = rng::gaussian_vector(dim, rng::split(seed, draws++));
      orthogonalize(x, basis, cols);
      const double norm = x.norm();
      if (norm > 1e-8) return x / norm;
    }
    throw NumericalError("eigk: could not extend the Krylov basis");
  };

  Vector sigma;
  Matrix right;
  double sigma_max = 0.0;
  double worst_residual = 0.0;
  auto ritz = [&]() {
    const Matrix c = u.leftCols(nu).transpose() * bv.leftCols(nv);
    Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinV);
    sigma = svd.singularValues();
    right = svd.matrixV();
    if (sigma.size() > 0) sigma_max = std::max(sigma_max, sigma(0));
  };
  // Explicit residual of the top-k Ritz pairs of H, relative to each value.
  auto residual_ok = [&]() {
    worst_residual = 0.0;
    for (Index i = 0; i < k; ++i) {
      const Vector q = right.col(i);
      const Vector hx = btu.leftCols(nu) * (u.leftCols(nu).transpose() * (bv.leftCols(nv) * q));
      const double lambda = sigma(i) * sigma(i);
      const double res = (hx - lambda * (v.leftCols(nv) * q)).norm();
      worst_residual = std::max(worst_residual, res / std::max(lambda, 1e-300));
    }
    return worst_residual <= tol;
  };

  u.col(0) = fresh(u, 0, n_obs);
  nu = 1;
  bool converged = false;
  while (true) {
    if (nbt < nu) {
      btu.col(nu - 1) = bt_apply(u.col(nu - 1));
      nbt = nu;
    }
    if (nv >= k) {
      ritz();
      if (residual_ok()) {
        converged = true;
        break;
      }
    }
    if (nv == n) break;

    Vector rv = btu.col(nu - 1);
    orthogonalize(rv, v, nv);
    const double alpha = rv.norm();
    reserve(v, bv, nv, n);
    v.col(nv) = alpha > 1e-12 * std::max(sigma_max, 1e-300) && alpha > 0.0 ? Vector(rv / alpha) : fresh(v, nv, n);
    bv.col(nv) = b_apply(v.col(nv));
    sigma_max = std::max(sigma_max, bv.col(nv).norm());
    ++nv;

    if (nu == n_obs) continue;
    reserve(u, btu, nu, n_obs);
    Vector ru = bv.col(nv - 1);
    orthogonalize(ru, u, nu);
    const double beta = ru.norm();
    if (beta > 1e-12 * std::max(sigma_max, 1e-300) && beta > 0.0) {
      u.col(nu++) = ru / beta;
    } else if (nv < k) {
      u.col(nu) = fresh(u, nu, n_obs);
      ++nu;
    } else {
      // B V lies in span(U): the projection is exact.
      ritz();
      residual_ok();
      converged = true;
      break;
    }
  }
  if (!converged) {
    ritz();
    residual_ok();
    if (nv == n || nu == n_obs) converged = true;
  }
  if (!converged) {
    throw NumericalError("eigk: Lanczos did not converge (worst Ritz residual " + std::to_string(worst_residual) +
                         ", target " + std::to_string(tol) + ")");
  }

  LowRankFactors f;
  f.requested_ell = k;
  f.V = v.leftCols(nv) * right.leftCols(k);
  f.Q = f.V;
  f.lambda = sigma.head(k).array().square().matrix();
  f.T = f.lambda.asDiagonal();
  f.d = f.lambda.array() / (1.0 + f.lambda.array());
  return f;
}

EstimatorReport eigk_estimate(const LinearOperator& fcal, const LinearOperator* z_op, const NoiseWeights& noise,
                              const Vector& w, int k, const PrecomputedS& s, Criterion mode) {
  if (s.mode != mode) throw ContractError("precomputed s was built for the " + to_string(s.mode) + " criterion");
  if (mode == Criterion::aopt && z_op == nullptr) throw ContractError("eigk: aopt mode needs a Z operator");
  const std::int64_t start = fcal.solve_count();
  const LowRankFactors f = eigk_factors(fcal, noise, w, k);
  SpectralInputs in;
  in.a = fcal.apply_block(f.V);
  in.d = f.d;
  if (mode == Criterion::aopt) {
    const Matrix zv = z_op->apply_block(f.V);
    in.b = fcal.apply_block(zv);
    in.vzv = f.V.transpose() * zv;
    in.vzv = 0.5 * (in.vzv + in.vzv.transpose()).eval();
  }
  EstimatorReport r;
  r.criterion = mode;
  r.method = "eigk";
  r.ell = k;
  r.k = k;
  r.lambda_T = f.lambda;
  estimate_from_spectrum(in, noise, s.s, mode, r.value, r.gradient);
  r.pde_solves = fcal.solve_count() - start;
  return r;
}

FrozenSvd::FrozenSvd(const LinearOperator& fcal, const LinearOperator* z_op, int k, NoiseWeights noise,
                     std::int64_t cap)
    : noise_(std::move(noise)) {
  if (k < 0) throw ContractError("frozen: k must be nonnegative");
  if (fcal.rows() != noise_.n_obs()) throw ContractError("frozen: fcal rows do not match the observation count");
  const Index full = std::min(fcal.rows(), fcal.cols());
  Index rank = k;
  if (rank > full) {
    rank = full;
    reduced_ = true;
  }
  has_z_ = z_op != nullptr;
  if (rank == 0) {
    u_ = Matrix::Zero(fcal.rows(), 0);
    sigma_ = Vector::Zero(0);
    vzv_ = Matrix::Zero(0, 0);
    s_aopt_ = s_mod_ = Vector::Zero(noise_.n_sensors());
    return;
  }
  const Matrix f = materialize_dense_cheapest(fcal, cap);
  Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU().leftCols(rank);
  sigma_ = svd.singularValues().head(rank);
  const Matrix vk = svd.matrixV().leftCols(rank);
  if (has_z_) {
    vzv_ = vk.transpose() * z_op->apply_block(vk);
    vzv_ = 0.5 * (vzv_ + vzv_.transpose()).eval();
  } else {
    vzv_ = Matrix::Identity(rank, rank);
  }
  const Matrix us = u_ * sigma_.asDiagonal();
  s_mod_ = -noise_.gather(us.cwiseProduct(us).rowwise().sum());
  s_aopt_ = -noise_.gather((us * vzv_).cwiseProduct(us).rowwise().sum());
}

EstimatorReport FrozenSvd::evaluate(const Vector& w_in, Criterion mode) const {
  const Vector w = ingest_design(w_in, noise_.n_sensors());
  const Vector wv = noise_.observation_weights(w);
  const Index k = sigma_.size();
  EstimatorReport r;
  r.criterion = mode;
  r.method = "frozen";
  r.ell = static_cast<int>(k);
  r.k = static_cast<int>(k);
  r.degenerate = reduced_;
  if (k == 0) {
    r.value = 0.0;
    r.gradient = Vector::Zero(noise_.n_sensors());
    r.lambda_T = Vector::Zero(0);
    return r;
  }
  const Matrix us = u_ * sigma_.asDiagonal();
  Matrix small = us.transpose() * wv.asDiagonal() * us;
  small = 0.5 * (small + small.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small);
  if (eig.info() != Eigen::Success) throw NumericalError("frozen: eigensolver failed");
  const Vector lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Matrix p = eig.eigenvectors().rowwise().reverse();

  SpectralInputs in;
  in.a = us * p;
  in.d = lambda.array() / (1.0 + lambda.array());
  if (mode == Criterion::aopt) {
    in.vzv = p.transpose() * vzv_ * p;
    in.vzv = 0.5 * (in.vzv + in.vzv.transpose()).eval();
    in.b = us * vzv_ * p;
  }
  r.lambda_T = lambda;
  estimate_from_spectrum(in, noise_, mode == Criterion::aopt ? s_aopt_ : s_mod_, mode, r.value, r.gradient);
  return r;
}

FrozenSvd frozen_svd(const LinearOperator& fcal, const LinearOperator* z_op, int k, const NoiseWeights& noise) {
  return FrozenSvd(fcal, z_op, k, noise);
}

}  // namespace oed
