#include "oed/criteria.hpp"

#include "oed/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>

#include <algorithm>
#include <cmath>

namespace oed {

namespace {

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

ExactOracle::ExactOracle(const LinearOperator& fcal, const LinearOperator* z_op, NoiseWeights noise,
                         OraclePrecision precision, std::int64_t cap)
    : noise_(std::move(noise)), precision_(precision) {
  if (fcal.rows() != noise_.n_obs()) throw ContractError("exact oracle: fcal rows do not match the observation count");
  if (!fcal.euclidean_domain()) throw ContractError("exact oracle: fcal must have a Euclidean domain");
  const std::int64_t start = fcal.solve_count();
  f_ = materialize_dense_cheapest(fcal, cap);
  using XMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const XMatrix fx = f_.cast<long double>();
  g_ = symmetrized((fx * fx.transpose()).cast<double>());
  obs_space_ = f_.rows() <= f_.cols();
  if (obs_space_) {
    gz_ = z_op ? symmetrized((fx * z_op->apply_block(f_.transpose()).cast<long double>()).cast<double>()) : g_;
  } else {
    zd_ = z_op ? symmetrized(materialize_dense(*z_op, cap)) : Matrix::Identity(f_.cols(), f_.cols());
    gz_ = symmetrized((fx * zd_.cast<long double>() * fx.transpose()).cast<double>());
  }
  spent_ = fcal.solve_count() - start;
}

namespace {

template <class Real>
ExactValues evaluate_in(const NoiseWeights& noise, const Matrix& f_d, const Matrix& g_d, const Matrix& gz_d,
                        const Matrix& zd_d, bool obs_space, const Vector& w) {
  using XMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using XVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const XVector wv = noise.observation_weights(w).template cast<Real>();
  auto gather = [&noise](const XVector& v) {
    Vector d(v.size());
    for (Index i = 0; i < v.size(); ++i) d(i) = static_cast<double>(v(i));
    return noise.gather(d);
  };
  auto scalar = [](const Real& r) { return static_cast<double>(r); };
  ExactValues out;
  if (obs_space) {
    // X = (I + G W)^{-1}; Phi = -tr(W X G_Z); dPhi/dw_j = -sigma_j^{-2} sum_{k in j} (X G_Z X^T)_kk.
    const Index m = g_d.rows();
    const XMatrix g = g_d.template cast<Real>();
    const XMatrix gz = gz_d.template cast<Real>();
    const XMatrix system = XMatrix::Identity(m, m) + g * wv.asDiagonal();
    const XMatrix x = system.partialPivLu().solve(XMatrix::Identity(m, m));
    const XMatrix xgz = x * gz;
    const XMatrix xg = x * g;
    out.phi_aopt = -scalar(wv.dot(xgz.diagonal()));
    out.phi_mod = -scalar(wv.dot(xg.diagonal()));
    out.grad_aopt = -gather(xgz.cwiseProduct(x).rowwise().sum());
    out.grad_mod = -gather(xg.cwiseProduct(x).rowwise().sum());
  } else {
    const XMatrix f = f_d.template cast<Real>();
    const Index n = f.cols();
    const XMatrix zd = zd_d.template cast<Real>();
    XMatrix h = f.transpose() * wv.asDiagonal() * f;
    h = (Real(0.5) * (h + h.transpose())).eval();
    XMatrix k = (XMatrix::Identity(n, n) + h).llt().solve(XMatrix::Identity(n, n));
    k = (Real(0.5) * (k + k.transpose())).eval();
    const XMatrix km = k - XMatrix::Identity(n, n);
    out.phi_aopt = scalar(zd.cwiseProduct(km).sum());
    out.phi_mod = scalar(km.trace());
    const XMatrix fk = f * k;
    out.grad_aopt = -gather((fk * zd).cwiseProduct(fk).rowwise().sum());
    out.grad_mod = -gather(fk.cwiseProduct(fk).rowwise().sum());
  }
  return out;
}

}  // namespace

ExactValues ExactOracle::evaluate(const Vector& w_in) const {
  // The systems have condition numbers near the largest eigenvalue of H.
  const Vector w = ingest_design(w_in, noise_.n_sensors());
  ExactValues out;
  switch (precision_) {
    case OraclePrecision::standard:
      out = evaluate_in<double>(noise_, f_, g_, gz_, zd_, obs_space_, w);
      break;
    case OraclePrecision::extended:
      out = evaluate_in<long double>(noise_, f_, g_, gz_, zd_, obs_space_, w);
      break;
    case OraclePrecision::quad:
      out = evaluate_in<boost::multiprecision::float128>(noise_, f_, g_, gz_, zd_, obs_space_, w);
      break;
  }
  if (!std::isfinite(out.phi_aopt) || !std::isfinite(out.phi_mod)) {
    throw NumericalError("exact oracle produced a non-finite criterion value");
  }
  return out;
}

Vector ExactOracle::spectrum(const Vector& w_in) const {
  const Vector w = ingest_design(w_in, noise_.n_sensors());
  const Vector wv = noise_.observation_weights(w);
  const Index n = f_.cols();
  Vector ev;
  if (obs_space_) {
    const Vector root = wv.cwiseSqrt();
    const Matrix s = symmetrized(root.asDiagonal() * g_ * root.asDiagonal());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("exact oracle: eigensolver failed");
    ev = eig.eigenvalues();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(f_.transpose() * wv.asDiagonal() * f_),
                                              Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("exact oracle: eigensolver failed");
    ev = eig.eigenvalues();
  }
  Vector full = Vector::Zero(n);
  std::vector<double> sorted(ev.data(), ev.data() + ev.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t i = 0; i < sorted.size(); ++i) full(static_cast<Index>(i)) = std::max(0.0, sorted[i]);
  return full;
}

double ExactOracle::sensor_block_norm(Index j) const {
  if (j < 0 || j >= noise_.n_sensors()) throw ContractError("sensor index out of range");
  const Index ns = noise_.n_sensors();
  const int nt = noise_.n_times;
  Matrix block(nt, nt);
  for (int a = 0; a < nt; ++a) {
    for (int b = 0; b < nt; ++b) block(a, b) = g_(a * ns + j, b * ns + j);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(block), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff() / (noise_.sigmas(j) * noise_.sigmas(j));
}

Vector ExactOracle::s_aopt() const { return -noise_.gather(gz_.diagonal()); }

Vector ExactOracle::s_mod() const { return -noise_.gather(g_.diagonal()); }

ExactValues exact_reference(const ModelProblem& problem, const Vector& w) {
  const LinearOperator fcal = build_fcal(problem);
  const LinearOperator z = problem.z_operator();
  const ExactOracle oracle(fcal, &z, NoiseWeights(problem.observations()));
  return oracle.evaluate(w);
}

}  // namespace oed
