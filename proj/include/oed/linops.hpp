#pragma once

// Matrix-free linear operators. Every map in the toolkit (forward model,
// prior square root, preconditioned forward operator, data-misfit Hessian)
// is a LinearOperator: a pair of block maps plus declared dimensions, a
// domain inner-product weight, and the solve counters it charges.

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace oed {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// Thread-safe monotone tally of forward-model-equivalent applications
/// (units: PDE solves).
class SolveCounter {
 public:
  void add(std::int64_t k) { count_.fetch_add(k, std::memory_order_relaxed); }
  std::int64_t value() const { return count_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> count_{0};
};

using CounterPtr = std::shared_ptr<SolveCounter>;

class LinearOperator {
 public:
  /// Maps a block of column vectors to a block of column vectors.
  using BlockMap = std::function<Matrix(const Matrix&)>;

  LinearOperator() = default;

  /// `domain_weight` is the diagonal W of the domain inner product
  /// <x, z>_W = sum_i W_i x_i z_i; empty means Euclidean. The range inner
  /// product is always Euclidean. The adjoint must satisfy
  /// <A x, y> = <x, A* y>_W.
  LinearOperator(Index rows, Index cols, BlockMap apply, BlockMap apply_adjoint, Vector domain_weight = Vector(),
                 std::vector<CounterPtr> counters = {});

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  Vector apply(const Vector& x) const;
  Matrix apply_block(const Matrix& x) const;
  Vector apply_adjoint(const Vector& y) const;
  Matrix apply_adjoint_block(const Matrix& y) const;

  const Vector& domain_weight() const { return domain_weight_; }
  bool euclidean_domain() const { return domain_weight_.size() == 0; }

  /// <x, z>_W for the declared domain weight.
  double domain_dot(const Vector& x, const Vector& z) const;

  /// Sum over the distinct counters this operator charges.
  std::int64_t solve_count() const;
  const std::vector<CounterPtr>& counters() const { return counters_; }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  BlockMap apply_;
  BlockMap adjoint_;
  Vector domain_weight_;
  std::vector<CounterPtr> counters_;
};

/// Build block maps from per-column maps; columns run through parallel_for.
LinearOperator::BlockMap columnwise(Index out_rows, std::function<Vector(const Vector&)> column_map);

LinearOperator identity_operator(Index n);
LinearOperator diagonal_operator(Vector diag);
/// Euclidean dense operator; adjoint is the transpose.
LinearOperator dense_operator(Matrix a);

/// outer ∘ inner. Assumes inner's range inner product is the one outer's
/// domain declares; the result keeps inner's domain weight.
LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner);

/// Wrap `op` so that every column applied, in either direction, adds
/// `cost` to `counter`. Used to price materialized operators in PDE solves.
LinearOperator charged(const LinearOperator& op, CounterPtr counter, std::int64_t cost = 1);

inline constexpr std::int64_t kDefaultDenseCap = std::int64_t{1} << 26;

/// Column j is apply(e_j). Throws SizeError when rows*cols exceeds `cap`.
Matrix materialize_dense(const LinearOperator& op, std::int64_t cap = kDefaultDenseCap);

/// Same matrix assembled from adjoint applications (one per row). Cheaper
/// when rows < cols.
Matrix materialize_dense_by_rows(const LinearOperator& op, std::int64_t cap = kDefaultDenseCap);

/// Materialize through whichever side needs fewer applications.
Matrix materialize_dense_cheapest(const LinearOperator& op, std::int64_t cap = kDefaultDenseCap);

/// max over trials of |<Ax, y> - <x, A*y>_W| / (||x||_W ||y||) with Gaussian
/// probes drawn from `seed`.
double adjoint_test(const LinearOperator& op, int trials, std::uint64_t seed);

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration for the largest eigenvalue of a square operator that is
/// symmetric positive semidefinite in its declared inner product. Stops when
/// the Rayleigh quotient changes by at most tol (relative).
NormEstimate operator_norm(const LinearOperator& op, double tol, int max_iter, std::uint64_t seed);

/// |a_ij - a_ji| <= rel_tol * max|a|.
bool is_symmetric(const Matrix& a, double rel_tol = 1e-12);

/// CSV: first line "rows,cols", then one line per row, 17 significant digits.
void write_dense_csv(const Matrix& a, const std::filesystem::path& path);
Matrix read_dense_csv(const std::filesystem::path& path);

}  // namespace oed
