#include "oed/linops.hpp"

#include "oed/errors.hpp"
#include "oed/parallel.hpp"
#include "oed/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace oed {

namespace {

std::vector<CounterPtr> merge_counters(const std::vector<CounterPtr>& a, const std::vector<CounterPtr>& b) {
  std::vector<CounterPtr> out = a;
  for (const auto& c : b) {
    if (c && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

void check_cap(Index rows, Index cols, std::int64_t cap) {
  const std::int64_t entries = static_cast<std::int64_t>(rows) * static_cast<std::int64_t>(cols);
  if (entries > cap) {
    throw SizeError("dense materialization of a " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " operator exceeds the cap of " + std::to_string(cap) + " entries");
  }
}

// Unit-vector blocks are applied in chunks to bound the workspace.
constexpr Index kChunk = 64;

}  // namespace

LinearOperator::LinearOperator(Index rows, Index cols, BlockMap apply, BlockMap apply_adjoint, Vector domain_weight,
                               std::vector<CounterPtr> counters)
    : rows_(rows),
      cols_(cols),
      apply_(std::move(apply)),
      adjoint_(std::move(apply_adjoint)),
      domain_weight_(std::move(domain_weight)),
      counters_(merge_counters({}, counters)) {
  if (rows_ <= 0 || cols_ <= 0) throw ContractError("linear operator dimensions must be positive");
  if (domain_weight_.size() != 0 && domain_weight_.size() != cols_) {
    throw ContractError("domain weight length does not match operator columns");
  }
}

Matrix LinearOperator::apply_block(const Matrix& x) const {
  if (x.rows() != cols_) throw ContractError("apply: input has " + std::to_string(x.rows()) + " rows, expected " +
                                             std::to_string(cols_));
  Matrix y = apply_(x);
  if (y.rows() != rows_ || y.cols() != x.cols()) throw ContractError("apply: operator returned a block of wrong shape");
  return y;
}

Matrix LinearOperator::apply_adjoint_block(const Matrix& y) const {
  if (y.rows() != rows_) throw ContractError("apply_adjoint: input has " + std::to_string(y.rows()) +
                                             " rows, expected " + std::to_string(rows_));
  Matrix x = adjoint_(y);
  if (x.rows() != cols_ || x.cols() != y.cols()) {
    throw ContractError("apply_adjoint: operator returned a block of wrong shape");
  }
  return x;
}

Vector LinearOperator::apply(const Vector& x) const { return apply_block(x); }

Vector LinearOperator::apply_adjoint(const Vector& y) const { return apply_adjoint_block(y); }

double LinearOperator::domain_dot(const Vector& x, const Vector& z) const {
  if (euclidean_domain()) return x.dot(z);
  return (x.array() * domain_weight_.array() * z.array()).sum();
}

std::int64_t LinearOperator::solve_count() const {
  std::int64_t total = 0;
  for (const auto& c : counters_) total += c->value();
  return total;
}

LinearOperator::BlockMap columnwise(Index out_rows, std::function<Vector(const Vector&)> column_map) {
  return [out_rows, column_map = std::move(column_map)](const Matrix& x) {
    Matrix y(out_rows, x.cols());
    parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t j) {
      const auto col = static_cast<Index>(j);
      y.col(col) = column_map(x.col(col));
    });
    return y;
  };
}

LinearOperator identity_operator(Index n) {
  auto id = [](const Matrix& x) { return x; };
  return LinearOperator(n, n, id, id);
}

LinearOperator diagonal_operator(Vector diag) {
  const Index n = diag.size();
  auto map = [d = std::move(diag)](const Matrix& x) -> Matrix { return d.asDiagonal() * x; };
  return LinearOperator(n, n, map, map);
}

LinearOperator dense_operator(Matrix a) {
  const Index rows = a.rows();
  const Index cols = a.cols();
  auto shared = std::make_shared<const Matrix>(std::move(a));
  return LinearOperator(
      rows, cols, [shared](const Matrix& x) -> Matrix { return (*shared) * x; },
      [shared](const Matrix& y) -> Matrix { return shared->transpose() * y; });
}

LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.cols() != inner.rows()) {
    throw ContractError("compose: outer has " + std::to_string(outer.cols()) + " columns but inner has " +
                        std::to_string(inner.rows()) + " rows");
  }
  return LinearOperator(
      outer.rows(), inner.cols(), [outer, inner](const Matrix& x) { return outer.apply_block(inner.apply_block(x)); },
      [outer, inner](const Matrix& y) { return inner.apply_adjoint_block(outer.apply_adjoint_block(y)); },
      inner.domain_weight(), merge_counters(outer.counters(), inner.counters()));
}

LinearOperator charged(const LinearOperator& op, CounterPtr counter, std::int64_t cost) {
  if (!counter) throw ContractError("charged: counter must not be null");
  return LinearOperator(
      op.rows(), op.cols(),
      [op, counter, cost](const Matrix& x) {
        counter->add(cost * x.cols());
        return op.apply_block(x);
      },
      [op, counter, cost](const Matrix& y) {
        counter->add(cost * y.cols());
        return op.apply_adjoint_block(y);
      },
      op.domain_weight(), merge_counters(op.counters(), {counter}));
}

Matrix materialize_dense(const LinearOperator& op, std::int64_t cap) {
  check_cap(op.rows(), op.cols(), cap);
  Matrix out(op.rows(), op.cols());
  for (Index start = 0; start < op.cols(); start += kChunk) {
    const Index width = std::min(kChunk, op.cols() - start);
    Matrix units = Matrix::Zero(op.cols(), width);
    for (Index j = 0; j < width; ++j) units(start + j, j) = 1.0;
    out.middleCols(start, width) = op.apply_block(units);
  }
  return out;
}

Matrix materialize_dense_by_rows(const LinearOperator& op, std::int64_t cap) {
  check_cap(op.rows(), op.cols(), cap);
  // Row i of A is (W A* e_i)^T for domain weight W.
  Matrix out(op.rows(), op.cols());
  for (Index start = 0; start < op.rows(); start += kChunk) {
    const Index width = std::min(kChunk, op.rows() - start);
    Matrix units = Matrix::Zero(op.rows(), width);
    for (Index j = 0; j < width; ++j) units(start + j, j) = 1.0;
    Matrix cols = op.apply_adjoint_block(units);
    if (!op.euclidean_domain()) cols = op.domain_weight().asDiagonal() * cols;
    out.middleRows(start, width) = cols.transpose();
  }
  return out;
}

Matrix materialize_dense_cheapest(const LinearOperator& op, std::int64_t cap) {
  return op.rows() < op.cols() ? materialize_dense_by_rows(op, cap) : materialize_dense(op, cap);
}

double adjoint_test(const LinearOperator& op, int trials, std::uint64_t seed) {
  if (trials < 1) throw ContractError("adjoint_test: trials must be at least 1");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto trial = static_cast<std::uint64_t>(t);
    const Vector x = rng::gaussian_vector(op.cols(), rng::split(seed, 2 * trial));
    const Vector y = rng::gaussian_vector(op.rows(), rng::split(seed, 2 * trial + 1));
    const Vector ax = op.apply(x);
    const Vector aty = op.apply_adjoint(y);
    const double lhs = ax.dot(y);
    const double rhs = op.domain_dot(x, aty);
    const double scale = std::sqrt(op.domain_dot(x, x)) * y.norm();
    const double mismatch = scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
    worst = std::max(worst, mismatch);
  }
  return worst;
}

NormEstimate operator_norm(const LinearOperator& op, double tol, int max_iter, std::uint64_t seed) {
  if (!op.square()) throw ContractError("operator_norm: operator must be square");
  Vector x = rng::gaussian_vector(op.cols(), seed);
  x /= std::sqrt(op.domain_dot(x, x));
  NormEstimate est;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector y = op.apply(x);
    const double rayleigh = op.domain_dot(x, y);
    const double ynorm = std::sqrt(op.domain_dot(y, y));
    est.value = rayleigh;
    est.iterations = it;
    if (ynorm == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= tol * std::abs(rayleigh)) {
      est.converged = true;
      return est;
    }
    previous = rayleigh;
    x = y / ynorm;
  }
  return est;
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void write_dense_csv(const Matrix& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << a.rows() << ',' << a.cols() << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) out << ',';
      out << a(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix read_dense_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  Index rows = 0;
  Index cols = 0;
  char comma = 0;
  std::istringstream header(line);
  if (!(header >> rows >> comma >> cols) || comma != ',' || rows <= 0 || cols <= 0) {
    throw IoError(path.string() + ": malformed header '" + line + "'");
  }
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": expected " + std::to_string(rows) + " rows");
    std::istringstream row(line);
    std::string cell;
    for (Index j = 0; j < cols; ++j) {
      if (!std::getline(row, cell, ',')) throw IoError(path.string() + ": short row " + std::to_string(i));
      a(i, j) = std::stod(cell);
    }
  }
  return a;
}

}  // namespace oed
