#include "oed/rng.hpp"

#include <cmath>
#include <numbers>

namespace oed::rng {

double uniform(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = mix64(seed ^ mix64(index));
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t pair = index / 2;
  const double u1 = uniform(seed, 2 * pair);
  const double u2 = uniform(seed, 2 * pair + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index l, std::uint64_t seed) {
  Eigen::MatrixXd out(n, l);
  const auto rows = static_cast<std::uint64_t>(n);
  for (Eigen::Index j = 0; j < l; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, j) = normal(seed, static_cast<std::uint64_t>(j) * rows + static_cast<std::uint64_t>(i));
    }
  }
  return out;
}

Eigen::VectorXd gaussian_vector(Eigen::Index n, std::uint64_t seed) {
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal(seed, static_cast<std::uint64_t>(i));
  return out;
}

double Stream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Stream::below(std::uint64_t bound) {
  // Rejection keeps the draw unbiased for any bound.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

}  // namespace oed::rng
