#include "oed/kernels.hpp"

#include <cassert>

namespace oed::kernels {

Stencil5::Stencil5(int nx_, int ny_)
    : nx(nx_), ny(ny_), c(size(), 0.0), w(size(), 0.0), e(size(), 0.0), s(size(), 0.0), n(size(), 0.0) {}

Stencil5 Stencil5::transposed() const {
  // (A^T)[k][k-1] = A[k-1][k] = e[k-1], and so on for the other offsets.
  Stencil5 t(nx, ny);
  const std::size_t total = size();
  const auto snx = static_cast<std::size_t>(nx);
  for (std::size_t k = 0; k < total; ++k) {
    t.c[k] = c[k];
    if (k >= 1) t.w[k] = e[k - 1];
    if (k + 1 < total) t.e[k] = w[k + 1];
    if (k >= snx) t.s[k] = n[k - snx];
    if (k + snx < total) t.n[k] = s[k + snx];
  }
  return t;
}

namespace scalar {

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void xpby(std::span<const double> x, double b, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + b * y[i];
}

void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y) {
  const std::size_t total = st.size();
  const auto nx = static_cast<std::size_t>(st.nx);
  assert(x.size() == total && y.size() == total);
  for (std::size_t k = 0; k < total; ++k) {
    double acc = st.c[k] * x[k];
    if (k >= 1) acc += st.w[k] * x[k - 1];
    if (k + 1 < total) acc += st.e[k] * x[k + 1];
    if (k >= nx) acc += st.s[k] * x[k - nx];
    if (k + nx < total) acc += st.n[k] * x[k + nx];
    y[k] = acc;
  }
}

}  // namespace scalar
}  // namespace oed::kernels
