// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher.

#include "oed/kernels.hpp"

#include <immintrin.h>

#include <cassert>

namespace oed::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Guarded scalar evaluation for the first and last grid rows.
inline double stencil_point(const Stencil5& st, const double* x, std::size_t k, std::size_t total) {
  const auto nx = static_cast<std::size_t>(st.nx);
  double acc = st.c[k] * x[k];
  if (k >= 1) acc += st.w[k] * x[k - 1];
  if (k + 1 < total) acc += st.e[k] * x[k + 1];
  if (k >= nx) acc += st.s[k] * x[k - nx];
  if (k + nx < total) acc += st.n[k] * x[k + nx];
  return acc;
}

}  // namespace

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  const std::size_t len = x.size();
  const double* px = x.data();
  const double* py = y.data();
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i + 4), _mm256_loadu_pd(py + i + 4), a1);
  }
  for (; i + 4 <= len; i += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i), a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < len; ++i) acc += px[i] * py[i];
  return acc;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t len = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    _mm256_storeu_pd(py + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i)));
  }
  for (; i < len; ++i) py[i] += a * px[i];
}

void xpby(std::span<const double> x, double b, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t len = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    _mm256_storeu_pd(py + i, _mm256_fmadd_pd(vb, _mm256_loadu_pd(py + i), _mm256_loadu_pd(px + i)));
  }
  for (; i < len; ++i) py[i] = x[i] + b * py[i];
}

void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y) {
  const std::size_t total = st.size();
  const auto nx = static_cast<std::size_t>(st.nx);
  assert(x.size() == total && y.size() == total);
  const double* px = x.data();
  double* py = y.data();

  if (st.ny < 3) {
    for (std::size_t k = 0; k < total; ++k) py[k] = stencil_point(st, px, k, total);
    return;
  }

  for (std::size_t k = 0; k < nx; ++k) py[k] = stencil_point(st, px, k, total);

  // Interior rows: every neighbour index is in range, and coefficients of
  // neighbours across a row edge are zero, so the flat range is branch-free.
  const std::size_t lo = nx;
  const std::size_t hi = total - nx;
  const double* c = st.c.data();
  const double* w = st.w.data();
  const double* e = st.e.data();
  const double* s = st.s.data();
  const double* n = st.n.data();
  std::size_t k = lo;
  for (; k + 4 <= hi; k += 4) {
    __m256d acc = _mm256_mul_pd(_mm256_loadu_pd(c + k), _mm256_loadu_pd(px + k));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + k), _mm256_loadu_pd(px + k - 1), acc);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(e + k), _mm256_loadu_pd(px + k + 1), acc);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(s + k), _mm256_loadu_pd(px + k - nx), acc);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(n + k), _mm256_loadu_pd(px + k + nx), acc);
    _mm256_storeu_pd(py + k, acc);
  }
  for (; k < hi; ++k) py[k] = stencil_point(st, px, k, total);

  for (std::size_t k2 = hi; k2 < total; ++k2) py[k2] = stencil_point(st, px, k2, total);
}

}  // namespace oed::kernels::avx2
