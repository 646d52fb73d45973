#pragma once

// Data-parallel inner loops used by the transport model and the elliptic
// prior solver. Every kernel has a portable scalar reference implementation
// and, on x86-64, an AVX2/FMA variant. The variant is chosen once at runtime
// from CPUID; OED_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace oed::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Variable-coefficient five-point stencil on an nx-by-ny node grid (flat
/// index j*nx + i):
///   y[k] = c[k] x[k] + w[k] x[k-1] + e[k] x[k+1] + s[k] x[k-nx] + n[k] x[k+nx]
/// Coefficients of neighbours that fall outside the grid must be zero.
struct Stencil5 {
  int nx = 0;
  int ny = 0;
  std::vector<double> c, w, e, s, n;

  Stencil5() = default;
  Stencil5(int nx_, int ny_);

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }

  /// Stencil of the transposed matrix.
  Stencil5 transposed() const;
};

// Reference implementations.
namespace scalar {
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void xpby(std::span<const double> x, double b, std::span<double> y);
void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y);
}  // namespace scalar

#if defined(OED_HAVE_AVX2)
namespace avx2 {
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void xpby(std::span<const double> x, double b, std::span<double> y);
void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y);
}  // namespace avx2
#endif

/// True when the AVX2 variants were compiled in and the CPU supports them.
bool avx2_available();

/// Currently selected instruction set.
Isa active_isa();

/// Override the runtime selection (tests use this to compare variants).
/// Requesting avx2 on a machine without it falls back to scalar.
void set_isa(Isa isa);

// Dispatched entry points.
double dot(std::span<const double> x, std::span<const double> y);
/// y += a*x
void axpy(double a, std::span<const double> x, std::span<double> y);
/// y = x + b*y
void xpby(std::span<const double> x, double b, std::span<double> y);
void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y);

}  // namespace oed::kernels
