#include "oed/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace oed::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(OED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("OED_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool avx2_available() {
  static const bool ok = cpu_has_avx2();
  return ok;
}

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_available()) isa = Isa::scalar;
  selected().store(isa, std::memory_order_relaxed);
}

#if defined(OED_HAVE_AVX2)
#define OED_DISPATCH(fn, ...) \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define OED_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double dot(std::span<const double> x, std::span<const double> y) { return OED_DISPATCH(dot, x, y); }

void axpy(double a, std::span<const double> x, std::span<double> y) { OED_DISPATCH(axpy, a, x, y); }

void xpby(std::span<const double> x, double b, std::span<double> y) { OED_DISPATCH(xpby, x, b, y); }

void stencil_apply(const Stencil5& st, std::span<const double> x, std::span<double> y) {
  OED_DISPATCH(stencil_apply, st, x, y);
}

#undef OED_DISPATCH

}  // namespace oed::kernels
