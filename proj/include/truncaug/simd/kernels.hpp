#pragma once

// Dense double-precision inner loops used by the solvers and norms.
//
// Each kernel has a scalar reference implementation and, where the CPU
// supports it, an AVX2+FMA variant. The variant is chosen once at runtime
// (TRUNCAUG_SIMD=scalar forces the reference path). Variants agree with the
// reference up to reassociation of sums and FMA rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace truncaug::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i |a_i - b_i|
  double (*abs_diff)(const double* a, const double* b, std::size_t n);
  // sum_i w_i |a_i - b_i|
  double (*weighted_abs_diff)(const double* w, const double* a, const double* b, std::size_t n);
};

bool isa_available(Isa isa) noexcept;
const KernelTable& table(Isa isa);

Isa active_isa() noexcept;
// Test hook; ignored (returns false) when the ISA is unavailable.
bool set_active_isa(Isa isa) noexcept;

const KernelTable& active();

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().abs_diff(a.data(), b.data(), a.size());
}
inline double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                                std::span<const double> b) {
  return active().weighted_abs_diff(w.data(), a.data(), b.data(), a.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(TRUNCAUG_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace truncaug::simd
