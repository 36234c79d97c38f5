#include <atomic>
#include <cstdlib>
#include <string_view>

#include "truncaug/simd/kernels.hpp"

namespace truncaug::simd {
namespace {

Isa detect() noexcept {
  if (const char* env = std::getenv("TRUNCAUG_SIMD"); env != nullptr) {
    if (std::string_view(env) == "scalar") return Isa::Scalar;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(TRUNCAUG_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
#if defined(TRUNCAUG_HAVE_AVX2)
  if (isa == Isa::Avx2 && isa_available(Isa::Avx2)) return detail::kAvx2Table;
#endif
  (void)isa;
  return detail::kScalarTable;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

bool set_active_isa(Isa isa) noexcept {
  if (!isa_available(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

const KernelTable& active() { return table(active_isa()); }

}  // namespace truncaug::simd
