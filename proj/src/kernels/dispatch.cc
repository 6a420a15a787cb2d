// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "aptsep/kernels/gemm.h"

namespace aptsep::kernels {
namespace {

Isa InitialIsa() {
  const char* env = std::getenv("APT_SEP_KERNELS");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  return DetectIsa();
}

std::atomic<Isa>& ActiveSlot() {
  static std::atomic<Isa> slot{InitialIsa()};
  return slot;
}

}  // namespace

const char* IsaName(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

Isa DetectIsa() {
#if defined(APTSEP_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Isa::kAvx2;
  }
#endif
  return Isa::kScalar;
}

Isa ActiveIsa() { return ActiveSlot().load(std::memory_order_relaxed); }

Isa SetActiveIsa(Isa isa) {
  if (isa == Isa::kAvx2 && DetectIsa() != Isa::kAvx2) isa = Isa::kScalar;
  ActiveSlot().store(isa, std::memory_order_relaxed);
  return isa;
}

#if defined(APTSEP_HAVE_AVX2)
#define APTSEP_DISPATCH(fn, ...)                            \
  do {                                                      \
    if (ActiveIsa() == Isa::kAvx2) return avx2::fn(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__);                         \
  } while (0)
#else
#define APTSEP_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  APTSEP_DISPATCH(GemmNN, m, n, k, a, b, c, accumulate);
}

void GemmTN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  APTSEP_DISPATCH(GemmTN, m, n, k, a, b, c, accumulate);
}

void GemmNT(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  APTSEP_DISPATCH(GemmNT, m, n, k, a, b, c, accumulate);
}

#undef APTSEP_DISPATCH

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate) {
  scalar::GemmNN(m, n, k, a, b, c, accumulate);
}

void GemmTN(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate) {
  scalar::GemmTN(m, n, k, a, b, c, accumulate);
}

void GemmNT(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate) {
  scalar::GemmNT(m, n, k, a, b, c, accumulate);
}

}  // namespace aptsep::kernels
