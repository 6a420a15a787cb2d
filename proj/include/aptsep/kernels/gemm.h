// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dense GEMM kernels used by the autodiff engine. Three layouts cover the
// forward pass and both adjoints of matmul / im2col convolution:
//
//   NN:  C[m,n] (+)= sum_k A[m,k] * B[k,n]     A is m x k, B is k x n
//   TN:  C[m,n] (+)= sum_k A[k,m] * B[k,n]     A is k x m, B is k x n
//   NT:  C[m,n] (+)= sum_k A[m,k] * B[n,k]     A is m x k, B is n x k
//
// All matrices are dense row-major. Reductions longer than
// kWideReductionThreshold terms accumulate in double.
//
// The float entry points dispatch at runtime to an AVX2/FMA variant when the
// CPU supports it; the scalar variants in namespace `scalar` are the
// reference the SIMD code is tested against. Double always uses the scalar
// path.

#ifndef APTSEP_KERNELS_GEMM_H_
#define APTSEP_KERNELS_GEMM_H_

#include <cstddef>

namespace aptsep::kernels {

inline constexpr std::size_t kWideReductionThreshold = 4096;

enum class Isa { kScalar, kAvx2 };

const char* IsaName(Isa isa);

// Best ISA the running CPU supports (and this binary was built with).
Isa DetectIsa();

// ISA currently used by the float entry points. Starts as DetectIsa(), unless
// the APT_SEP_KERNELS environment variable says "scalar".
Isa ActiveIsa();

// Overrides dispatch; requesting an unsupported ISA falls back to scalar.
// Returns the ISA actually selected.
Isa SetActiveIsa(Isa isa);

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate);
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate);
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c, bool accumulate);

namespace scalar {

template <typename T>
void GemmNN(std::size_t m, std::size_t n, std::size_t k, const T* a,
            const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const T* a,
            const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p * m + i];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const T* a,
            const T* b, T* c, bool accumulate) {
  const bool wide = k > kWideReductionThreshold;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T dot;
      if (wide) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
          acc += static_cast<double>(arow[p]) * static_cast<double>(brow[p]);
        }
        dot = static_cast<T>(acc);
      } else {
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        dot = acc;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + dot : dot;
    }
  }
}

}  // namespace scalar

#if defined(APTSEP_HAVE_AVX2)
namespace avx2 {

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate);

}  // namespace avx2
#endif

}  // namespace aptsep::kernels

#endif  // APTSEP_KERNELS_GEMM_H_
