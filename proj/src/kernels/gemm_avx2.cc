// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// AVX2/FMA float GEMM. Compiled with -mavx2 -mfma; only called after the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <cstring>

#include "aptsep/kernels/gemm.h"

namespace aptsep::kernels::avx2 {
namespace {

inline float ReduceAdd(__m256 x) {
  __m128 lo = _mm256_castps256_ps128(x);
  __m128 hi = _mm256_extractf128_ps(x, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

inline double ReduceAdd(__m256d x) {
  __m128d lo = _mm256_castpd256_pd128(x);
  __m128d hi = _mm256_extractf128_pd(x, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

// Rows [i, i+R) of C += A * B, where A(r, p) = a[r * ars + p * acs] and B is
// k x n row-major. Every element accumulates over p in increasing order.
template <int R>
void RowBlock(std::size_t i, std::size_t n, std::size_t k, const float* a,
              std::size_t ars, std::size_t acs, const float* b, float* c) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256 acc0[R], acc1[R];
    for (int r = 0; r < R; ++r) {
      acc0[r] = _mm256_loadu_ps(c + (i + r) * n + j);
      acc1[r] = _mm256_loadu_ps(c + (i + r) * n + j + 8);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float* brow = b + p * n + j;
      const __m256 b0 = _mm256_loadu_ps(brow);
      const __m256 b1 = _mm256_loadu_ps(brow + 8);
      for (int r = 0; r < R; ++r) {
        const __m256 av = _mm256_broadcast_ss(a + (i + r) * ars + p * acs);
        acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < R; ++r) {
      _mm256_storeu_ps(c + (i + r) * n + j, acc0[r]);
      _mm256_storeu_ps(c + (i + r) * n + j + 8, acc1[r]);
    }
  }
  for (; j + 8 <= n; j += 8) {
    __m256 acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_loadu_ps(c + (i + r) * n + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256 bv = _mm256_loadu_ps(b + p * n + j);
      for (int r = 0; r < R; ++r) {
        const __m256 av = _mm256_broadcast_ss(a + (i + r) * ars + p * acs);
        acc[r] = _mm256_fmadd_ps(av, bv, acc[r]);
      }
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_ps(c + (i + r) * n + j, acc[r]);
  }
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      float acc = c[(i + r) * n + j];
      for (std::size_t p = 0; p < k; ++p) {
        acc += a[(i + r) * ars + p * acs] * b[p * n + j];
      }
      c[(i + r) * n + j] = acc;
    }
  }
}

void GemmStridedA(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  std::size_t ars, std::size_t acs, const float* b, float* c,
                  bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) RowBlock<4>(i, n, k, a, ars, acs, b, c);
  for (; i < m; ++i) RowBlock<1>(i, n, k, a, ars, acs, b, c);
}

float DotNarrow(const float* x, const float* y, std::size_t k) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t p = 0;
  for (; p + 16 <= k; p += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + p), _mm256_loadu_ps(y + p), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + p + 8),
                           _mm256_loadu_ps(y + p + 8), acc1);
  }
  for (; p + 8 <= k; p += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + p), _mm256_loadu_ps(y + p), acc0);
  }
  float s = ReduceAdd(_mm256_add_ps(acc0, acc1));
  for (; p < k; ++p) s += x[p] * y[p];
  return s;
}

double DotWide(const float* x, const float* y, std::size_t k) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 8 <= k; p += 8) {
    const __m256 xv = _mm256_loadu_ps(x + p);
    const __m256 yv = _mm256_loadu_ps(y + p);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(yv)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)), acc1);
  }
  double s = ReduceAdd(_mm256_add_pd(acc0, acc1));
  for (; p < k; ++p) s += static_cast<double>(x[p]) * y[p];
  return s;
}

}  // namespace

void GemmNN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  GemmStridedA(m, n, k, a, k, 1, b, c, accumulate);
}

void GemmTN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  GemmStridedA(m, n, k, a, 1, m, b, c, accumulate);
}

void GemmNT(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c, bool accumulate) {
  const bool wide = k > kWideReductionThreshold;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float dot =
          wide ? static_cast<float>(DotWide(a + i * k, b + j * k, k))
               : DotNarrow(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + dot : dot;
    }
  }
}

}  // namespace aptsep::kernels::avx2
