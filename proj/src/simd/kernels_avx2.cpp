#include "isomctl/simd.hpp"

#include <immintrin.h>

#include <cmath>

namespace isomctl::simd {

namespace {

void axpy(std::size_t n, double c, const double* x, const double* y, double* out) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vx = _mm256_loadu_pd(x + k);
    const __m256d vy = _mm256_loadu_pd(y + k);
    _mm256_storeu_pd(out + k, _mm256_fmadd_pd(vc, vx, vy));
  }
  for (; k < n; ++k) out[k] = y[k] + c * x[k];
}

void cmul_axpy(std::size_t n, double c, const double* fr, const double* fi, const double* xr,
               const double* xi, const double* yr, const double* yi, double* outr, double* outi) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d a = _mm256_loadu_pd(fr + k);
    const __m256d b = _mm256_loadu_pd(fi + k);
    const __m256d u = _mm256_loadu_pd(xr + k);
    const __m256d v = _mm256_loadu_pd(xi + k);
    const __m256d pr = _mm256_fmsub_pd(a, u, _mm256_mul_pd(b, v));
    const __m256d pi = _mm256_fmadd_pd(a, v, _mm256_mul_pd(b, u));
    const __m256d br = yr ? _mm256_loadu_pd(yr + k) : zero;
    const __m256d bi = yi ? _mm256_loadu_pd(yi + k) : zero;
    _mm256_storeu_pd(outr + k, _mm256_fmadd_pd(vc, pr, br));
    _mm256_storeu_pd(outi + k, _mm256_fmadd_pd(vc, pi, bi));
  }
  for (; k < n; ++k) {
    const double pr = fr[k] * xr[k] - fi[k] * xi[k];
    const double pi = fr[k] * xi[k] + fi[k] * xr[k];
    const double br = yr ? yr[k] : 0.0;
    const double bi = yi ? yi[k] : 0.0;
    outr[k] = br + c * pr;
    outi[k] = bi + c * pi;
  }
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void phasor_sum(std::size_t n_comp, const double* amp, double* zr, double* zi, const double* rr,
                const double* ri, std::size_t n_samples, double* out_re, double* out_im) {
  const std::size_t nv = n_comp & ~std::size_t{3};
  for (std::size_t s = 0; s < n_samples; ++s) {
    __m256d acc_r = _mm256_setzero_pd();
    __m256d acc_i = _mm256_setzero_pd();
    for (std::size_t k = 0; k < nv; k += 4) {
      const __m256d a = _mm256_loadu_pd(amp + k);
      const __m256d x = _mm256_loadu_pd(zr + k);
      const __m256d y = _mm256_loadu_pd(zi + k);
      const __m256d c = _mm256_loadu_pd(rr + k);
      const __m256d d = _mm256_loadu_pd(ri + k);
      acc_r = _mm256_fmadd_pd(a, x, acc_r);
      acc_i = _mm256_fmadd_pd(a, y, acc_i);
      _mm256_storeu_pd(zr + k, _mm256_fmsub_pd(x, c, _mm256_mul_pd(y, d)));
      _mm256_storeu_pd(zi + k, _mm256_fmadd_pd(x, d, _mm256_mul_pd(y, c)));
    }
    double ar = hsum(acc_r), ai = hsum(acc_i);
    for (std::size_t k = nv; k < n_comp; ++k) {
      ar += amp[k] * zr[k];
      ai += amp[k] * zi[k];
      const double nr = zr[k] * rr[k] - zi[k] * ri[k];
      const double ni = zr[k] * ri[k] + zi[k] * rr[k];
      zr[k] = nr;
      zi[k] = ni;
    }
    out_re[s] = ar;
    out_im[s] = ai;
  }
}

double abs_sum(std::size_t n, const double* x) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(x + k)));
  double s = hsum(acc);
  for (; k < n; ++k) s += std::abs(x[k]);
  return s;
}

// 8 x 4 register block.
inline void block_8x4(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd(), c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd(), c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
  const double* b0 = b;
  const double* b1 = b + ldb;
  const double* b2 = b + 2 * ldb;
  const double* b3 = b + 3 * ldb;
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d a0 = _mm256_loadu_pd(a + p * lda);
    const __m256d a1 = _mm256_loadu_pd(a + p * lda + 4);
    __m256d x = _mm256_broadcast_sd(b0 + p);
    c00 = _mm256_fmadd_pd(a0, x, c00);
    c10 = _mm256_fmadd_pd(a1, x, c10);
    x = _mm256_broadcast_sd(b1 + p);
    c01 = _mm256_fmadd_pd(a0, x, c01);
    c11 = _mm256_fmadd_pd(a1, x, c11);
    x = _mm256_broadcast_sd(b2 + p);
    c02 = _mm256_fmadd_pd(a0, x, c02);
    c12 = _mm256_fmadd_pd(a1, x, c12);
    x = _mm256_broadcast_sd(b3 + p);
    c03 = _mm256_fmadd_pd(a0, x, c03);
    c13 = _mm256_fmadd_pd(a1, x, c13);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c10);
  _mm256_storeu_pd(c + ldc, c01);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c02);
  _mm256_storeu_pd(c + 2 * ldc + 4, c12);
  _mm256_storeu_pd(c + 3 * ldc, c03);
  _mm256_storeu_pd(c + 3 * ldc + 4, c13);
}

// 4 x 1 block.
inline void block_4x1(std::size_t k, const double* a, std::size_t lda, const double* b, double* c) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + p * lda), _mm256_broadcast_sd(b + p), acc);
  _mm256_storeu_pd(c, acc);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t m8 = m & ~std::size_t{7};
  const std::size_t m4 = m & ~std::size_t{3};
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t j = 0; j < n4; j += 4) {
    for (std::size_t i = 0; i < m8; i += 8) block_8x4(k, a + i, lda, b + j * ldb, ldb, c + i + j * ldc, ldc);
    for (std::size_t jj = j; jj < j + 4; ++jj) {
      for (std::size_t i = m8; i < m4; i += 4) block_4x1(k, a + i, lda, b + jj * ldb, c + i + jj * ldc);
    }
  }
  for (std::size_t j = n4; j < n; ++j) {
    for (std::size_t i = 0; i < m4; i += 4) block_4x1(k, a + i, lda, b + j * ldb, c + i + j * ldc);
  }
  if (m4 < m) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = m4; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[i + p * lda] * b[p + j * ldb];
        c[i + j * ldc] = acc;
      }
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Level::Avx2, "avx2", axpy, cmul_axpy, phasor_sum, abs_sum, gemm};
  return table;
}

}  // namespace isomctl::simd
