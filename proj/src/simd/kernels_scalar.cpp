#include "isomctl/simd.hpp"

#include <cmath>

namespace isomctl::simd {

namespace {

void axpy(std::size_t n, double c, const double* x, const double* y, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = y[k] + c * x[k];
}

void cmul_axpy(std::size_t n, double c, const double* fr, const double* fi, const double* xr,
               const double* xi, const double* yr, const double* yi, double* outr, double* outi) {
  for (std::size_t k = 0; k < n; ++k) {
    const double pr = fr[k] * xr[k] - fi[k] * xi[k];
    const double pi = fr[k] * xi[k] + fi[k] * xr[k];
    const double br = yr ? yr[k] : 0.0;
    const double bi = yi ? yi[k] : 0.0;
    outr[k] = br + c * pr;
    outi[k] = bi + c * pi;
  }
}

void phasor_sum(std::size_t n_comp, const double* amp, double* zr, double* zi, const double* rr,
                const double* ri, std::size_t n_samples, double* out_re, double* out_im) {
  for (std::size_t s = 0; s < n_samples; ++s) {
    double ar = 0.0, ai = 0.0;
    for (std::size_t k = 0; k < n_comp; ++k) {
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
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::abs(x[k]);
  return acc;
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t j = 0; j < n; ++j) {
    double* cj = c + j * ldc;
    for (std::size_t i = 0; i < m; ++i) cj[i] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double bpj = b[p + j * ldb];
      const double* ap = a + p * lda;
      for (std::size_t i = 0; i < m; ++i) cj[i] += ap[i] * bpj;
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Level::Scalar, "scalar", axpy, cmul_axpy, phasor_sum, abs_sum, gemm};
  return table;
}

}  // namespace isomctl::simd
