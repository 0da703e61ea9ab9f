#pragma once

// Elementwise kernels with a scalar reference and an AVX2 variant,
// selected once at runtime. Complex data is split real/imag (SoA).

#include <cstddef>
#include <string_view>

namespace isomctl::simd {

enum class Level { Scalar, Avx2 };

struct KernelTable {
  Level level;
  const char* name;

  /// out = y + c x. out may alias x or y.
  void (*axpy)(std::size_t n, double c, const double* x, const double* y, double* out);

  /// out = y + c (f * x), complex elementwise. y may be null (zero); out may alias x or y.
  void (*cmul_axpy)(std::size_t n, double c, const double* fr, const double* fi, const double* xr,
                    const double* xi, const double* yr, const double* yi, double* outr, double* outi);

  /// Phasor bank: for each sample s, out[s] = sum_k amp[k] z[k], then z[k] *= rot[k].
  /// z is advanced in place by n_samples rotations.
  void (*phasor_sum)(std::size_t n_comp, const double* amp, double* zr, double* zi, const double* rr,
                     const double* ri, std::size_t n_samples, double* out_re, double* out_im);

  /// sum |x[k]| for n doubles.
  double (*abs_sum)(std::size_t n, const double* x);

  /// C = A B, column-major; A is m x k, B is k x n. C must not alias A or B.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
               std::size_t ldb, double* c, std::size_t ldc);
};

const KernelTable& scalar_kernels();
/// nullptr when not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// Best available table; ISOMCTL_SIMD=scalar forces the reference path.
const KernelTable& kernels();
void force_level(Level level);
std::string_view level_name(Level level);

}  // namespace isomctl::simd
