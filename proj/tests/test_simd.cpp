#include <doctest.h>

#include "isomctl/simd.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace isomctl;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

const simd::KernelTable* vector_table() { return simd::avx2_kernels(); }

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("runtime selection reports a table") {
  const auto& k = simd::kernels();
  CHECK(k.name != nullptr);
  CHECK(simd::scalar_kernels().level == simd::Level::Scalar);
  if (vector_table()) CHECK(vector_table()->level == simd::Level::Avx2);
  MESSAGE("active kernels: " << k.name);
}

TEST_CASE("axpy equivalence, including tails and aliasing") {
  const auto* v = vector_table();
  if (!v) return;
  const auto& s = simd::scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 33u, 1000u}) {
    const auto x = noise(n, 1), y = noise(n, 2);
    std::vector<double> a(n), b(n);
    s.axpy(n, 0.37, x.data(), y.data(), a.data());
    v->axpy(n, 0.37, x.data(), y.data(), b.data());
    CHECK(max_diff(a, b) <= 1e-15);
    auto xa = x;
    v->axpy(n, -1.5, xa.data(), y.data(), xa.data());
    s.axpy(n, -1.5, x.data(), y.data(), a.data());
    CHECK(max_diff(a, xa) <= 1e-15);
  }
}

TEST_CASE("complex multiply-accumulate equivalence") {
  const auto* v = vector_table();
  if (!v) return;
  const auto& s = simd::scalar_kernels();
  for (std::size_t n : {1u, 5u, 8u, 31u, 257u}) {
    const auto fr = noise(n, 3), fi = noise(n, 4), xr = noise(n, 5), xi = noise(n, 6), yr = noise(n, 7),
               yi = noise(n, 8);
    std::vector<double> ar(n), ai(n), br(n), bi(n);
    s.cmul_axpy(n, 0.25, fr.data(), fi.data(), xr.data(), xi.data(), yr.data(), yi.data(), ar.data(), ai.data());
    v->cmul_axpy(n, 0.25, fr.data(), fi.data(), xr.data(), xi.data(), yr.data(), yi.data(), br.data(), bi.data());
    CHECK(max_diff(ar, br) <= 1e-14);
    CHECK(max_diff(ai, bi) <= 1e-14);
    s.cmul_axpy(n, 1.0, fr.data(), fi.data(), xr.data(), xi.data(), nullptr, nullptr, ar.data(), ai.data());
    v->cmul_axpy(n, 1.0, fr.data(), fi.data(), xr.data(), xi.data(), nullptr, nullptr, br.data(), bi.data());
    CHECK(max_diff(ar, br) <= 1e-14);
    CHECK(max_diff(ai, bi) <= 1e-14);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ar[i] == doctest::Approx(fr[i] * xr[i] - fi[i] * xi[i]).scale(1.0));
      CHECK(ai[i] == doctest::Approx(fr[i] * xi[i] + fi[i] * xr[i]).scale(1.0));
    }
  }
}

TEST_CASE("phasor bank equivalence against direct cosines") {
  const std::size_t nc = 128, ns = 4000;
  std::vector<double> amp(nc), w(nc), ph(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    amp[k] = std::exp(-std::pow((k - 64.0) / 40.0, 2));
    w[k] = 4.67 + 5.9e-4 * k;
    ph[k] = 0.05 * k * k;
  }
  const double dt = 0.05;
  auto run = [&](const simd::KernelTable& t, std::vector<double>& re, std::vector<double>& im) {
    std::vector<double> zr(nc), zi(nc), rr(nc), ri(nc);
    for (std::size_t k = 0; k < nc; ++k) {
      zr[k] = std::cos(ph[k]);
      zi[k] = std::sin(ph[k]);
      rr[k] = std::cos(w[k] * dt);
      ri[k] = std::sin(w[k] * dt);
    }
    re.assign(ns, 0.0);
    im.assign(ns, 0.0);
    t.phasor_sum(nc, amp.data(), zr.data(), zi.data(), rr.data(), ri.data(), ns, re.data(), im.data());
  };
  std::vector<double> sre, sim;
  run(simd::scalar_kernels(), sre, sim);
  for (std::size_t s = 0; s < ns; s += 251) {
    double ref = 0.0;
    for (std::size_t k = 0; k < nc; ++k) ref += amp[k] * std::cos(w[k] * dt * s + ph[k]);
    CHECK(sre[s] == doctest::Approx(ref).scale(100.0).epsilon(1e-11));
  }
  if (const auto* v = vector_table()) {
    std::vector<double> vre, vim;
    run(*v, vre, vim);
    CHECK(max_diff(sre, vre) <= 1e-11);
    CHECK(max_diff(sim, vim) <= 1e-11);
  }
}

TEST_CASE("abs_sum equivalence") {
  const auto* v = vector_table();
  if (!v) return;
  for (std::size_t n : {0u, 1u, 6u, 8u, 1001u}) {
    const auto x = noise(n, 9);
    CHECK(v->abs_sum(n, x.data()) == doctest::Approx(simd::scalar_kernels().abs_sum(n, x.data())).epsilon(1e-13));
  }
}

TEST_CASE("gemm against a naive product, odd shapes and leading dimensions") {
  struct Shape {
    std::size_t m, n, k;
  };
  for (Shape sh : {Shape{1, 1, 1}, Shape{8, 4, 3}, Shape{9, 5, 7}, Shape{17, 13, 29}, Shape{101, 99, 101}}) {
    const std::size_t lda = sh.m + 3, ldb = sh.k + 1, ldc = sh.m + 2;
    const auto a = noise(lda * sh.k, 10), b = noise(ldb * sh.n, 11);
    std::vector<double> ref(ldc * sh.n, 0.0);
    for (std::size_t j = 0; j < sh.n; ++j) {
      for (std::size_t i = 0; i < sh.m; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < sh.k; ++p) acc += a[i + p * lda] * b[p + j * ldb];
        ref[i + j * ldc] = acc;
      }
    }
    std::vector<double> cs(ldc * sh.n, -7.0);
    simd::scalar_kernels().gemm(sh.m, sh.n, sh.k, a.data(), lda, b.data(), ldb, cs.data(), ldc);
    for (std::size_t j = 0; j < sh.n; ++j) {
      for (std::size_t i = 0; i < sh.m; ++i) CHECK(cs[i + j * ldc] == doctest::Approx(ref[i + j * ldc]).scale(10.0));
      for (std::size_t i = sh.m; i < ldc; ++i) CHECK(cs[i + j * ldc] == -7.0);  // padding untouched
    }
    if (const auto* v = vector_table()) {
      std::vector<double> cv(ldc * sh.n, -7.0);
      v->gemm(sh.m, sh.n, sh.k, a.data(), lda, b.data(), ldb, cv.data(), ldc);
      double worst = 0.0;
      for (std::size_t j = 0; j < sh.n; ++j) {
        for (std::size_t i = 0; i < sh.m; ++i) worst = std::max(worst, std::abs(cv[i + j * ldc] - cs[i + j * ldc]));
        for (std::size_t i = sh.m; i < ldc; ++i) CHECK(cv[i + j * ldc] == -7.0);
      }
      CHECK(worst <= 1e-12);
    }
  }
}

TEST_CASE("forcing the scalar level") {
  const simd::Level before = simd::kernels().level;
  simd::force_level(simd::Level::Scalar);
  CHECK(simd::kernels().level == simd::Level::Scalar);
  simd::force_level(simd::Level::Avx2);
  if (vector_table()) {
    CHECK(simd::kernels().level == simd::Level::Avx2);
  } else {
    CHECK(simd::kernels().level == simd::Level::Scalar);
  }
  simd::force_level(before);
}

}
