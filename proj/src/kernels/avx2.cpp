#include "sra/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define SRA_HAVE_X86 1
#include <immintrin.h>
#else
#define SRA_HAVE_X86 0
#endif

namespace sra::kernels {

#if SRA_HAVE_X86
namespace {

#define SRA_AVX2 __attribute__((target("avx2,fma")))

SRA_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

SRA_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

SRA_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

SRA_AVX2 void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

SRA_AVX2 double sqdist_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

SRA_AVX2 void gemv_avx2(const double* m, std::size_t rows, std::size_t cols, const double* v,
                        double* out) {
  std::size_t r = 0;
  if (cols % 4 == 0) {
    for (; r + 4 <= rows; r += 4) {
      const double* m0 = m + r * cols;
      const double* m1 = m0 + cols;
      const double* m2 = m1 + cols;
      const double* m3 = m2 + cols;
      __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
      for (std::size_t c = 0; c < cols; c += 4) {
        const __m256d x = _mm256_loadu_pd(v + c);
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(m0 + c), x, a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(m1 + c), x, a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(m2 + c), x, a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(m3 + c), x, a3);
      }
      out[r] = hsum(a0);
      out[r + 1] = hsum(a1);
      out[r + 2] = hsum(a2);
      out[r + 3] = hsum(a3);
    }
  }
  // Same lane order as the 4-row body so a row's result does not depend on its position.
  for (; r < rows; ++r) {
    const double* mr = m + r * cols;
    if (cols % 4 != 0) {
      out[r] = dot_avx2(mr, v, cols);
      continue;
    }
    __m256d a = _mm256_setzero_pd();
    for (std::size_t c = 0; c < cols; c += 4) {
      a = _mm256_fmadd_pd(_mm256_loadu_pd(mr + c), _mm256_loadu_pd(v + c), a);
    }
    out[r] = hsum(a);
  }
}

// Output rows are processed in 16-wide column blocks held in registers
// across the row's nonzeros.
SRA_AVX2 void csr_accumulate_avx2(std::size_t rows, const std::size_t* row_ptr,
                                  const std::uint32_t* cols, const double* w,
                                  const double* src, std::size_t dim, double* out) {
  const std::size_t blocked = dim - dim % 16;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t lo = row_ptr[r];
    const std::size_t hi = row_ptr[r + 1];
    if (lo == hi) continue;
    double* dst = out + r * dim;
    for (std::size_t c = 0; c < blocked; c += 16) {
      __m256d a0 = _mm256_loadu_pd(dst + c);
      __m256d a1 = _mm256_loadu_pd(dst + c + 4);
      __m256d a2 = _mm256_loadu_pd(dst + c + 8);
      __m256d a3 = _mm256_loadu_pd(dst + c + 12);
      for (std::size_t k = lo; k < hi; ++k) {
        const double* s = src + static_cast<std::size_t>(cols[k]) * dim + c;
        const __m256d wk = _mm256_set1_pd(w[k]);
        a0 = _mm256_fmadd_pd(wk, _mm256_loadu_pd(s), a0);
        a1 = _mm256_fmadd_pd(wk, _mm256_loadu_pd(s + 4), a1);
        a2 = _mm256_fmadd_pd(wk, _mm256_loadu_pd(s + 8), a2);
        a3 = _mm256_fmadd_pd(wk, _mm256_loadu_pd(s + 12), a3);
      }
      _mm256_storeu_pd(dst + c, a0);
      _mm256_storeu_pd(dst + c + 4, a1);
      _mm256_storeu_pd(dst + c + 8, a2);
      _mm256_storeu_pd(dst + c + 12, a3);
    }
    if (blocked < dim) {
      for (std::size_t k = lo; k < hi; ++k) {
        axpy_avx2(w[k], src + static_cast<std::size_t>(cols[k]) * dim + blocked, dst + blocked,
                  dim - blocked);
      }
    }
  }
}

}  // namespace

const Table& avx2() {
  static const Table table{"avx2",      dot_avx2,  axpy_avx2,          scale_avx2,
                           sqdist_avx2, gemv_avx2, csr_accumulate_avx2};
  return table;
}

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

const Table& avx2() { return scalar(); }
bool avx2_supported() { return false; }

#endif

}  // namespace sra::kernels
