#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Dense/sparse arithmetic inner loops. Every kernel has a portable scalar
// reference and an AVX2+FMA variant; the variant is chosen once at runtime
// from CPU features (override with SRA_SIMD=scalar). Results of the two
// variants agree to rounding, not bit-for-bit, so reproducibility is
// guaranteed per backend.

namespace sra::kernels {

struct Table {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  double (*sqdist)(const double* a, const double* b, std::size_t n);
  // out[r] = <m[r*cols .. r*cols+cols), v> for r in [0, rows)
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* v,
               double* out);
  // out[r*dim ..] += sum_{k in row r} w[k] * src[cols[k]*dim ..]
  void (*csr_accumulate)(std::size_t rows, const std::size_t* row_ptr,
                         const std::uint32_t* cols, const double* w, const double* src,
                         std::size_t dim, double* out);
};

const Table& scalar();
/// Only valid when avx2_supported().
const Table& avx2();
bool avx2_supported();
/// The dispatched table.
const Table& active();
/// Test hook: pin the active backend ("scalar" or "avx2"); returns false if
/// the request cannot be honoured on this CPU.
bool select(const char* name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) {
  active().scale(alpha, x.data(), x.size());
}
inline double sqdist(std::span<const double> a, std::span<const double> b) {
  return active().sqdist(a.data(), b.data(), a.size());
}

}  // namespace sra::kernels
