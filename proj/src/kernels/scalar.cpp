#include "sra/kernels.hpp"

namespace sra::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemv_scalar(const double* m, std::size_t rows, std::size_t cols, const double* v,
                 double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_scalar(m + r * cols, v, cols);
}

void csr_accumulate_scalar(std::size_t rows, const std::size_t* row_ptr,
                           const std::uint32_t* cols, const double* w, const double* src,
                           std::size_t dim, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out + r * dim;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      axpy_scalar(w[k], src + static_cast<std::size_t>(cols[k]) * dim, dst, dim);
    }
  }
}

}  // namespace

const Table& scalar() {
  static const Table table{"scalar",      dot_scalar,  axpy_scalar,          scale_scalar,
                           sqdist_scalar, gemv_scalar, csr_accumulate_scalar};
  return table;
}

}  // namespace sra::kernels
