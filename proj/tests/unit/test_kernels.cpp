#include <numeric>

#include "helpers.hpp"
#include "sra/kernels.hpp"

using namespace sra;
using doctest::Approx;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double close(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); }

}  // namespace

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!kernels::avx2_supported()) {
    MESSAGE("AVX2 unavailable; only the scalar path is exercised");
    return;
  }
  const auto& s = kernels::scalar();
  const auto& v = kernels::avx2();
  Rng rng(11);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 101u}) {
    const auto a = randv(rng, n);
    const auto b = randv(rng, n);
    CHECK(close(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n)) < 1e-12);
    CHECK(close(s.sqdist(a.data(), b.data(), n), v.sqdist(a.data(), b.data(), n)) < 1e-12);

    auto y1 = b, y2 = b;
    s.axpy(0.37, a.data(), y1.data(), n);
    v.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]) < 1e-14);

    auto z1 = a, z2 = a;
    s.scale(-1.7, z1.data(), n);
    v.scale(-1.7, z2.data(), n);
    CHECK(z1 == z2);

    const std::size_t rows = n % 6 + 1;
    const auto m = randv(rng, rows * n);
    std::vector<double> o1(rows), o2(rows);
    s.gemv(m.data(), rows, n, a.data(), o1.data());
    v.gemv(m.data(), rows, n, a.data(), o2.data());
    for (std::size_t r = 0; r < rows; ++r) CHECK(close(o1[r], o2[r]) < 1e-12);
  }
}

TEST_CASE("CSR accumulation agrees across backends") {
  if (!kernels::avx2_supported()) return;
  Rng rng(5);
  const std::size_t rows = 9, src_rows = 13;
  for (std::size_t dim : {1u, 4u, 6u, 16u, 19u}) {
    std::vector<std::size_t> ptr{0};
    std::vector<std::uint32_t> cols;
    std::vector<double> w;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t deg = rng.index(5);
      for (std::size_t k = 0; k < deg; ++k) {
        cols.push_back(static_cast<std::uint32_t>(rng.index(src_rows)));
        w.push_back(rng.uniform());
      }
      ptr.push_back(cols.size());
    }
    const auto src = randv(rng, src_rows * dim);
    std::vector<double> o1(rows * dim, 0.5), o2(rows * dim, 0.5);
    kernels::scalar().csr_accumulate(rows, ptr.data(), cols.data(), w.data(), src.data(), dim,
                                     o1.data());
    kernels::avx2().csr_accumulate(rows, ptr.data(), cols.data(), w.data(), src.data(), dim,
                                   o2.data());
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(close(o1[i], o2[i]) < 1e-13);
  }
}

TEST_CASE("backend selection") {
  const std::string before = kernels::active().name;
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("no-such-backend"));
  if (kernels::avx2_supported()) {
    CHECK(kernels::select("avx2"));
    CHECK(std::string(kernels::active().name) == "avx2");
  }
  kernels::select(before.c_str());
}

TEST_CASE("a trained model scores the same on either backend") {
  if (!kernels::avx2_supported()) return;
  const std::string before = kernels::active().name;
  const auto& w = test::world();
  std::vector<double> scores[2];
  int b = 0;
  for (const char* name : {"scalar", "avx2"}) {
    kernels::select(name);
    RecModel copy = RecModel::from_archive(w.model.to_archive());
    copy.attach(w.split.train_by_user, w.ds.friends());
    for (UserId u = 0; u < 10; ++u) {
      for (ItemId i = 0; i < 10; ++i) scores[b].push_back(copy.view().score(u, i));
    }
    ++b;
  }
  kernels::select(before.c_str());
  for (std::size_t i = 0; i < scores[0].size(); ++i) {
    CHECK(scores[0][i] == Approx(scores[1][i]).epsilon(1e-10));
  }
}
