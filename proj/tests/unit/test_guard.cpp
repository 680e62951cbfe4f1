#include <numeric>

#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

namespace {

// Textbook LOF written directly from the definitions.
std::vector<double> lof_oracle(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows;
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) s += (x(a, c) - x(b, c)) * (x(a, c) - x(b, c));
      d[a][b] = std::sqrt(s);
    }
  }
  std::vector<std::vector<std::size_t>> nn(n);
  std::vector<double> kdist(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> order;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a) order.push_back(b);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t p, std::size_t q) { return d[a][p] < d[a][q]; });
    nn[a].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    kdist[a] = d[a][nn[a].back()];
  }
  std::vector<double> lrd(n);
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (auto b : nn[a]) s += std::max(kdist[b], d[a][b]);
    lrd[a] = static_cast<double>(k) / s;
  }
  std::vector<double> lof(n);
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (auto b : nn[a]) s += lrd[b];
    lof[a] = s / (static_cast<double>(k) * lrd[a]);
  }
  return lof;
}

Matrix gaussian_cloud(std::size_t n, std::size_t dim, Rng& rng) {
  Matrix m(n, dim);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("LOF matches a brute-force oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 8 + rng.index(30);
    const std::size_t dim = 1 + rng.index(4);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n - 1, 10));
    const Matrix x = gaussian_cloud(n, dim, rng);
    const auto got = lof_scores(x, k);
    const auto want = lof_oracle(x, k);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == Approx(want[i]).epsilon(1e-9));
  }
}

TEST_CASE("LOF is near 1 inside a uniform grid and large for an isolated point") {
  Matrix grid(26, 2);
  for (std::size_t i = 0; i < 25; ++i) {
    grid(i, 0) = static_cast<double>(i % 5);
    grid(i, 1) = static_cast<double>(i / 5);
  }
  grid(25, 0) = 30.0;
  grid(25, 1) = 30.0;
  const auto s = lof_scores(grid, 4);
  CHECK(s[12] == Approx(1.0).epsilon(0.05));
  CHECK(s[25] > 5.0);
}

TEST_CASE("LOF rejects neighbourhoods it cannot form and handles duplicates") {
  Matrix x(3, 1);
  x.data = {0.0, 1.0, 2.0};
  CHECK(kind_of([&] { lof_scores(x, 3); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { lof_scores(x, 0); }) == ErrorKind::InvalidInput);
  Matrix dup(4, 1);
  dup.data = {1.0, 1.0, 1.0, 1.0};
  for (double v : lof_scores(dup, 2)) CHECK(std::isfinite(v));
}

TEST_CASE("z-scores standardize columns and zero constant ones") {
  Matrix x(4, 2);
  x.data = {1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0};
  const Matrix z = zscore(x);
  double mean = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < 4; ++r) {
    mean += z(r, 0);
    sq += z(r, 0) * z(r, 0);
    CHECK(z(r, 1) == 0.0);
  }
  CHECK(mean == Approx(0.0).epsilon(1e-12));
  CHECK(sq / 4.0 == Approx(1.0));
}

TEST_CASE("detection rate") {
  CHECK(detection_rate(3, 50) == Approx(0.06));
  CHECK(detection_rate(0, 0) == 0.0);
}

TEST_CASE("detection flags obvious fakes and lower thresholds flag more") {
  const auto& w = test::world();
  // Fakes that befriend dozens of users and rate the same item are far from everyone.
  std::vector<FakeUser> fakes(3);
  for (auto& f : fakes) {
    for (UserId u = 0; u < 60; u += 2) f.pairs.push_back({u, static_cast<UserId>(u + 1)});
    f.items = {0};
  }
  Budget budget{3, 30};
  const Dataset polluted = inject_poison(w.ds, fakes, budget);
  const Matrix feats = detection_features(polluted);
  CHECK(feats.rows == polluted.user_count);
  CHECK(feats.cols == std::size(kDetectionFeatures));
  std::size_t prev = polluted.user_count + 1;
  for (double th : {1.1, 1.5, 2.0, 4.0}) {
    DetectionConfig dc;
    dc.threshold = th;
    const auto r = detect_anomalies(polluted, w.ds.user_count, dc);
    CHECK(r.fakes == 3);
    CHECK(r.flagged.size() <= prev);
    CHECK(std::is_sorted(r.flagged.begin(), r.flagged.end()));
    CHECK(r.rate == Approx(detection_rate(r.fakes_flagged, 3)));
    prev = r.flagged.size();
  }
  const auto r = detect_anomalies(polluted, w.ds.user_count);
  CHECK(r.fakes_flagged == 3);
  CHECK(r.to_csv().rfind("user,score,flagged,fake\n", 0) == 0);
}
