#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "sra/community.hpp"
#include "sra/error.hpp"
#include "sra/guard.hpp"
#include "sra/kernels.hpp"

namespace sra {

namespace {

constexpr double kReachFloor = 1e-10;

}  // namespace

Matrix detection_features(const Dataset& dataset) {
  const std::size_t n = dataset.user_count;
  const auto friends = dataset.friends();
  const auto pop = dataset.popularity();
  const auto part = louvain(n, dataset.social);

  Matrix x(n, 4);
  std::vector<double> pop_sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& e : dataset.interactions) {
    pop_sum[e.a] += static_cast<double>(pop[e.b]);
    ++count[e.a];
  }
  for (std::size_t u = 0; u < n; ++u) {
    std::set<CommunityId> seen;
    for (auto v : friends[u]) seen.insert(part.assignment[v]);
    auto r = x.row(u);
    r[0] = static_cast<double>(friends[u].size());
    r[1] = static_cast<double>(count[u]);
    r[2] = count[u] ? pop_sum[u] / static_cast<double>(count[u]) : 0.0;
    r[3] = static_cast<double>(seen.size());
  }
  return x;
}

Matrix zscore(const Matrix& points) {
  Matrix z = points;
  const std::size_t n = points.rows;
  if (n == 0) return z;
  for (std::size_t c = 0; c < points.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += points.data[r * points.cols + c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = points.data[r * points.cols + c] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
      double& v = z.data[r * points.cols + c];
      v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
  }
  return z;
}

std::vector<double> lof_scores(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows;
  require(k >= 1, ErrorKind::InvalidInput, "lof: k must be >= 1");
  require(k < n, ErrorKind::InvalidInput,
          "lof: k=" + std::to_string(k) + " needs more than k users (have " + std::to_string(n) +
              ")");
  std::vector<std::vector<std::size_t>> nbr(n);
  std::vector<std::vector<double>> nbr_dist(n);
  std::vector<double> kdist(n);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t j = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == p) continue;
      cand[j++] = {std::sqrt(kernels::sqdist(points.row(p), points.row(o))), o};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t i = 0; i < k; ++i) {
      nbr[p].push_back(cand[i].second);
      nbr_dist[p].push_back(cand[i].first);
    }
    kdist[p] = cand[k - 1].first;
  }
  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    double reach = 0.0;
    for (std::size_t i = 0; i < k; ++i) reach += std::max(kdist[nbr[p][i]], nbr_dist[p][i]);
    lrd[p] = 1.0 / std::max(reach / static_cast<double>(k), kReachFloor);
  }
  std::vector<double> score(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (auto o : nbr[p]) s += lrd[o];
    score[p] = s / (static_cast<double>(k) * lrd[p]);
  }
  return score;
}

double detection_rate(std::size_t fakes_flagged, std::size_t fakes) {
  require(fakes_flagged <= fakes, ErrorKind::InvalidInput, "detection rate: flagged > fakes");
  return fakes ? static_cast<double>(fakes_flagged) / static_cast<double>(fakes) : 0.0;
}

DetectionReport detect_anomalies(const Dataset& dataset, std::size_t real_users,
                                 const DetectionConfig& config) {
  require(real_users <= dataset.user_count, ErrorKind::InvalidInput,
          "detect: more real users than users");
  require(config.k < dataset.user_count, ErrorKind::InvalidInput,
          "detect: k must be smaller than the user count");
  DetectionReport r;
  r.config = config;
  r.scores = lof_scores(zscore(detection_features(dataset)), config.k);
  r.fakes = dataset.user_count - real_users;
  for (std::size_t u = 0; u < dataset.user_count; ++u) {
    if (r.scores[u] > config.threshold) {
      r.flagged.push_back(static_cast<UserId>(u));
      if (u >= real_users) ++r.fakes_flagged;
    }
  }
  r.rate = detection_rate(r.fakes_flagged, r.fakes);
  return r;
}

nlohmann::json DetectionReport::to_json() const {
  return {{"flagged", flagged},
          {"fakes", fakes},
          {"fakes_flagged", fakes_flagged},
          {"rate", rate},
          {"k", config.k},
          {"threshold", config.threshold}};
}

std::string DetectionReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "user,score,flagged,fake\n";
  const std::size_t real = scores.size() - fakes;
  for (std::size_t u = 0; u < scores.size(); ++u) {
    out << u << ',' << scores[u] << ',' << (scores[u] > config.threshold ? 1 : 0) << ','
        << (u >= real ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace sra
