#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "sra/data.hpp"
#include "sra/gradcore.hpp"

namespace sra {

/// Per-user detection features: social degree, interaction count, mean
/// popularity of the user's items, and the number of distinct communities
/// among the user's friends (Louvain on the observed social graph).
inline constexpr const char* kDetectionFeatures[] = {"degree", "interactions",
                                                     "mean_item_popularity", "community_spread"};

Matrix detection_features(const Dataset& dataset);

/// Column-wise z-scores; constant columns become 0.
Matrix zscore(const Matrix& points);

/// Local outlier factor with exactly k nearest neighbours (ties by index).
/// Duplicate points get a tiny reachability floor so densities stay finite.
std::vector<double> lof_scores(const Matrix& points, std::size_t k);

struct DetectionConfig {
  std::size_t k = 20;
  double threshold = 1.5;
};

struct DetectionReport {
  std::vector<UserId> flagged;  // ascending
  std::vector<double> scores;   // per user
  std::size_t fakes = 0;
  std::size_t fakes_flagged = 0;
  double rate = 0.0;            // fakes_flagged / fakes (0 without fakes)
  DetectionConfig config;

  nlohmann::json to_json() const;
  /// "user,score,flagged,fake" rows.
  std::string to_csv() const;
};

/// Users with id >= real_users are the injected fakes.
DetectionReport detect_anomalies(const Dataset& dataset, std::size_t real_users,
                                 const DetectionConfig& config = {});

/// |flagged ∩ fakes| / |fakes|.
double detection_rate(std::size_t fakes_flagged, std::size_t fakes);

}  // namespace sra
