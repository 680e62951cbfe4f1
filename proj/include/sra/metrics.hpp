#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sra/data.hpp"

namespace sra {

struct RankedList {
  UserId user = 0;
  std::vector<ItemId> items;
  std::size_t k = 0;
};

// Binary relevance. `relevant` may be in any order but must be non-empty for
// NDCG and recall (UndefinedMetric otherwise).
double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k);
double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant,
                   std::size_t k);
double precision_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant,
                      std::size_t k);

/// Mean over spies of |top-k ∩ cold| / k.
double cold_hit_reward(std::span<const RankedList> spy_lists, std::span<const char> cold_mask,
                       std::size_t k);

inline constexpr std::size_t kReportCutoffs[] = {5, 10, 20};

struct MetricsReport {
  std::string label;
  std::size_t users = 0;
  std::map<std::string, double> values;  // "NDCG@10" -> mean

  double at(const std::string& metric, std::size_t k) const;
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

/// Aggregates per-user metrics; `rankings[u]` must hold at least the largest
/// cutoff items (or every candidate). Users with no test items are skipped.
MetricsReport evaluate_rankings(const std::vector<std::vector<ItemId>>& rankings,
                                const std::vector<std::vector<ItemId>>& test_by_user,
                                const std::string& label);

struct Improvement {
  std::map<std::string, double> drop_vs_clean;      // (clean - attacked) / clean
  std::map<std::string, double> gain_vs_baseline;   // (baseline - attacked) / baseline
  std::vector<std::string> undefined;               // metrics with a zero denominator
};

Improvement evaluate_attack(const MetricsReport& clean, const MetricsReport& attacked,
                            const MetricsReport& best_baseline);

}  // namespace sra
