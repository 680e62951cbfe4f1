#include "sra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sra/error.hpp"

namespace sra {
namespace {

std::vector<ItemId> sorted_copy(std::span<const ItemId> v) {
  std::vector<ItemId> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::size_t hits(std::span<const ItemId> ranked, const std::vector<ItemId>& rel, std::size_t k) {
  std::size_t h = 0;
  const std::size_t cut = std::min(k, ranked.size());
  for (std::size_t p = 0; p < cut; ++p) {
    if (std::binary_search(rel.begin(), rel.end(), ranked[p])) ++h;
  }
  return h;
}

std::string key(const char* metric, std::size_t k) {
  return std::string(metric) + "@" + std::to_string(k);
}

}  // namespace

double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant,
                 std::size_t k) {
  require(k >= 1, ErrorKind::InvalidInput, "ndcg: k must be >= 1");
  require(!relevant.empty(), ErrorKind::UndefinedMetric, "ndcg: empty relevant set");
  const auto rel = sorted_copy(relevant);
  double dcg = 0.0;
  const std::size_t cut = std::min(k, ranked.size());
  for (std::size_t p = 0; p < cut; ++p) {
    if (std::binary_search(rel.begin(), rel.end(), ranked[p])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(rel.size(), k);
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant,
                   std::size_t k) {
  require(k >= 1, ErrorKind::InvalidInput, "recall: k must be >= 1");
  require(!relevant.empty(), ErrorKind::UndefinedMetric, "recall: empty relevant set");
  const auto rel = sorted_copy(relevant);
  return static_cast<double>(hits(ranked, rel, k)) / static_cast<double>(rel.size());
}

double precision_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant,
                      std::size_t k) {
  require(k >= 1, ErrorKind::InvalidInput, "precision: k must be >= 1");
  const auto rel = sorted_copy(relevant);
  return static_cast<double>(hits(ranked, rel, k)) / static_cast<double>(k);
}

double cold_hit_reward(std::span<const RankedList> spy_lists, std::span<const char> cold_mask,
                       std::size_t k) {
  require(!spy_lists.empty(), ErrorKind::InvalidInput, "cold_hit_reward: no spy lists");
  require(k >= 1, ErrorKind::InvalidInput, "cold_hit_reward: k must be >= 1");
  double total = 0.0;
  for (const auto& list : spy_lists) {
    require(list.items.size() >= k, ErrorKind::InvalidInput,
            "cold_hit_reward: spy list shorter than k");
    std::size_t h = 0;
    for (std::size_t p = 0; p < k; ++p) {
      const auto item = list.items[p];
      if (item < cold_mask.size() && cold_mask[item]) ++h;
    }
    total += static_cast<double>(h) / static_cast<double>(k);
  }
  return total / static_cast<double>(spy_lists.size());
}

double MetricsReport::at(const std::string& metric, std::size_t k) const {
  auto it = values.find(key(metric.c_str(), k));
  require(it != values.end(), ErrorKind::InvalidInput, "report lacks " + metric);
  return it->second;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["label"] = label;
  j["users"] = users;
  j["values"] = values;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.label = j.at("label").get<std::string>();
  r.users = j.at("users").get<std::size_t>();
  r.values = j.at("values").get<std::map<std::string, double>>();
  return r;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "label,metric,k,value\n";
  out << std::setprecision(10);
  for (const char* metric : {"NDCG", "Recall", "Precision"}) {
    for (auto k : kReportCutoffs) {
      auto it = values.find(key(metric, k));
      if (it == values.end()) continue;
      out << label << ',' << metric << ',' << k << ',' << it->second << '\n';
    }
  }
  return out.str();
}

MetricsReport evaluate_rankings(const std::vector<std::vector<ItemId>>& rankings,
                                const std::vector<std::vector<ItemId>>& test_by_user,
                                const std::string& label) {
  MetricsReport report;
  report.label = label;
  std::map<std::string, double> sums;
  for (std::size_t u = 0; u < test_by_user.size() && u < rankings.size(); ++u) {
    const auto& rel = test_by_user[u];
    if (rel.empty()) continue;
    ++report.users;
    for (auto k : kReportCutoffs) {
      sums[key("NDCG", k)] += ndcg_at_k(rankings[u], rel, k);
      sums[key("Recall", k)] += recall_at_k(rankings[u], rel, k);
      sums[key("Precision", k)] += precision_at_k(rankings[u], rel, k);
    }
  }
  for (auto& [name, s] : sums) {
    report.values[name] = report.users ? s / static_cast<double>(report.users) : 0.0;
  }
  return report;
}

Improvement evaluate_attack(const MetricsReport& clean, const MetricsReport& attacked,
                            const MetricsReport& best_baseline) {
  Improvement imp;
  for (const auto& [name, clean_v] : clean.values) {
    auto a = attacked.values.find(name);
    auto b = best_baseline.values.find(name);
    require(a != attacked.values.end() && b != best_baseline.values.end(),
            ErrorKind::InvalidInput, "evaluate_attack: metric key mismatch on " + name);
    if (clean_v == 0.0) {
      imp.undefined.push_back(name);
    } else {
      imp.drop_vs_clean[name] = (clean_v - a->second) / clean_v;
    }
    if (b->second == 0.0) {
      imp.undefined.push_back(name + " (baseline)");
    } else {
      imp.gain_vs_baseline[name] = (b->second - a->second) / b->second;
    }
  }
  return imp;
}

}  // namespace sra
