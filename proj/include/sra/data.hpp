#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace sra {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Implicit-feedback interactions plus an undirected social graph, both over
/// dense ids. Social relations are stored as symmetric directed arcs, so a
/// friendship contributes two entries.
struct Dataset {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::vector<Edge> interactions;  // (user, item), sorted, unique
  std::vector<Edge> social;        // (user, user), sorted, unique, symmetric, no self loops
  std::vector<std::int64_t> user_original;
  std::vector<std::int64_t> item_original;

  std::size_t undirected_social_count() const { return social.size() / 2; }
  std::vector<std::size_t> popularity() const;
  std::vector<std::vector<UserId>> friends() const;
  nlohmann::json summary() const;
  /// Order-sensitive FNV digest over ids and edges.
  std::string digest() const;
};

struct Split {
  std::vector<Edge> train;
  std::vector<Edge> test;
  std::vector<std::vector<ItemId>> train_by_user;  // sorted
  std::vector<std::vector<ItemId>> test_by_user;   // sorted

  std::vector<std::size_t> train_popularity(std::size_t item_count) const;
};

struct ItemPool {
  std::vector<ItemId> items;
  std::string rule;

  std::vector<char> mask(std::size_t item_count) const;
  bool empty() const { return items.empty(); }
};

struct SpySet {
  std::vector<UserId> users;
  std::size_t size() const { return users.size(); }
};

Dataset load_dataset(std::istream& interactions, std::istream& social);
Dataset load_dataset_files(const std::filesystem::path& interactions,
                           const std::filesystem::path& social);

/// Builds a dataset from already-dense ids; deduplicates and symmetrizes.
Dataset make_dataset(std::size_t users, std::size_t items, std::vector<Edge> interactions,
                     std::vector<Edge> social);

Split split_interactions(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// floor(quantile * m) least-popular items, ascending popularity then id.
ItemPool cold_start_pool(const std::vector<std::size_t>& counts, double quantile);
/// top_k most-popular items, descending popularity then ascending id.
ItemPool popular_pool(const std::vector<std::size_t>& counts, std::size_t top_k);
SpySet select_spies(const Dataset& dataset, std::size_t count, std::uint64_t seed);

/// Writes `user item` / `user user` lines over dense ids (social arcs both ways).
void write_interactions(std::ostream& out, const Dataset& dataset);
void write_social(std::ostream& out, const Dataset& dataset);
void write_dataset_files(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace sra
