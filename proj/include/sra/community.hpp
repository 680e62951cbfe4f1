#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sra/data.hpp"
#include "sra/gradcore.hpp"

namespace sra {

using CommunityId = std::uint32_t;

/// Sorted, deduplicated, symmetric neighbour lists; self loops dropped.
std::vector<std::vector<UserId>> adjacency(std::size_t users, const std::vector<Edge>& edges);

struct WalkCorpus {
  std::vector<std::vector<UserId>> walks;
  std::size_t walk_length = 0;
  std::size_t walks_per_node = 0;
};

/// Walk r of node v draws from its own stream (seed, v, r); the corpus is
/// ordered by round, then start node.
WalkCorpus random_walks(std::size_t users, const std::vector<Edge>& social,
                        std::size_t walks_per_node, std::size_t length, std::uint64_t seed);

struct SkipGramConfig {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 1;
  double lr = 0.025;
};

/// Skip-gram with uniform negative sampling; the learning rate decays
/// linearly over all updates.
EmbeddingTable skipgram_train(const WalkCorpus& corpus, std::size_t nodes,
                              const SkipGramConfig& config, std::uint64_t seed);

struct CommunityPartition {
  std::vector<CommunityId> assignment;       // user -> community
  std::vector<std::vector<UserId>> rosters;  // community -> users, ascending
  std::size_t n_c = 0;
  double modularity = 0.0;
  std::vector<double> objective_trace;  // k-means objective per iteration

  std::size_t users() const { return assignment.size(); }
  nlohmann::json to_json() const;
};

/// Newman modularity of `assignment` on the undirected graph.
double modularity(std::size_t users, const std::vector<Edge>& social,
                  const std::vector<CommunityId>& assignment);

/// Multi-level greedy modularity optimization from singletons; nodes are
/// visited in ascending id order and moved only on strictly positive gain.
/// n_c counts communities that contain at least one edge.
CommunityPartition louvain(std::size_t users, const std::vector<Edge>& social);

/// Lloyd iterations from farthest-point seeding.
CommunityPartition kmeans(const EmbeddingTable& points, std::size_t n_c, std::size_t max_iters,
                          std::uint64_t seed);

struct PartitionConfig {
  SkipGramConfig skipgram;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::size_t kmeans_iters = 100;
};

struct PartitionResult {
  CommunityPartition partition;  // k-means assignment, modularity on the social graph
  CommunityPartition louvain;
  EmbeddingTable embeddings;
};

PartitionResult partition_social(std::size_t users, const std::vector<Edge>& social,
                                 const PartitionConfig& config, std::uint64_t seed);

/// Rebuilds rosters/n_c from a raw assignment, renumbering communities by
/// first appearance in ascending user order.
CommunityPartition compact_partition(const std::vector<CommunityId>& raw);

}  // namespace sra
