#include <algorithm>
#include <limits>

#include "sra/community.hpp"
#include "sra/error.hpp"
#include "sra/kernels.hpp"

namespace sra {
namespace {

double objective(const EmbeddingTable& x, const Matrix& centres,
                 const std::vector<CommunityId>& assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) s += kernels::sqdist(x.row(i), centres.row(assign[i]));
  return s;
}

void recompute_centres(const EmbeddingTable& x, const std::vector<CommunityId>& assign,
                       Matrix& centres, std::vector<std::size_t>& counts) {
  std::fill(centres.data.begin(), centres.data.end(), 0.0);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    kernels::axpy(1.0, x.row(i), centres.row(assign[i]));
    ++counts[assign[i]];
  }
  for (std::size_t c = 0; c < centres.rows; ++c) {
    if (counts[c] > 0) kernels::scale(1.0 / static_cast<double>(counts[c]), centres.row(c));
  }
}

}  // namespace

CommunityPartition kmeans(const EmbeddingTable& points, std::size_t n_c, std::size_t max_iters,
                          std::uint64_t seed) {
  require(n_c >= 1, ErrorKind::InvalidInput, "kmeans: n_c must be >= 1");
  require(n_c <= points.rows, ErrorKind::InvalidInput, "kmeans: n_c exceeds the point count");
  const std::size_t n = points.rows;
  const std::size_t dim = points.cols;

  // Farthest-point seeding; ties go to the lowest id.
  auto rng = SeedStream(seed).child("kmeans").rng();
  Matrix centres(n_c, dim);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < n_c; ++c) {
    std::copy(points.row(pick).begin(), points.row(pick).end(), centres.row(c).begin());
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], kernels::sqdist(points.row(i), centres.row(c)));
      if (nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    }
  }

  CommunityPartition p;
  std::vector<CommunityId> assign(n, 0);
  std::vector<std::size_t> counts(n_c, 0);
  for (std::size_t it = 0; it == 0 || it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      CommunityId best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n_c; ++c) {
        const double d = kernels::sqdist(points.row(i), centres.row(c));
        if (d < bd) {
          bd = d;
          best = static_cast<CommunityId>(c);
        }
      }
      if (it == 0 || assign[i] != best) changed = true;
      assign[i] = best;
    }
    recompute_centres(points, assign, centres, counts);
    // Re-seed empty clusters with the point farthest from its own centroid.
    for (std::size_t c = 0; c < n_c; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far_i = 0;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;
        const double d = kernels::sqdist(points.row(i), centres.row(assign[i]));
        if (d > far) {
          far = d;
          far_i = i;
        }
      }
      if (far < 0.0) break;
      assign[far_i] = static_cast<CommunityId>(c);
      recompute_centres(points, assign, centres, counts);
      changed = true;
    }
    p.objective_trace.push_back(objective(points, centres, assign));
    if (!changed) break;
  }
  auto out = compact_partition(assign);
  out.objective_trace = std::move(p.objective_trace);
  return out;
}

PartitionResult partition_social(std::size_t users, const std::vector<Edge>& social,
                                 const PartitionConfig& config, std::uint64_t seed) {
  const SeedStream root(seed);
  PartitionResult r;
  r.louvain = louvain(users, social);
  const auto adj = adjacency(users, social);
  std::size_t edge_communities = 0;
  for (const auto& roster : r.louvain.rosters) {
    if (std::any_of(roster.begin(), roster.end(), [&](UserId u) { return !adj[u].empty(); })) {
      ++edge_communities;
    }
  }
  const auto corpus = random_walks(users, social, config.walks_per_node, config.walk_length,
                                   root.child("walks").seed());
  r.embeddings = skipgram_train(corpus, users, config.skipgram, root.child("skipgram").seed());
  r.partition = kmeans(r.embeddings, std::max<std::size_t>(1, edge_communities),
                       config.kmeans_iters, root.child("kmeans").seed());
  r.partition.modularity = modularity(users, social, r.partition.assignment);
  return r;
}

}  // namespace sra
