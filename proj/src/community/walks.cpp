#include <algorithm>
#include <cmath>

#include "sra/community.hpp"
#include "sra/error.hpp"
#include "sra/kernels.hpp"

namespace sra {

std::vector<std::vector<UserId>> adjacency(std::size_t users, const std::vector<Edge>& edges) {
  std::vector<std::vector<UserId>> adj(users);
  for (const auto& e : edges) {
    require(e.a < users && e.b < users, ErrorKind::InvalidInput, "adjacency: id out of range");
    if (e.a == e.b) continue;
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& l : adj) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return adj;
}

WalkCorpus random_walks(std::size_t users, const std::vector<Edge>& social,
                        std::size_t walks_per_node, std::size_t length, std::uint64_t seed) {
  require(length >= 1, ErrorKind::InvalidInput, "random_walks: length must be >= 1");
  const auto adj = adjacency(users, social);
  WalkCorpus c;
  c.walk_length = length;
  c.walks_per_node = walks_per_node;
  c.walks.reserve(users * walks_per_node);
  const SeedStream root = SeedStream(seed).child("walks");
  for (std::size_t r = 0; r < walks_per_node; ++r) {
    for (std::size_t v = 0; v < users; ++v) {
      auto rng = root.child(v).child(r).rng();
      std::vector<UserId> walk{static_cast<UserId>(v)};
      if (!adj[v].empty()) {
        while (walk.size() < length) {
          const auto& nb = adj[walk.back()];
          walk.push_back(nb[rng.index(nb.size())]);
        }
      }
      c.walks.push_back(std::move(walk));
    }
  }
  return c;
}

EmbeddingTable skipgram_train(const WalkCorpus& corpus, std::size_t nodes,
                              const SkipGramConfig& config, std::uint64_t seed) {
  require(!corpus.walks.empty(), ErrorKind::InvalidInput, "skipgram: empty corpus");
  require(config.window >= 1, ErrorKind::InvalidInput, "skipgram: window must be >= 1");
  require(config.dim >= 1 && nodes >= 1, ErrorKind::InvalidInput, "skipgram: empty shape");
  const std::size_t dim = config.dim;
  auto rng = SeedStream(seed).child("skipgram").rng();
  EmbeddingTable emb(nodes, dim);
  for (auto& v : emb.data) v = (rng.uniform() - 0.5) / static_cast<double>(dim);
  EmbeddingTable ctx(nodes, dim);
  if (config.epochs == 0) return emb;

  std::size_t pairs_per_epoch = 0;
  for (const auto& w : corpus.walks) {
    for (std::size_t p = 0; p < w.size(); ++p) {
      const std::size_t lo = p >= config.window ? p - config.window : 0;
      const std::size_t hi = std::min(w.size(), p + config.window + 1);
      pairs_per_epoch += hi - lo - 1;
    }
  }
  require(pairs_per_epoch > 0, ErrorKind::InvalidInput, "skipgram: corpus yields no pairs");
  const double total = static_cast<double>(pairs_per_epoch * config.epochs);
  const auto& kt = kernels::active();
  std::vector<double> grad(dim);
  std::size_t done = 0;

  auto update = [&](UserId center, UserId target, double label, double lr) {
    double* e = emb.row(center).data();
    double* c = ctx.row(target).data();
    const double x = kt.dot(e, c, dim);
    const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    const double g = lr * (label - sig);
    kt.axpy(g, c, grad.data(), dim);
    kt.axpy(g, e, c, dim);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& w : corpus.walks) {
      for (std::size_t p = 0; p < w.size(); ++p) {
        const std::size_t lo = p >= config.window ? p - config.window : 0;
        const std::size_t hi = std::min(w.size(), p + config.window + 1);
        for (std::size_t q = lo; q < hi; ++q) {
          if (q == p) continue;
          const double lr = std::max(config.lr * 1e-4,
                                     config.lr * (1.0 - static_cast<double>(done) / total));
          ++done;
          std::fill(grad.begin(), grad.end(), 0.0);
          update(w[p], w[q], 1.0, lr);
          for (std::size_t k = 0; k < config.negatives; ++k) {
            const auto neg = static_cast<UserId>(rng.index(nodes));
            if (neg == w[q]) continue;
            update(w[p], neg, 0.0, lr);
          }
          kt.axpy(1.0, grad.data(), emb.row(w[p]).data(), dim);
        }
      }
    }
  }
  return emb;
}

}  // namespace sra
