#include <set>

#include "helpers.hpp"

using namespace sra;
using doctest::Approx;

namespace {

std::vector<Edge> undirected(const std::vector<std::pair<UserId, UserId>>& pairs) {
  std::vector<Edge> e;
  for (auto [a, b] : pairs) {
    e.push_back({a, b});
    e.push_back({b, a});
  }
  std::sort(e.begin(), e.end());
  return e;
}

}  // namespace

TEST_CASE("Louvain on two disjoint triangles") {
  const auto g = undirected({{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const auto p = louvain(6, g);
  CHECK(p.n_c == 2);
  CHECK(p.modularity == Approx(0.5).epsilon(1e-12));
  CHECK(p.assignment[0] == p.assignment[1]);
  CHECK(p.assignment[1] == p.assignment[2]);
  CHECK(p.assignment[3] == p.assignment[4]);
  CHECK(p.assignment[0] != p.assignment[3]);
  CHECK(modularity(6, g, std::vector<CommunityId>(6, 0)) == 0.0);
}

TEST_CASE("Louvain recovers planted communities and is a valid partition") {
  const Dataset ds = synthesize(test::tiny_synth(), 1);
  const auto p = louvain(ds.user_count, ds.social);
  CHECK(p.modularity > 0.3);
  std::size_t listed = 0;
  for (std::size_t c = 0; c < p.rosters.size(); ++c) {
    listed += p.rosters[c].size();
    for (auto u : p.rosters[c]) CHECK(p.assignment[u] == c);
  }
  CHECK(listed == ds.user_count);
  CHECK(p.modularity == Approx(modularity(ds.user_count, ds.social, p.assignment)));
}

TEST_CASE("k-means objective never increases") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng.index(40);
    const std::size_t dim = 1 + rng.index(4);
    const auto pts = random_table(n, dim, 1.0, rng);
    const std::size_t k = 1 + rng.index(5);
    const auto p = kmeans(pts, k, 50, trial);
    for (std::size_t i = 1; i < p.objective_trace.size(); ++i) {
      CHECK(p.objective_trace[i] <= p.objective_trace[i - 1] + 1e-12);
    }
    CHECK(p.assignment.size() == n);
  }
}

TEST_CASE("random walks follow edges and are reproducible") {
  const auto g = undirected({{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}});
  const auto a = random_walks(7, g, 3, 6, 9);
  const auto b = random_walks(7, g, 3, 6, 9);
  CHECK(a.walks == b.walks);
  const auto adj = adjacency(7, g);
  for (const auto& w : a.walks) {
    for (std::size_t i = 1; i < w.size(); ++i) {
      CHECK(std::binary_search(adj[w[i - 1]].begin(), adj[w[i - 1]].end(), w[i]));
    }
  }
}

TEST_CASE("skip-gram places walk neighbours closer than strangers") {
  const auto g = undirected({{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const auto corpus = random_walks(6, g, 40, 20, 1);
  SkipGramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  const auto emb = skipgram_train(corpus, 6, cfg, 2);
  auto cos = [&](std::size_t a, std::size_t b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < emb.cols; ++k) {
      d += emb(a, k) * emb(b, k);
      na += emb(a, k) * emb(a, k);
      nb += emb(b, k) * emb(b, k);
    }
    return d / std::sqrt(na * nb);
  };
  CHECK(cos(0, 1) > cos(0, 4));
  CHECK(cos(3, 5) > cos(2, 5));
}

TEST_CASE("compact partition renumbers by first appearance") {
  const auto p = compact_partition({7, 7, 2, 9, 2});
  CHECK(p.assignment == std::vector<CommunityId>{0, 0, 1, 2, 1});
  CHECK(p.rosters[1] == std::vector<UserId>{2, 4});
}
