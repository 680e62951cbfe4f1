#include <algorithm>
#include <map>

#include "sra/community.hpp"
#include "sra/error.hpp"

namespace sra {

nlohmann::json CommunityPartition::to_json() const {
  nlohmann::json assign = nlohmann::json::object();
  for (std::size_t u = 0; u < assignment.size(); ++u) assign[std::to_string(u)] = assignment[u];
  std::vector<std::size_t> sizes;
  for (const auto& r : rosters) sizes.push_back(r.size());
  return {{"assignment", assign},
          {"summary", {{"n_c", n_c}, {"modularity", modularity}, {"roster_sizes", sizes}}}};
}

CommunityPartition compact_partition(const std::vector<CommunityId>& raw) {
  CommunityPartition p;
  p.assignment.resize(raw.size());
  std::map<CommunityId, CommunityId> rename;
  for (std::size_t u = 0; u < raw.size(); ++u) {
    auto [it, fresh] = rename.emplace(raw[u], static_cast<CommunityId>(rename.size()));
    if (fresh) p.rosters.emplace_back();
    p.assignment[u] = it->second;
    p.rosters[it->second].push_back(static_cast<UserId>(u));
  }
  p.n_c = p.rosters.size();
  return p;
}

double modularity(std::size_t users, const std::vector<Edge>& social,
                  const std::vector<CommunityId>& assignment) {
  require(assignment.size() == users, ErrorKind::InvalidInput,
          "modularity: assignment does not cover the users");
  const auto adj = adjacency(users, social);
  double two_m = 0.0;
  std::map<CommunityId, double> internal;  // arcs inside each community
  std::map<CommunityId, double> degree;
  for (std::size_t u = 0; u < users; ++u) {
    two_m += static_cast<double>(adj[u].size());
    degree[assignment[u]] += static_cast<double>(adj[u].size());
    for (auto v : adj[u]) {
      if (assignment[v] == assignment[u]) internal[assignment[u]] += 1.0;
    }
  }
  require(two_m > 0.0, ErrorKind::InvalidInput, "modularity: graph has no edges");
  double q = 0.0;
  for (const auto& [c, d] : degree) {
    q += internal[c] / two_m - (d / two_m) * (d / two_m);
  }
  return q;
}

namespace {

struct WeightedGraph {
  // adj[i] = (neighbour, weight) with a self entry carrying A_ii.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<double> k;
  double two_m = 0.0;
};

// One level of local moving; returns true if any node moved.
bool local_moves(const WeightedGraph& g, std::vector<std::uint32_t>& comm) {
  const std::size_t n = g.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += g.k[i];
  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  bool any = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto own = comm[i];
      touched.clear();
      for (const auto& [j, w] : g.adj[i]) {
        if (j == i) continue;
        if (link[comm[j]] == 0.0) touched.push_back(comm[j]);
        link[comm[j]] += w;
      }
      tot[own] -= g.k[i];
      const double ki = g.k[i];
      auto gain = [&](std::uint32_t c) { return link[c] - tot[c] * ki / g.two_m; };
      std::uint32_t best = own;
      double best_gain = gain(own);
      std::sort(touched.begin(), touched.end());
      for (auto c : touched) {
        const double gc = gain(c);
        if (gc > best_gain) {
          best_gain = gc;
          best = c;
        }
      }
      tot[best] += ki;
      if (best != own) {
        comm[i] = best;
        moved = true;
        any = true;
      }
      for (auto c : touched) link[c] = 0.0;
      link[own] = 0.0;
    }
  }
  return any;
}

}  // namespace

CommunityPartition louvain(std::size_t users, const std::vector<Edge>& social) {
  const auto base_adj = adjacency(users, social);
  WeightedGraph g;
  g.adj.resize(users);
  g.k.assign(users, 0.0);
  for (std::size_t u = 0; u < users; ++u) {
    for (auto v : base_adj[u]) g.adj[u].emplace_back(v, 1.0);
    g.k[u] = static_cast<double>(base_adj[u].size());
    g.two_m += g.k[u];
  }
  require(g.two_m > 0.0, ErrorKind::InvalidInput, "louvain: graph has no edges");

  std::vector<std::uint32_t> node_of(users);  // original node -> current level node
  for (std::size_t u = 0; u < users; ++u) node_of[u] = static_cast<std::uint32_t>(u);

  while (true) {
    const std::size_t n = g.adj.size();
    std::vector<std::uint32_t> comm(n);
    for (std::size_t i = 0; i < n; ++i) comm[i] = static_cast<std::uint32_t>(i);
    if (!local_moves(g, comm)) break;
    // Renumber communities densely in order of first appearance.
    std::vector<std::int64_t> dense(n, -1);
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dense[comm[i]] < 0) dense[comm[i]] = next++;
    }
    for (auto& x : node_of) x = static_cast<std::uint32_t>(dense[comm[x]]);
    WeightedGraph h;
    h.adj.resize(next);
    h.k.assign(next, 0.0);
    h.two_m = g.two_m;
    std::vector<std::map<std::uint32_t, double>> agg(next);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ci = static_cast<std::uint32_t>(dense[comm[i]]);
      h.k[ci] += g.k[i];
      for (const auto& [j, w] : g.adj[i]) agg[ci][static_cast<std::uint32_t>(dense[comm[j]])] += w;
    }
    for (std::uint32_t c = 0; c < next; ++c) {
      h.adj[c].assign(agg[c].begin(), agg[c].end());
    }
    g = std::move(h);
  }
  std::vector<CommunityId> raw(node_of.begin(), node_of.end());
  auto p = compact_partition(raw);
  p.modularity = modularity(users, social, p.assignment);
  return p;
}

}  // namespace sra
