#include "sra/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sra/error.hpp"
#include "sra/rng.hpp"

namespace sra {
namespace {

// Cumulative table for repeated weighted draws.
class Sampler {
 public:
  Sampler() = default;
  explicit Sampler(const std::vector<double>& w) : cum_(w.size()) {
    std::partial_sum(w.begin(), w.end(), cum_.begin());
  }
  bool empty() const { return cum_.empty() || cum_.back() <= 0.0; }
  std::size_t draw(Rng& rng) const {
    const double t = rng.uniform() * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
    return std::min<std::size_t>(it - cum_.begin(), cum_.size() - 1);
  }

 private:
  std::vector<double> cum_;
};

}  // namespace

SynthConfig lastfm_analog() { return SynthConfig{}; }

Dataset synthesize(const SynthConfig& cfg, std::uint64_t seed) {
  require(cfg.users >= 2 && cfg.items >= 1 && cfg.communities >= 1, ErrorKind::InvalidConfig,
          "synth: degenerate sizes");
  require(cfg.interactions >= cfg.items && cfg.interactions <= cfg.users * cfg.items,
          ErrorKind::InvalidConfig, "synth: interaction count cannot cover every item");
  require(cfg.social_pairs >= cfg.users / 2 &&
              cfg.social_pairs <= cfg.users * (cfg.users - 1) / 2,
          ErrorKind::InvalidConfig, "synth: social pair count out of range");
  const SeedStream root(seed);
  const std::size_t n = cfg.users;
  const std::size_t m = cfg.items;
  const std::size_t k = std::min(cfg.communities, n);

  // Community sizes follow a power law, each at least 2 members.
  std::vector<double> cw(k);
  for (std::size_t c = 0; c < k; ++c) cw[c] = std::pow(static_cast<double>(c + 2), -cfg.community_size_skew);
  const double cw_sum = std::accumulate(cw.begin(), cw.end(), 0.0);
  std::vector<std::size_t> sizes(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    sizes[c] = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(cw[c] / cw_sum * n)));
    assigned += sizes[c];
  }
  for (std::size_t c = 0; assigned < n; c = (c + 1) % k, ++assigned) ++sizes[c];
  for (std::size_t c = k; assigned > n; --assigned) {
    c = (c == 0 ? k : c) - 1;
    while (sizes[c] <= 2) c = (c == 0 ? k : c) - 1;
    --sizes[c];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng assign_rng = root.child("assign").rng();
  assign_rng.shuffle(order);
  std::vector<std::uint32_t> community(n);
  std::vector<std::vector<std::uint32_t>> roster(k);
  for (std::size_t c = 0, pos = 0; c < k; ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i, ++pos) {
      community[order[pos]] = static_cast<std::uint32_t>(c);
      roster[c].push_back(order[pos]);
    }
  }
  for (auto& r : roster) std::sort(r.begin(), r.end());

  // Social graph: lognormal degree propensities, mostly intra-community.
  Rng soc_rng = root.child("social").rng();
  std::vector<double> theta(n);
  for (auto& t : theta) t = std::exp(cfg.degree_sigma * soc_rng.normal());
  const Sampler global_user(theta);
  std::vector<Sampler> comm_user(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> w;
    for (auto u : roster[c]) w.push_back(theta[u]);
    comm_user[c] = Sampler(w);
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  auto add_pair = [&pairs](std::uint32_t a, std::uint32_t b) {
    if (a == b) return false;
    return pairs.insert({std::min(a, b), std::max(a, b)}).second;
  };
  std::vector<char> has_friend(n, 0);
  for (std::uint32_t u = 0; u < n; ++u) {
    if (has_friend[u]) continue;
    const auto& r = roster[community[u]];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const std::uint32_t v = r[comm_user[community[u]].draw(soc_rng)];
      if (add_pair(u, v)) {
        has_friend[u] = has_friend[v] = 1;
        break;
      }
    }
    if (!has_friend[u]) {
      for (std::uint32_t v = 0; !has_friend[u]; ++v) {
        if (add_pair(u, v)) has_friend[u] = has_friend[v] = 1;
      }
    }
  }
  while (pairs.size() < cfg.social_pairs) {
    const auto u = static_cast<std::uint32_t>(global_user.draw(soc_rng));
    std::uint32_t v;
    if (soc_rng.uniform() < cfg.intra_social) {
      v = roster[community[u]][comm_user[community[u]].draw(soc_rng)];
    } else {
      v = static_cast<std::uint32_t>(global_user.draw(soc_rng));
    }
    add_pair(u, v);
  }

  // Items: a genre per item aligned with communities, global Zipf popularity.
  Rng item_rng = root.child("items").rng();
  std::vector<std::uint32_t> genre(m);
  {
    std::vector<double> gw(sizes.begin(), sizes.end());
    const Sampler gs(gw);
    for (auto& g : genre) g = static_cast<std::uint32_t>(gs.draw(item_rng));
  }
  std::vector<std::size_t> rank(m);
  std::iota(rank.begin(), rank.end(), 0);
  item_rng.shuffle(rank);
  std::vector<double> pop(m);
  for (std::size_t i = 0; i < m; ++i) {
    pop[i] = std::pow(static_cast<double>(rank[i]) + cfg.zipf_offset, -cfg.zipf_exponent);
  }
  std::vector<std::vector<std::uint32_t>> genre_items(k);
  for (std::uint32_t i = 0; i < m; ++i) genre_items[genre[i]].push_back(i);
  std::vector<Sampler> genre_sampler(k);
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<double> w;
    for (auto i : genre_items[g]) w.push_back(pop[i]);
    genre_sampler[g] = Sampler(w);
  }
  const Sampler global_item(pop);

  // Interactions: near-uniform profile lengths summing exactly to the target.
  Rng int_rng = root.child("interactions").rng();
  std::vector<std::size_t> length(n, cfg.interactions / n);
  {
    std::vector<std::uint32_t> extra(n);
    std::iota(extra.begin(), extra.end(), 0);
    int_rng.shuffle(extra);
    for (std::size_t i = 0; i < cfg.interactions % n; ++i) ++length[extra[i]];
  }
  std::vector<std::set<std::uint32_t>> profile(n);
  std::vector<std::size_t> count(m, 0);
  for (std::uint32_t u = 0; u < n; ++u) {
    const std::uint32_t home = community[u];
    auto secondary = static_cast<std::uint32_t>(int_rng.index(k));
    if (secondary == home && k > 1) secondary = (secondary + 1) % k;
    const std::size_t want = std::min(length[u], m);
    std::size_t guard = 0;
    while (profile[u].size() < want) {
      const double r = int_rng.uniform();
      std::uint32_t item;
      const std::uint32_t g = r < cfg.home_taste ? home : secondary;
      if ((r >= cfg.home_taste && r < cfg.home_taste + cfg.global_taste) ||
          genre_sampler[g].empty() || ++guard > 50 * want) {
        item = static_cast<std::uint32_t>(global_item.draw(int_rng));
      } else {
        item = genre_items[g][genre_sampler[g].draw(int_rng)];
      }
      if (profile[u].insert(item).second) ++count[item];
    }
  }

  // Every item must be observed: hand uncovered items to a member of the
  // genre community, displacing one of that member's multiply-held items.
  for (std::uint32_t i = 0; i < m; ++i) {
    if (count[i] > 0) continue;
    const auto& r = roster[genre[i]];
    for (;;) {
      const std::uint32_t u = r[int_rng.index(r.size())];
      if (profile[u].count(i)) continue;
      std::vector<std::uint32_t> movable;
      for (auto j : profile[u]) {
        if (count[j] >= 2) movable.push_back(j);
      }
      if (movable.empty()) continue;
      const std::uint32_t drop = movable[int_rng.index(movable.size())];
      profile[u].erase(drop);
      --count[drop];
      profile[u].insert(i);
      ++count[i];
      break;
    }
  }

  std::vector<Edge> inter;
  inter.reserve(cfg.interactions);
  for (std::uint32_t u = 0; u < n; ++u) {
    for (auto i : profile[u]) inter.push_back({u, i});
  }
  std::vector<Edge> soc;
  soc.reserve(pairs.size());
  for (const auto& [a, b] : pairs) soc.push_back({a, b});
  return make_dataset(n, m, std::move(inter), std::move(soc));
}

}  // namespace sra
