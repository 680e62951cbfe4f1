#include <algorithm>
#include <chrono>

#include "sra/attack.hpp"
#include "sra/error.hpp"

namespace sra {

std::pair<UserId, UserId> random_cross_pair(const ActionSpace& space, std::size_t users,
                                            Rng& rng) {
  std::vector<UserId> eligible;
  for (std::size_t u = 0; u < users; ++u) {
    if (space.roster_position(static_cast<UserId>(u)) >= 0) eligible.push_back(static_cast<UserId>(u));
  }
  require(eligible.size() >= 2, ErrorKind::ConstraintInfeasible,
          "random pair: fewer than two eligible users");
  const auto& assign = space.partition.assignment;
  const UserId a = eligible[rng.index(eligible.size())];
  auto ok = [&](UserId b) {
    return b != a && (!space.cross_community || assign[b] != assign[a]);
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const UserId b = eligible[rng.index(eligible.size())];
    if (ok(b)) return {a, b};
  }
  std::vector<UserId> rest;
  for (auto b : eligible) {
    if (ok(b)) rest.push_back(b);
  }
  require(!rest.empty(), ErrorKind::ConstraintInfeasible,
          "random pair: every eligible user shares the first member's community");
  return {a, rest[rng.index(rest.size())]};
}

AttackResult run_baseline(const AttackConfig& config, const AttackEnv& env) {
  require(!is_learned(config.strategy), ErrorKind::InvalidConfig,
          std::string("run_baseline: ") + to_string(config.strategy) + " is a learned strategy");
  const auto start = std::chrono::steady_clock::now();
  const auto& ds = *env.dataset;
  const std::size_t n = ds.user_count;
  const std::size_t horizon = config.budget.profile_length;

  std::vector<ItemId> items;
  switch (config.strategy) {
    case Strategy::Cold: items = env.cold.items; break;
    case Strategy::Pop: items = popular_pool(env.popularity, config.popular_k).items; break;
    default:
      items.resize(ds.item_count);
      for (std::size_t i = 0; i < ds.item_count; ++i) items[i] = static_cast<ItemId>(i);
  }
  require(!items.empty(), ErrorKind::InvalidConfig, "baseline: empty item pool");

  std::vector<UserId> excluded = env.spies.users;
  if (config.strategy == Strategy::Degree) {
    const auto friends = ds.friends();
    std::size_t kept = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (friends[u].size() > config.degree_threshold) {
        ++kept;
      } else {
        excluded.push_back(static_cast<UserId>(u));
      }
    }
    require(kept > 0, ErrorKind::InvalidConfig,
            "degree baseline: no user has degree above " + std::to_string(config.degree_threshold));
  }
  auto space = make_action_space(env.partition, {}, ds.item_count, excluded);

  AttackResult result;
  result.strategy = to_string(config.strategy);
  result.seed = config.seed;
  result.before = evaluate_view(env.target->view(), *env.split, n, "clean");
  const SeedStream root = SeedStream(config.seed).child("baseline").child(result.strategy);
  for (std::size_t f = 0; f < config.budget.max_fake_users; ++f) {
    auto rng = root.child(f).rng();
    FakeUser fake;
    std::vector<ItemId> drawn;
    for (std::size_t t = 0; t < horizon; ++t) {
      drawn.push_back(items[rng.index(items.size())]);
      fake.pairs.push_back(random_cross_pair(space, n, rng));
    }
    fake.items = clip_profile(drawn);
    result.fakes.push_back(std::move(fake));
  }
  result.after = evaluate_fakes(config, env, result.fakes, result.strategy);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace sra
