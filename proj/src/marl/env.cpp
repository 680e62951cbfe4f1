#include <algorithm>
#include <ostream>

#include "sra/error.hpp"
#include "sra/kernels.hpp"
#include "sra/marl.hpp"
#include "sra/metrics.hpp"

namespace sra {

const char* to_string(AgentRole role) {
  switch (role) {
    case AgentRole::Social1: return "social-1";
    case AgentRole::Social2: return "social-2";
    case AgentRole::Item: return "item";
  }
  return "?";
}

std::vector<UserId> AttackState::social_ids() const {
  std::vector<UserId> ids;
  ids.reserve(pairs.size() * 2);
  for (const auto& [a, b] : pairs) {
    ids.push_back(a);
    ids.push_back(b);
  }
  return ids;
}

std::vector<double> IdEncoder::pool(std::span<const std::uint32_t> ids) const {
  std::vector<double> out(table.cols, 0.0);
  if (ids.empty()) return out;
  const double s = 1.0 / static_cast<double>(ids.size());
  for (auto id : ids) {
    require(id < table.rows, ErrorKind::InvalidInput, "IdEncoder: id out of range");
    kernels::axpy(s, table.row(id), out);
  }
  return out;
}

void IdEncoder::backward(std::span<const std::uint32_t> ids, std::span<const double> grad,
                         Matrix& table_grad) const {
  if (ids.empty()) return;
  const double s = 1.0 / static_cast<double>(ids.size());
  for (auto id : ids) kernels::axpy(s, grad.first(table.cols), table_grad.row(id));
}

Observation observe(const AttackState& state, AgentRole role, const IdEncoder& encoder) {
  Observation o;
  o.role = role;
  if (role == AgentRole::Item) {
    o.features = encoder.pool(state.items);
  } else {
    const auto ids = state.social_ids();
    o.features = encoder.pool(ids);
  }
  o.features.push_back(state.horizon == 0 ? 0.0
                                          : static_cast<double>(state.t) /
                                                static_cast<double>(state.horizon));
  return o;
}

// ---------------------------------------------------------------------------

std::size_t ActionSpace::max_roster() const {
  std::size_t m = 0;
  for (const auto& r : partition.rosters) m = std::max(m, r.size());
  return m;
}

std::int64_t ActionSpace::roster_position(UserId u) const {
  if (u >= partition.assignment.size()) return -1;
  const auto& r = partition.rosters[partition.assignment[u]];
  auto it = std::lower_bound(r.begin(), r.end(), u);
  if (it == r.end() || *it != u) return -1;
  return it - r.begin();
}

nlohmann::json ActionSpace::size_diagnostics(std::size_t users, std::size_t items) const {
  const std::size_t social = community_count() * max_roster();
  return {{"item_agent_actions", item_pool.size()},
          {"item_count", items},
          {"social_agent_actions", social},
          {"user_pairs", users * users},
          {"n_c", community_count()},
          {"max_roster", max_roster()}};
}

ActionSpace make_action_space(const CommunityPartition& partition, std::vector<ItemId> pool,
                              std::size_t item_count, std::span<const UserId> excluded,
                              std::size_t roster_cap, std::span<const std::size_t> degree) {
  require(!partition.rosters.empty(), ErrorKind::InvalidInput, "action space: empty partition");
  require(roster_cap == 0 || degree.size() == partition.assignment.size(), ErrorKind::InvalidInput,
          "action space: a roster cap needs every user's degree");
  ActionSpace s;
  s.partition = partition;
  std::vector<char> drop(partition.assignment.size(), 0);
  for (auto u : excluded) {
    if (u < drop.size()) drop[u] = 1;
  }
  for (auto& roster : s.partition.rosters) {
    std::erase_if(roster, [&](UserId u) { return drop[u] != 0; });
    if (roster_cap > 0 && roster.size() > roster_cap) {
      std::stable_sort(roster.begin(), roster.end(),
                       [&](UserId a, UserId b) { return degree[a] > degree[b]; });
      roster.resize(roster_cap);
    }
    std::sort(roster.begin(), roster.end());
  }
  s.item_slot.assign(item_count, -1);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    require(pool[k] < item_count, ErrorKind::InvalidInput, "action space: pool item out of range");
    require(s.item_slot[pool[k]] < 0, ErrorKind::InvalidInput, "action space: duplicate pool item");
    s.item_slot[pool[k]] = static_cast<std::int32_t>(k);
  }
  s.item_pool = std::move(pool);
  return s;
}

std::vector<ItemId> clip_profile(std::span<const ItemId> items) {
  std::vector<ItemId> out;
  out.reserve(items.size());
  for (auto i : items) {
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

AttackState env_step(const AttackState& state, const JointAction& action,
                     const ActionSpace& space) {
  require(state.t < state.horizon, ErrorKind::EpisodeFinished,
          "env_step: the profile already has T steps");
  const std::size_t nc = space.community_count();
  require(action.c1 < nc && action.c2 < nc, ErrorKind::InvalidAction,
          "env_step: community out of range");
  require(!space.cross_community || action.c1 != action.c2, ErrorKind::InvalidAction,
          "env_step: both pair members come from one community");
  for (auto [u, c] : {std::pair{action.u1, action.c1}, std::pair{action.u2, action.c2}}) {
    require(space.roster_position(u) >= 0 && space.partition.assignment[u] == c,
            ErrorKind::InvalidAction, "env_step: user is not in the chosen community's roster");
  }
  require(action.u1 != action.u2, ErrorKind::InvalidAction, "env_step: pair repeats a user");
  require(action.item < space.item_slot.size() && space.item_slot[action.item] >= 0,
          ErrorKind::InvalidAction, "env_step: item outside the pool");
  AttackState next = state;
  next.pairs.emplace_back(action.u1, action.u2);
  next.items.push_back(action.item);
  next.items = clip_profile(next.items);
  ++next.t;
  return next;
}

std::optional<double> query_reward(const RecModel& model, std::span<const FakeUser> fakes,
                                   const SpySet& spies, std::span<const char> cold_mask,
                                   const std::vector<std::vector<ItemId>>& exclude,
                                   std::size_t k, std::size_t cadence) {
  require(cadence >= 1, ErrorKind::InvalidInput, "query_reward: cadence must be >= 1");
  if (fakes.empty() || fakes.size() % cadence != 0) return std::nullopt;
  const ScoreView view = inject_evasion(model, fakes);
  std::vector<RankedList> lists;
  lists.reserve(spies.size());
  for (auto u : spies.users) {
    std::span<const ItemId> ex;
    if (u < exclude.size()) ex = exclude[u];
    lists.push_back(view.topk(u, k, ex));
  }
  return cold_hit_reward(lists, cold_mask, k);
}

void write_jsonl(std::ostream& out, const nlohmann::json& record) {
  out << record.dump() << '\n';
}

}  // namespace sra
