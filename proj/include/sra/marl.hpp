#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sra/community.hpp"
#include "sra/data.hpp"
#include "sra/gradcore.hpp"
#include "sra/recenv.hpp"

namespace sra {

enum class AgentRole { Social1, Social2, Item };
const char* to_string(AgentRole role);

/// The fake user under construction.
struct AttackState {
  std::vector<ItemId> items;                     // P_t
  std::vector<std::pair<UserId, UserId>> pairs;  // S_t
  std::size_t t = 0;
  std::size_t horizon = 30;
  std::size_t fake_index = 0;

  std::vector<UserId> social_ids() const;
  FakeUser to_fake() const { return {items, pairs}; }
};

/// Trainable id-embedding table read through a mean pool.
struct IdEncoder {
  EmbeddingTable table;

  std::size_t dim() const { return table.cols; }
  /// Mean of the rows for `ids`; zero for an empty list.
  std::vector<double> pool(std::span<const std::uint32_t> ids) const;
  /// Adds d pool / d table contracted with `grad` into `table_grad`.
  void backward(std::span<const std::uint32_t> ids, std::span<const double> grad,
                Matrix& table_grad) const;
};

struct Observation {
  AgentRole role = AgentRole::Item;
  std::vector<double> features;  // pooled profile, then t/T
};

/// Social roles pool S_t through `encoder`, the item role pools P_t.
Observation observe(const AttackState& state, AgentRole role, const IdEncoder& encoder);

// ---------------------------------------------------------------------------
// Action space

/// What the agents may pick from. Rosters are sorted; a roster may be empty
/// (every member excluded), in which case its community is never chosen.
struct ActionSpace {
  CommunityPartition partition;
  std::vector<ItemId> item_pool;
  std::vector<std::int32_t> item_slot;  // item id -> pool position or -1
  bool cross_community = true;

  std::size_t max_roster() const;
  std::size_t community_count() const { return partition.rosters.size(); }
  /// Position of `u` in its community's roster, or -1 when excluded.
  std::int64_t roster_position(UserId u) const;
  /// Item agent |A| and social agent n_c x max-roster.
  nlohmann::json size_diagnostics(std::size_t users, std::size_t items) const;
};

/// Builds an action space over `partition` without the `excluded` users;
/// `roster_cap` > 0 keeps only the highest-degree members of each roster.
ActionSpace make_action_space(const CommunityPartition& partition, std::vector<ItemId> pool,
                              std::size_t item_count, std::span<const UserId> excluded = {},
                              std::size_t roster_cap = 0,
                              std::span<const std::size_t> degree = {});

struct JointAction {
  CommunityId c1 = 0;
  CommunityId c2 = 0;
  UserId u1 = 0;
  UserId u2 = 0;
  ItemId item = 0;
  double logp_social1 = 0.0;  // log pi^c + log pi^u
  double logp_social2 = 0.0;
  double logp_item = 0.0;
};

/// Keeps the first occurrence of every item.
std::vector<ItemId> clip_profile(std::span<const ItemId> items);

/// Appends the pair and the item (then clips) and advances t.
AttackState env_step(const AttackState& state, const JointAction& action,
                     const ActionSpace& space);

// ---------------------------------------------------------------------------
// Actors

struct SocialActor {
  IdEncoder encoder;          // user ids
  DenseStack community_net;   // [obs, one-hot(forbidden)] -> n_c
  DenseStack user_net;        // [obs, one-hot(community)] -> max roster

  std::size_t input_dim() const { return community_net.input_dim(); }
};

struct ItemActor {
  IdEncoder encoder;  // item ids
  DenseStack net;     // obs -> pool size
};

/// One agent choosing both pair members and the item (PoisonRec-style).
struct FlatActor {
  IdEncoder user_encoder;
  IdEncoder item_encoder;
  DenseStack net;  // [user pool, item pool, t/T] -> users + pool size
};

struct ActorShape {
  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden{32, 32, 32};
};

/// Community logits start at log(roster size) so the initial joint policy is
/// uniform over eligible users.
SocialActor make_social_actor(const ActionSpace& space, std::size_t users,
                              const ActorShape& shape, Rng& rng);
ItemActor make_item_actor(const ActionSpace& space, std::size_t items, const ActorShape& shape,
                          Rng& rng);
FlatActor make_flat_actor(const ActionSpace& space, std::size_t users, std::size_t items,
                          const ActorShape& shape, Rng& rng);

struct SocialPick {
  CommunityId community = 0;
  UserId user = 0;
  double logp = 0.0;
};

/// Samples a community (masking `forbidden` and rosters with no eligible
/// member), then a roster member other than `avoid`; logp = log pi^c + log pi^u.
SocialPick act_social(const SocialActor& actor, const Observation& obs, const ActionSpace& space,
                      std::optional<CommunityId> forbidden, Rng& rng,
                      std::optional<UserId> avoid = std::nullopt);

struct ItemPick {
  ItemId item = 0;
  double logp = 0.0;
};

ItemPick act_item(const ItemActor& actor, const Observation& obs, const ActionSpace& space,
                  Rng& rng);

/// Probability vectors behind act_social, for inspection and tests.
std::vector<double> community_probs(const SocialActor& actor, const Observation& obs,
                                    const ActionSpace& space,
                                    std::optional<CommunityId> forbidden,
                                    std::optional<UserId> avoid = std::nullopt);
std::vector<double> roster_probs(const SocialActor& actor, const Observation& obs,
                                 const ActionSpace& space, CommunityId community,
                                 std::optional<UserId> avoid = std::nullopt);
std::vector<double> item_probs(const ItemActor& actor, const Observation& obs,
                               const ActionSpace& space);

// ---------------------------------------------------------------------------
// Reward

/// Every `cadence` fakes: injects them into an evasion view and returns the
/// cold-item hit ratio of the spies' top-k; otherwise nothing.
std::optional<double> query_reward(const RecModel& model, std::span<const FakeUser> fakes,
                                   const SpySet& spies, std::span<const char> cold_mask,
                                   const std::vector<std::vector<ItemId>>& exclude,
                                   std::size_t k, std::size_t cadence);

// ---------------------------------------------------------------------------
// Advantage estimation

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double gamma, double lambda);

struct PopArtStats {
  double mean = 0.0;
  double second = 1.0;  // running E[R^2]
  double rate = 0.1;
  double eps = 1e-4;  // variance floor

  double stddev() const;
  double normalize(double x) const { return (x - mean) / stddev(); }
  double denormalize(double y) const { return y * stddev() + mean; }
};

/// Updates the running moments with `returns`, rescales `output` (the
/// critic's last affine layer) so denormalized predictions are unchanged and
/// returns the standardized targets.
std::vector<double> popart_normalize(PopArtStats& stats, std::span<const double> returns,
                                     DenseLayer& output);

// ---------------------------------------------------------------------------
// Agents and updates

enum class AgentLayout {
  Multi,   // two social agents and an item agent
  Double,  // one social agent emitting both pair members, and an item agent
  Flat,    // one agent for the pair and the item
};
const char* to_string(AgentLayout layout);

struct PpoConfig {
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  std::size_t epochs = 10;
  double lr = 5e-4;
  double gamma = 0.99;
  double lambda = 0.95;
};

/// Actors, the centralized critic and their optimizers. The critic sees the
/// agents' observations (detached) plus the fraction of the budget injected.
struct AgentSet {
  AgentLayout layout = AgentLayout::Multi;
  bool learn_items = true;  // false: items uniform over the pool, no item agent
  SocialActor social1;
  SocialActor social2;  // Multi only
  ItemActor item;
  FlatActor flat;
  DenseStack critic;
  PopArtStats popart;

  struct Optimizers {
    Adam social1, social2, item, flat, critic;
  } optim;

  std::vector<double> critic_input(const AttackState& state, double progress) const;
  double value(const AttackState& state, double progress) const;  // denormalized
  TensorArchive to_archive() const;
};

AgentSet make_agents(AgentLayout layout, bool learn_items, const ActionSpace& space,
                     std::size_t users, std::size_t items, const ActorShape& shape,
                     const PpoConfig& ppo, std::uint64_t seed);

/// Samples every sub-action of one step.
JointAction act(const AgentSet& agents, const AttackState& state, const ActionSpace& space,
                Rng& rng);

struct StepRecord {
  AttackState state;  // before the action
  double progress = 0.0;
  JointAction action;
  double reward = 0.0;
  double value = 0.0;  // denormalized critic estimate
  bool done = false;
};

struct RolloutBuffer {
  std::vector<StepRecord> steps;
  std::vector<double> returns;     // R-hat
  std::vector<double> advantages;  // A-hat
  std::vector<double> targets;     // PopArt-normalized returns

  void clear();
};

/// GAE per episode segment (split at `done`), PopArt targets, and advantages
/// on the normalized scale.
void finish_buffer(AgentSet& agents, RolloutBuffer& buffer, const PpoConfig& config);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss_first = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// min(rho*A, clip(rho, 1-eps, 1+eps)*A).
double clipped_surrogate(double ratio, double advantage, double clip);

/// K full-batch passes over `buffer`: clipped surrogate plus entropy bonus per
/// actor, squared error of the critic against the normalized targets.
PpoDiagnostics ppo_update(AgentSet& agents, const RolloutBuffer& buffer,
                          const ActionSpace& space, const PpoConfig& config);

/// Log-probability of `action` under the current actors, per agent.
struct ActionLogProbs {
  double social1 = 0.0;
  double social2 = 0.0;
  double item = 0.0;
};
ActionLogProbs log_probs(const AgentSet& agents, const AttackState& state,
                         const JointAction& action, const ActionSpace& space);

/// Actor parameter blocks in optimizer order.
std::vector<std::span<double>> actor_parameters(AgentSet& agents);

/// Sum over active agents of  -(weights[k] * log pi_k(a) + entropy_coef * H_k)
/// for one step, with its gradient per block of actor_parameters.
struct ActorObjective {
  double value = 0.0;
  std::vector<std::vector<double>> grads;
};
ActorObjective actor_objective(const AgentSet& agents, const StepRecord& step,
                               const ActionSpace& space, const std::array<double, 3>& weights,
                               double entropy_coef);

/// One JSON object per line.
void write_jsonl(std::ostream& out, const nlohmann::json& record);

}  // namespace sra
