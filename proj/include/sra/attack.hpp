#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sra/community.hpp"
#include "sra/data.hpp"
#include "sra/marl.hpp"
#include "sra/metrics.hpp"
#include "sra/recenv.hpp"

namespace sra {

enum class Strategy { Multi, Double, MultiSocial, Random, Cold, Pop, Degree, PoisonRec };
const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);
bool is_learned(Strategy s);

enum class AttackMode { Evasion, Poison };
const char* to_string(AttackMode m);
AttackMode parse_mode(const std::string& name);

struct Ablations {
  bool community_mask_off = false;  // pair members may share a community
  bool louvain_only = false;        // Louvain partition instead of walk embeddings + k-means
  bool multiagent_off = false;      // one agent for the whole joint action
  bool cold_pool_off = false;       // item agent picks from every item

  bool any() const { return community_mask_off || louvain_only || multiagent_off || cold_pool_off; }
};

struct AttackConfig {
  Strategy strategy = Strategy::Multi;
  AttackMode mode = AttackMode::Evasion;
  Budget budget;
  double cold_quantile = 0.10;
  std::size_t spy_count = 50;
  std::size_t reward_k = 10;
  std::size_t cadence = 2;
  std::size_t popular_k = 10;
  std::size_t degree_threshold = 20;
  std::size_t passes = 8;  // RL passes over the whole budget
  std::size_t roster_cap = 0;
  PpoConfig ppo;
  ActorShape shape;
  Ablations ablations;
  TrainOptions retrain;  // poison mode
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j);
};

/// round(pct/100 * users).
std::size_t budget_from_percent(double pct, std::size_t users);

/// Everything an attack reads: the clean data, the target and the attacker's
/// public-side preparations.
struct AttackEnv {
  const Dataset* dataset = nullptr;
  const Split* split = nullptr;
  const RecModel* target = nullptr;
  CommunityPartition partition;  // walk embeddings + k-means
  CommunityPartition louvain;
  SpySet spies;
  std::vector<std::size_t> popularity;  // training interactions per item
  ItemPool cold;
};

AttackEnv make_attack_env(const Dataset& dataset, const Split& split, const RecModel& target,
                          const PartitionResult& partition, const AttackConfig& config);

struct AttackResult {
  std::string strategy;
  std::vector<FakeUser> fakes;
  std::vector<double> reward_curve;  // one entry per reward query
  MetricsReport before;
  MetricsReport after;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json diagnostics = nlohmann::json::object();

  nlohmann::json fakes_json() const;
  /// Timing-free summary.
  nlohmann::json to_json() const;
};

/// MultiAttack and the learned variants (double, multi-social, poisonrec).
AttackResult run_multiattack(const AttackConfig& config, const AttackEnv& env,
                             std::ostream* log = nullptr);

/// Heuristic baselines (random, cold, pop, degree).
AttackResult run_baseline(const AttackConfig& config, const AttackEnv& env);

AttackResult run_attack(const AttackConfig& config, const AttackEnv& env,
                        std::ostream* log = nullptr);

/// Metrics of the target with `fakes` injected (evasion view, or a model
/// retrained on the polluted data in poison mode).
MetricsReport evaluate_fakes(const AttackConfig& config, const AttackEnv& env,
                             const std::vector<FakeUser>& fakes, const std::string& label);

/// Uniform eligible pair member; the second avoids the first's community.
std::pair<UserId, UserId> random_cross_pair(const ActionSpace& space, std::size_t users,
                                            Rng& rng);

struct AuditReport {
  std::size_t fakes = 0;
  std::size_t violations = 0;
  std::vector<std::string> messages;

  bool ok() const { return violations == 0; }
  nlohmann::json to_json() const;
};

/// Distinct items, at most T items and T pairs, ids in range, pairs across
/// communities of `partition` (when `cross` is set), and count within budget.
AuditReport audit_fakes(const std::vector<FakeUser>& fakes, const CommunityPartition& partition,
                        const Budget& budget, std::size_t users, std::size_t items,
                        bool cross = true);

// ---------------------------------------------------------------------------
// Preliminary studies

enum class Study { FillerPopularity, ConnectionType, ColdHitTrend };
const char* to_string(Study s);
Study parse_study(const std::string& name);

struct StudyConfig {
  std::size_t fakes = 10;
  std::size_t profile_length = 30;
  std::size_t groups = 10;  // popularity groups for the filler study
  double cold_quantile = 0.10;
  std::size_t spy_count = 50;
  std::size_t trend_every = 25;  // epochs between cold-hit samples
  TrainOptions train;            // cold-hit trend
  RecConfig model;               // cold-hit trend
};

struct StudyRow {
  std::string group;
  std::map<std::string, double> values;
};

struct StudyReport {
  std::string study;
  std::uint64_t seed = 0;
  MetricsReport clean;
  std::vector<StudyRow> rows;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Item groups from coldest to hottest: `groups` equal slices of the
/// popularity order plus "top-10%" and "top-20%" (hottest fractions).
std::vector<std::pair<std::string, std::vector<ItemId>>> filler_groups(
    const std::vector<std::size_t>& popularity, std::size_t groups);

/// filler-popularity and connection-type need a trained target;
/// cold-hit-trend trains its own model from `config.model`.
StudyReport run_preliminary(Study study, const Dataset& dataset, const Split& split,
                            const RecModel* target, const StudyConfig& config,
                            std::uint64_t seed);

}  // namespace sra
