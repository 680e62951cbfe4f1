#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "sra/attack.hpp"
#include "sra/error.hpp"

namespace sra {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Multi: return "multi";
    case Strategy::Double: return "double";
    case Strategy::MultiSocial: return "multi-social";
    case Strategy::Random: return "random";
    case Strategy::Cold: return "cold";
    case Strategy::Pop: return "pop";
    case Strategy::Degree: return "degree";
    case Strategy::PoisonRec: return "poisonrec-untargeted";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : {Strategy::Multi, Strategy::Double, Strategy::MultiSocial, Strategy::Random,
                 Strategy::Cold, Strategy::Pop, Strategy::Degree, Strategy::PoisonRec}) {
    if (name == to_string(s)) return s;
  }
  if (name == "poisonrec") return Strategy::PoisonRec;
  fail(ErrorKind::InvalidConfig, "unknown strategy '" + name + "'");
}

bool is_learned(Strategy s) {
  return s == Strategy::Multi || s == Strategy::Double || s == Strategy::MultiSocial ||
         s == Strategy::PoisonRec;
}

const char* to_string(AttackMode m) { return m == AttackMode::Evasion ? "evasion" : "poison"; }

AttackMode parse_mode(const std::string& name) {
  if (name == "evasion") return AttackMode::Evasion;
  if (name == "poison") return AttackMode::Poison;
  fail(ErrorKind::InvalidConfig, "unknown attack mode '" + name + "'");
}

std::size_t budget_from_percent(double pct, std::size_t users) {
  require(pct >= 0.0, ErrorKind::InvalidConfig, "budget percentage must be >= 0");
  return static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(users)));
}

namespace {

nlohmann::json train_json(const TrainOptions& t) {
  return {{"epochs", t.epochs}, {"lr", t.lr},       {"l2", t.l2},
          {"seed", t.seed},     {"batch_size", t.batch_size}, {"adversarial_eps", t.adversarial_eps}};
}

void train_from(const nlohmann::json& j, TrainOptions& t) {
  t.epochs = j.value("epochs", t.epochs);
  t.lr = j.value("lr", t.lr);
  t.l2 = j.value("l2", t.l2);
  t.seed = j.value("seed", t.seed);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.adversarial_eps = j.value("adversarial_eps", t.adversarial_eps);
}

}  // namespace

nlohmann::json AttackConfig::to_json() const {
  return {{"strategy", to_string(strategy)},
          {"mode", to_string(mode)},
          {"budget", {{"max_fake_users", budget.max_fake_users},
                      {"profile_length", budget.profile_length}}},
          {"cold_quantile", cold_quantile},
          {"spy_count", spy_count},
          {"reward_k", reward_k},
          {"cadence", cadence},
          {"popular_k", popular_k},
          {"degree_threshold", degree_threshold},
          {"passes", passes},
          {"roster_cap", roster_cap},
          {"ppo", {{"clip", ppo.clip}, {"entropy_coef", ppo.entropy_coef},
                   {"value_coef", ppo.value_coef}, {"epochs", ppo.epochs}, {"lr", ppo.lr},
                   {"gamma", ppo.gamma}, {"lambda", ppo.lambda}}},
          {"shape", {{"embed_dim", shape.embed_dim}, {"hidden", shape.hidden}}},
          {"ablations", {{"community_mask_off", ablations.community_mask_off},
                         {"louvain_only", ablations.louvain_only},
                         {"multiagent_off", ablations.multiagent_off},
                         {"cold_pool_off", ablations.cold_pool_off}}},
          {"retrain", train_json(retrain)},
          {"seed", seed}};
}

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
  AttackConfig c;
  if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
  if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
  if (j.contains("budget")) {
    c.budget.max_fake_users = j["budget"].value("max_fake_users", c.budget.max_fake_users);
    c.budget.profile_length = j["budget"].value("profile_length", c.budget.profile_length);
  }
  c.cold_quantile = j.value("cold_quantile", c.cold_quantile);
  c.spy_count = j.value("spy_count", c.spy_count);
  c.reward_k = j.value("reward_k", c.reward_k);
  c.cadence = j.value("cadence", c.cadence);
  c.popular_k = j.value("popular_k", c.popular_k);
  c.degree_threshold = j.value("degree_threshold", c.degree_threshold);
  c.passes = j.value("passes", c.passes);
  c.roster_cap = j.value("roster_cap", c.roster_cap);
  if (j.contains("ppo")) {
    const auto& p = j["ppo"];
    c.ppo.clip = p.value("clip", c.ppo.clip);
    c.ppo.entropy_coef = p.value("entropy_coef", c.ppo.entropy_coef);
    c.ppo.value_coef = p.value("value_coef", c.ppo.value_coef);
    c.ppo.epochs = p.value("epochs", c.ppo.epochs);
    c.ppo.lr = p.value("lr", c.ppo.lr);
    c.ppo.gamma = p.value("gamma", c.ppo.gamma);
    c.ppo.lambda = p.value("lambda", c.ppo.lambda);
  }
  if (j.contains("shape")) {
    c.shape.embed_dim = j["shape"].value("embed_dim", c.shape.embed_dim);
    c.shape.hidden = j["shape"].value("hidden", c.shape.hidden);
  }
  if (j.contains("ablations")) {
    const auto& a = j["ablations"];
    c.ablations.community_mask_off = a.value("community_mask_off", false);
    c.ablations.louvain_only = a.value("louvain_only", false);
    c.ablations.multiagent_off = a.value("multiagent_off", false);
    c.ablations.cold_pool_off = a.value("cold_pool_off", false);
  }
  if (j.contains("retrain")) train_from(j["retrain"], c.retrain);
  c.seed = j.value("seed", c.seed);
  require(c.cadence >= 1, ErrorKind::InvalidConfig, "cadence must be >= 1");
  require(c.budget.profile_length >= 1, ErrorKind::InvalidConfig, "profile length must be >= 1");
  return c;
}

AttackEnv make_attack_env(const Dataset& dataset, const Split& split, const RecModel& target,
                          const PartitionResult& partition, const AttackConfig& config) {
  require(target.user_count() == dataset.user_count && target.item_count() == dataset.item_count,
          ErrorKind::InvalidInput, "attack: target model does not match the dataset");
  AttackEnv env;
  env.dataset = &dataset;
  env.split = &split;
  env.target = &target;
  env.partition = partition.partition;
  env.louvain = partition.louvain;
  env.spies = select_spies(dataset, config.spy_count,
                           SeedStream(config.seed).child("spies").seed());
  env.popularity = split.train_popularity(dataset.item_count);
  env.cold = cold_start_pool(env.popularity, config.cold_quantile);
  return env;
}

nlohmann::json AttackResult::fakes_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : fakes) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [a, b] : f.pairs) pairs.push_back({a, b});
    arr.push_back({{"items", f.items}, {"pairs", pairs}});
  }
  return arr;
}

nlohmann::json AttackResult::to_json() const {
  return {{"strategy", strategy},   {"seed", seed},
          {"fake_users", fakes.size()}, {"reward_curve", reward_curve},
          {"before", before.to_json()}, {"after", after.to_json()},
          {"diagnostics", diagnostics}};
}

nlohmann::json AuditReport::to_json() const {
  return {{"fakes", fakes}, {"violations", violations}, {"messages", messages}};
}

AuditReport audit_fakes(const std::vector<FakeUser>& fakes, const CommunityPartition& partition,
                        const Budget& budget, std::size_t users, std::size_t items, bool cross) {
  AuditReport r;
  r.fakes = fakes.size();
  auto bad = [&](std::size_t f, const std::string& what) {
    ++r.violations;
    if (r.messages.size() < 20) r.messages.push_back("fake " + std::to_string(f) + ": " + what);
  };
  if (fakes.size() > budget.max_fake_users) {
    ++r.violations;
    r.messages.push_back("fake count exceeds the budget");
  }
  for (std::size_t f = 0; f < fakes.size(); ++f) {
    const auto& fk = fakes[f];
    if (fk.items.size() > budget.profile_length) bad(f, "item profile longer than T");
    if (fk.pairs.size() > budget.profile_length) bad(f, "social profile longer than T");
    auto sorted = fk.items;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) bad(f, "repeated item");
    if (!sorted.empty() && sorted.back() >= items) bad(f, "item id out of range");
    for (const auto& [a, b] : fk.pairs) {
      if (a >= users || b >= users) {
        bad(f, "user id out of range");
        continue;
      }
      if (a == b) bad(f, "pair repeats a user");
      if (cross && partition.assignment.at(a) == partition.assignment.at(b)) {
        bad(f, "pair inside one community");
      }
    }
  }
  return r;
}

MetricsReport evaluate_fakes(const AttackConfig& config, const AttackEnv& env,
                             const std::vector<FakeUser>& fakes, const std::string& label) {
  const auto& target = *env.target;
  const std::size_t n = env.dataset->user_count;
  if (fakes.empty()) return evaluate_view(target.view(), *env.split, n, label);
  if (config.mode == AttackMode::Evasion) {
    return evaluate_view(inject_evasion(target, fakes), *env.split, n, label);
  }
  const auto polluted = inject_poison(*env.dataset, fakes, config.budget);
  const auto split = extend_split(*env.split, polluted, n);
  RecModel model(target.config(), polluted.user_count, polluted.item_count,
                 SeedStream(config.seed).child("retrain").seed());
  model.attach(split.train_by_user, polluted.friends());
  train(model, split, polluted, config.retrain);
  return evaluate_view(model.view(), split, n, label);
}

namespace {

ActionSpace build_space(const AttackConfig& config, const AttackEnv& env, bool all_items) {
  const auto& ds = *env.dataset;
  std::vector<ItemId> pool;
  if (all_items) {
    pool.resize(ds.item_count);
    for (std::size_t i = 0; i < ds.item_count; ++i) pool[i] = static_cast<ItemId>(i);
  } else {
    pool = env.cold.items;
  }
  std::vector<std::size_t> degree;
  if (config.roster_cap > 0) {
    for (const auto& f : ds.friends()) degree.push_back(f.size());
  }
  const auto& part = config.ablations.louvain_only ? env.louvain : env.partition;
  auto space = make_action_space(part, std::move(pool), ds.item_count, env.spies.users,
                                 config.roster_cap, degree);
  space.cross_community = !config.ablations.community_mask_off;
  return space;
}

}  // namespace

AttackResult run_multiattack(const AttackConfig& config, const AttackEnv& env, std::ostream* log) {
  require(is_learned(config.strategy), ErrorKind::InvalidConfig,
          std::string("run_multiattack: ") + to_string(config.strategy) + " is a heuristic baseline");
  const auto start = std::chrono::steady_clock::now();
  const auto& ds = *env.dataset;
  const std::size_t n = ds.user_count;
  const std::size_t budget = config.budget.max_fake_users;
  const std::size_t horizon = config.budget.profile_length;

  AgentLayout layout = AgentLayout::Multi;
  bool learn_items = true;
  bool all_items = config.ablations.cold_pool_off;
  switch (config.strategy) {
    case Strategy::Double: layout = AgentLayout::Double; break;
    case Strategy::MultiSocial:
      learn_items = false;
      all_items = true;
      break;
    case Strategy::PoisonRec:
      layout = AgentLayout::Flat;
      all_items = true;
      break;
    default: break;
  }
  if (config.ablations.multiagent_off) layout = AgentLayout::Flat;
  const ActionSpace space = build_space(config, env, all_items);

  AttackResult result;
  result.strategy = to_string(config.strategy);
  result.seed = config.seed;
  result.before = evaluate_view(env.target->view(), *env.split, n, "clean");
  result.diagnostics["layout"] = to_string(layout);
  result.diagnostics["action_space"] = space.size_diagnostics(n, ds.item_count);
  result.diagnostics["ablations"] = config.to_json()["ablations"];

  if (budget > 0) {
    AgentSet agents = make_agents(layout, learn_items, space, n, ds.item_count, config.shape,
                                  config.ppo, config.seed);
    const auto cold_mask = env.cold.mask(ds.item_count);
    const SeedStream rollout = SeedStream(config.seed).child("rollout");
    const std::size_t passes = std::max<std::size_t>(1, config.passes);
    std::vector<FakeUser> fakes;
    std::vector<double> pass_reward;
    for (std::size_t pass = 0; pass < passes; ++pass) {
      fakes.clear();
      double last_reward = 0.0;
      for (std::size_t episode = 0; fakes.size() < budget; ++episode) {
        auto rng = rollout.child(pass).child(episode).rng();
        RolloutBuffer buffer;
        const std::size_t count = std::min(config.cadence, budget - fakes.size());
        for (std::size_t j = 0; j < count; ++j) {
          AttackState state;
          state.horizon = horizon;
          state.fake_index = fakes.size();
          const double progress = static_cast<double>(fakes.size()) / static_cast<double>(budget);
          for (std::size_t t = 0; t < horizon; ++t) {
            StepRecord rec;
            rec.state = state;
            rec.progress = progress;
            rec.action = act(agents, state, space, rng);
            rec.value = agents.value(state, progress);
            state = env_step(state, rec.action, space);
            buffer.steps.push_back(std::move(rec));
          }
          fakes.push_back(state.to_fake());
        }
        // A short final episode still ends with a query.
        const std::size_t cadence = fakes.size() == budget ? 1 : config.cadence;
        const auto reward = query_reward(*env.target, fakes, env.spies, cold_mask,
                                         env.split->train_by_user, config.reward_k, cadence);
        buffer.steps.back().done = true;
        if (reward) {
          buffer.steps.back().reward = *reward;
          result.reward_curve.push_back(*reward);
          last_reward = *reward;
        }
        finish_buffer(agents, buffer, config.ppo);
        const auto d = ppo_update(agents, buffer, space, config.ppo);
        if (log) {
          write_jsonl(*log, {{"pass", pass},
                             {"episode", episode},
                             {"fakes", fakes.size()},
                             {"reward", reward ? *reward : 0.0},
                             {"policy_loss", d.policy_loss},
                             {"value_loss", d.value_loss},
                             {"entropy", d.entropy},
                             {"clip_fraction", d.clip_fraction}});
        }
      }
      pass_reward.push_back(last_reward);
    }
    result.fakes = std::move(fakes);
    result.diagnostics["final_reward_per_pass"] = pass_reward;
  }
  result.after = evaluate_fakes(config, env, result.fakes, result.strategy);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

AttackResult run_attack(const AttackConfig& config, const AttackEnv& env, std::ostream* log) {
  if (is_learned(config.strategy)) return run_multiattack(config, env, log);
  return run_baseline(config, env);
}

}  // namespace sra
