#include <numeric>
#include <sstream>

#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

namespace {

// 12 users in three communities of sizes 5, 4, 3; pool of items 0..9 out of 20.
ActionSpace toy_space(std::vector<UserId> excluded = {}) {
  const auto part = compact_partition({0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2});
  std::vector<ItemId> pool(10);
  std::iota(pool.begin(), pool.end(), ItemId{0});
  return make_action_space(part, pool, 20, excluded);
}

JointAction pair_action(CommunityId c1, UserId u1, CommunityId c2, UserId u2, ItemId item) {
  JointAction a;
  a.c1 = c1;
  a.u1 = u1;
  a.c2 = c2;
  a.u2 = u2;
  a.item = item;
  return a;
}

AttackState sample_state(const AgentSet& agents, const ActionSpace& space, std::size_t steps,
                         Rng& rng) {
  AttackState s;
  s.horizon = 6;
  for (std::size_t t = 0; t < steps; ++t) s = env_step(s, act(agents, s, space, rng), space);
  return s;
}

}  // namespace

TEST_CASE("env_step appends, clips and advances") {
  const auto space = toy_space();
  AttackState s;
  s.horizon = 3;
  s = env_step(s, pair_action(0, 1, 1, 6, 4), space);
  s = env_step(s, pair_action(2, 10, 0, 0, 4), space);
  CHECK(s.t == 2);
  CHECK(s.items == std::vector<ItemId>{4});
  CHECK(s.pairs.size() == 2);
  s = env_step(s, pair_action(1, 5, 2, 9, 7), space);
  CHECK(kind_of([&] { env_step(s, pair_action(1, 5, 2, 9, 7), space); }) ==
        ErrorKind::EpisodeFinished);
}

TEST_CASE("env_step rejects actions outside the space") {
  const auto space = toy_space({2});
  const AttackState s;
  CHECK(kind_of([&] { env_step(s, pair_action(0, 1, 0, 3, 1), space); }) ==
        ErrorKind::InvalidAction);  // same community
  CHECK(kind_of([&] { env_step(s, pair_action(0, 6, 1, 7, 1), space); }) ==
        ErrorKind::InvalidAction);  // user not in its community
  CHECK(kind_of([&] { env_step(s, pair_action(0, 2, 1, 7, 1), space); }) ==
        ErrorKind::InvalidAction);  // excluded user
  CHECK(kind_of([&] { env_step(s, pair_action(0, 1, 1, 7, 15), space); }) ==
        ErrorKind::InvalidAction);  // item outside the pool
  CHECK(kind_of([&] { env_step(s, pair_action(3, 1, 1, 7, 1), space); }) ==
        ErrorKind::InvalidAction);  // no such community
  auto open = toy_space();
  open.cross_community = false;
  CHECK(env_step(s, pair_action(0, 1, 0, 3, 1), open).t == 1);
  CHECK(kind_of([&] { env_step(s, pair_action(0, 1, 0, 1, 1), open); }) ==
        ErrorKind::InvalidAction);  // repeated user
}

TEST_CASE("clip_profile keeps first occurrences in order") {
  const std::vector<ItemId> p{5, 3, 5, 1, 3, 9};
  CHECK(clip_profile(p) == std::vector<ItemId>{5, 3, 1, 9});
}

TEST_CASE("GAE with lambda 1 is discounted return minus baseline; lambda 0 is the TD residual") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    std::vector<double> r(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.normal();
      v[i] = rng.normal();
    }
    const double boot = rng.normal();
    const double gamma = rng.uniform(0.5, 1.0);
    const auto one = gae(r, v, boot, gamma, 1.0);
    const auto zero = gae(r, v, boot, gamma, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      double ret = 0.0, disc = 1.0;
      for (std::size_t k = t; k < n; ++k) {
        ret += disc * r[k];
        disc *= gamma;
      }
      ret += disc * boot;
      CHECK(one.advantages[t] == Approx(ret - v[t]).epsilon(1e-12));
      const double next = t + 1 < n ? v[t + 1] : boot;
      CHECK(zero.advantages[t] == r[t] + gamma * next - v[t]);
      CHECK(one.returns[t] == Approx(one.advantages[t] + v[t]));
    }
  }
}

TEST_CASE("PopArt updates moments and preserves denormalized outputs") {
  Rng rng(2);
  DenseStack critic = DenseStack::make({3, 4, 1}, Activation::Relu, rng);
  PopArtStats stats;
  const std::vector<double> x{0.2, -0.1, 0.7};
  const double before = stats.denormalize(critic.forward(x)[0]);
  const std::vector<double> returns{10.0, 10.0};
  const auto targets = popart_normalize(stats, returns, critic.mutable_layers().back());
  CHECK(stats.mean == Approx(1.0));
  CHECK(stats.second == Approx(10.9));
  CHECK(stats.stddev() == Approx(std::sqrt(9.9)));
  CHECK(targets[0] == Approx(9.0 / std::sqrt(9.9)));
  CHECK(stats.denormalize(critic.forward(x)[0]) == Approx(before).epsilon(1e-12));
  CHECK(stats.denormalize(stats.normalize(3.5)) == Approx(3.5));
}

TEST_CASE("clipped surrogate examples") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == Approx(1.2));
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == Approx(0.5));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == Approx(-0.8));
  CHECK(clipped_surrogate(1.5, -1.0, 0.2) == Approx(-1.5));
  CHECK(clipped_surrogate(1.0, 0.7, 0.2) == Approx(0.7));
}

TEST_CASE("masks: forbidden community, avoided user and excluded users get zero probability") {
  const auto space = toy_space({0, 1, 2, 3, 4});  // community 0 fully excluded
  Rng rng(5);
  const auto actor = make_social_actor(space, 12, ActorShape{}, rng);
  AttackState s;
  const auto obs = observe(s, AgentRole::Social1, actor.encoder);
  const auto pc = community_probs(actor, obs, space, CommunityId{1});
  CHECK(pc[0] == 0.0);
  CHECK(pc[1] == 0.0);
  CHECK(pc[2] == Approx(1.0));
  const auto pu = roster_probs(actor, obs, space, 2, UserId{10});
  CHECK(pu[1] == 0.0);  // user 10 is position 1 in roster {9, 10, 11}
  CHECK(pu[0] + pu[2] == Approx(1.0));
  for (int i = 0; i < 50; ++i) {
    const auto pick = act_social(actor, obs, space, CommunityId{1}, rng, UserId{10});
    CHECK(pick.community == 2);
    CHECK(pick.user != 10);
  }
}

TEST_CASE("initial social policy is close to uniform over eligible users") {
  const auto space = toy_space();
  Rng rng(6);
  const auto actor = make_social_actor(space, 12, ActorShape{}, rng);
  const auto obs = observe(AttackState{}, AgentRole::Social1, actor.encoder);
  const auto pc = community_probs(actor, obs, space, std::nullopt);
  CHECK(pc[0] == Approx(5.0 / 12).epsilon(0.05));
  CHECK(pc[1] == Approx(4.0 / 12).epsilon(0.05));
  CHECK(pc[2] == Approx(3.0 / 12).epsilon(0.05));
}

TEST_CASE("actor objectives match central differences in every layout") {
  const auto space = toy_space({11});
  struct Setup {
    AgentLayout layout;
    bool learn_items;
  };
  ActorShape shape;
  shape.embed_dim = 3;
  shape.hidden = {5, 4};
  int seed = 0;
  for (const auto& cfg : {Setup{AgentLayout::Multi, true}, Setup{AgentLayout::Double, true},
                          Setup{AgentLayout::Flat, true}, Setup{AgentLayout::Multi, false}}) {
    CAPTURE(to_string(cfg.layout));
    for (int trial = 0; trial < 4; ++trial) {
      AgentSet agents = make_agents(cfg.layout, cfg.learn_items, space, 12, 20, shape,
                                    PpoConfig{}, 40 + seed++);
      // Larger weights than the initial 0.01 head gain so softmaxes are far from uniform.
      Rng perturb(seed);
      for (auto block : actor_parameters(agents)) {
        for (auto& v : block) v += 0.5 * perturb.normal();
      }
      Rng rng(seed);
      StepRecord step;
      step.state = sample_state(agents, space, trial + 1, rng);
      step.action = act(agents, step.state, space, rng);
      const std::array<double, 3> w{perturb.normal(), perturb.normal(), perturb.normal()};
      const double h = 0.3;
      const auto obj = actor_objective(agents, step, space, w, h);
      auto loss = [&] { return actor_objective(agents, step, space, w, h).value; };
      auto params = actor_parameters(agents);
      REQUIRE(params.size() == obj.grads.size());
      for (std::size_t b = 0; b < params.size(); ++b) {
        CAPTURE(b);
        CHECK(test::max_fd_error(loss, params[b], obj.grads[b]) < 1e-4);
      }
    }
  }
}

TEST_CASE("log probabilities recorded at action time match re-evaluation") {
  const auto space = toy_space();
  for (auto layout : {AgentLayout::Multi, AgentLayout::Double, AgentLayout::Flat}) {
    AgentSet agents = make_agents(layout, true, space, 12, 20, ActorShape{}, PpoConfig{}, 3);
    Rng rng(8);
    AttackState s;
    s.horizon = 5;
    for (int t = 0; t < 5; ++t) {
      const auto a = act(agents, s, space, rng);
      const auto lp = log_probs(agents, s, a, space);
      if (layout == AgentLayout::Flat) {
        CHECK(lp.social1 == Approx(a.logp_social1 + a.logp_item).epsilon(1e-12));
      } else {
        CHECK(lp.social1 == Approx(a.logp_social1).epsilon(1e-12));
        CHECK(lp.item == Approx(a.logp_item).epsilon(1e-12));
        if (layout == AgentLayout::Multi) CHECK(lp.social2 == Approx(a.logp_social2).epsilon(1e-12));
      }
      CHECK(space.partition.assignment[a.u1] != space.partition.assignment[a.u2]);
      s = env_step(s, a, space);
    }
  }
}

TEST_CASE("PPO raises the probability of an advantaged action and fits the critic") {
  const auto space = toy_space();
  PpoConfig cfg;
  cfg.lr = 0.01;
  AgentSet agents = make_agents(AgentLayout::Multi, true, space, 12, 20, ActorShape{}, cfg, 1);
  Rng rng(4);
  RolloutBuffer buf;
  AttackState s;
  s.horizon = 4;
  for (int t = 0; t < 4; ++t) {
    StepRecord rec;
    rec.state = s;
    rec.progress = 0.5;
    rec.action = act(agents, s, space, rng);
    rec.value = agents.value(s, 0.5);
    s = env_step(s, rec.action, space);
    buf.steps.push_back(rec);
  }
  buf.steps.back().reward = 1.0;
  buf.steps.back().done = true;
  finish_buffer(agents, buf, cfg);
  const auto first = buf.steps.front();
  const auto before = log_probs(agents, first.state, first.action, space);
  const auto diag = ppo_update(agents, buf, space, cfg);
  const auto after = log_probs(agents, first.state, first.action, space);
  CHECK(buf.advantages.front() > 0.0);
  CHECK(after.item > before.item);
  CHECK(after.social1 > before.social1);
  CHECK(diag.value_loss < diag.value_loss_first);
  CHECK(std::isfinite(diag.policy_loss));
}

TEST_CASE("finish_buffer segments episodes at done flags") {
  const auto space = toy_space();
  PpoConfig cfg;
  AgentSet agents = make_agents(AgentLayout::Multi, true, space, 12, 20, ActorShape{}, cfg, 1);
  RolloutBuffer buf;
  buf.steps.resize(4);
  buf.steps[1].reward = 1.0;
  buf.steps[1].done = true;
  buf.steps[3].reward = 2.0;
  buf.steps[3].done = true;
  finish_buffer(agents, buf, cfg);
  // values are all zero here, so returns are lambda-returns of the rewards
  const double gl = cfg.gamma * cfg.lambda;
  CHECK(buf.returns[0] == Approx(gl));
  CHECK(buf.returns[1] == Approx(1.0));
  CHECK(buf.returns[2] == Approx(2.0 * gl));
  CHECK(buf.returns[3] == Approx(2.0));
}

TEST_CASE("reward queries fire only on the cadence") {
  const auto& w = test::world();
  const auto spies = select_spies(w.ds, 10, 1);
  const auto cold = cold_start_pool(w.split.train_popularity(w.ds.item_count), 0.1);
  const auto mask = cold.mask(w.ds.item_count);
  std::vector<FakeUser> fakes(3);
  for (auto& f : fakes) {
    f.items = {cold.items[0], cold.items[1]};
    f.pairs = {{0, 1}};
  }
  CHECK_FALSE(query_reward(w.model, std::span(fakes).first(1), spies, mask,
                           w.split.train_by_user, 10, 2));
  const auto r = query_reward(w.model, std::span(fakes).first(2), spies, mask,
                              w.split.train_by_user, 10, 2);
  REQUIRE(r);
  CHECK(*r >= 0.0);
  CHECK(*r <= 1.0);
  CHECK(kind_of([&] {
          query_reward(w.model, fakes, spies, mask, w.split.train_by_user, 10, 0);
        }) == ErrorKind::InvalidInput);
}

TEST_CASE("JSON lines are single-line objects") {
  std::ostringstream out;
  write_jsonl(out, {{"a", 1}, {"b", {1, 2}}});
  write_jsonl(out, {{"c", "x"}});
  CHECK(out.str() == "{\"a\":1,\"b\":[1,2]}\n{\"c\":\"x\"}\n");
}
