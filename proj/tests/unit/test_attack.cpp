#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

namespace {

AttackConfig tiny_config(Strategy s, std::uint64_t seed = 1) {
  AttackConfig c;
  c.strategy = s;
  c.seed = seed;
  c.budget.max_fake_users = 4;
  c.budget.profile_length = 5;
  c.spy_count = 10;
  c.passes = 1;
  c.degree_threshold = 5;
  return c;
}

}  // namespace

TEST_CASE("budget from percent rounds to the nearest user") {
  CHECK(budget_from_percent(2.0, 1892) == 38);
  CHECK(budget_from_percent(1.0, 1892) == 19);
  CHECK(budget_from_percent(0.0, 1892) == 0);
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {Strategy::Multi, Strategy::Double, Strategy::MultiSocial, Strategy::Random,
                 Strategy::Cold, Strategy::Pop, Strategy::Degree, Strategy::PoisonRec}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(parse_strategy("poisonrec") == Strategy::PoisonRec);
  CHECK(kind_of([] { parse_strategy("nope"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("attack config JSON round trip") {
  AttackConfig c = tiny_config(Strategy::Double, 9);
  c.mode = AttackMode::Poison;
  c.ablations.louvain_only = true;
  c.cadence = 3;
  const auto back = AttackConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  auto bad = c.to_json();
  bad["cadence"] = 0;
  CHECK(kind_of([&] { AttackConfig::from_json(bad); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("baselines emit audited cross-community fakes within budget") {
  const auto& w = test::world();
  for (auto s : {Strategy::Random, Strategy::Cold, Strategy::Pop, Strategy::Degree}) {
    CAPTURE(to_string(s));
    const auto cfg = tiny_config(s);
    const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
    const auto r = run_attack(cfg, env);
    CHECK(r.fakes.size() == 4);
    const auto audit = audit_fakes(r.fakes, env.partition, cfg.budget, w.ds.user_count,
                                   w.ds.item_count);
    CHECK(audit.ok());
    std::set<UserId> spies(env.spies.users.begin(), env.spies.users.end());
    for (const auto& f : r.fakes) {
      for (auto [a, b] : f.pairs) {
        CHECK_FALSE(spies.count(a));
        CHECK_FALSE(spies.count(b));
      }
    }
    if (s == Strategy::Cold) {
      const auto mask = env.cold.mask(w.ds.item_count);
      for (const auto& f : r.fakes) {
        for (auto i : f.items) CHECK(mask[i]);
      }
    }
    if (s == Strategy::Degree) {
      const auto friends = w.ds.friends();
      for (const auto& f : r.fakes) {
        for (auto [a, b] : f.pairs) {
          CHECK(friends[a].size() > cfg.degree_threshold);
          CHECK(friends[b].size() > cfg.degree_threshold);
        }
      }
    }
    const auto again = run_attack(cfg, env);
    CHECK(again.fakes_json() == r.fakes_json());
  }
}

TEST_CASE("degree baseline with no eligible users is a config error") {
  const auto& w = test::world();
  auto cfg = tiny_config(Strategy::Degree);
  cfg.degree_threshold = 100000;
  const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
  CHECK(kind_of([&] { run_attack(cfg, env); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("random cross pairs always span two communities") {
  const auto& w = test::world();
  const auto cfg = tiny_config(Strategy::Random);
  const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
  const auto space = make_action_space(env.partition, env.cold.items, w.ds.item_count,
                                       env.spies.users);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto [a, b] = random_cross_pair(space, w.ds.user_count, rng);
    CHECK(env.partition.assignment[a] != env.partition.assignment[b]);
  }
}

TEST_CASE("learned strategies are deterministic and pass the audit") {
  const auto& w = test::world();
  for (auto s : {Strategy::Multi, Strategy::Double, Strategy::MultiSocial, Strategy::PoisonRec}) {
    CAPTURE(to_string(s));
    const auto cfg = tiny_config(s, 5);
    const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
    std::ostringstream log;
    const auto a = run_attack(cfg, env, &log);
    const auto b = run_attack(cfg, env);
    CHECK(a.fakes_json() == b.fakes_json());
    CHECK(a.to_json() == b.to_json());
    CHECK(a.fakes.size() == 4);
    CHECK(audit_fakes(a.fakes, env.partition, cfg.budget, w.ds.user_count, w.ds.item_count)
              .ok());
    CHECK(a.reward_curve.size() == 2);  // cadence 2 over 4 fakes
    CHECK(log.str().find("\"policy_loss\"") != std::string::npos);
    if (s == Strategy::Multi) {
      const auto mask = env.cold.mask(w.ds.item_count);
      for (const auto& f : a.fakes) {
        for (auto i : f.items) CHECK(mask[i]);
      }
    }
  }
}

TEST_CASE("evasion attack changes metrics only through the fakes") {
  const auto& w = test::world();
  const auto cfg = tiny_config(Strategy::Random);
  const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
  const auto none = evaluate_fakes(cfg, env, {}, "none");
  const auto clean = evaluate_view(w.model.view(), w.split, w.ds.user_count, "clean");
  CHECK(none.at("NDCG", 10) == Approx(clean.at("NDCG", 10)).epsilon(1e-12));
}

TEST_CASE("poison mode retrains on polluted data") {
  const auto& w = test::world();
  auto cfg = tiny_config(Strategy::Random);
  cfg.mode = AttackMode::Poison;
  cfg.retrain.epochs = 5;
  const auto env = make_attack_env(w.ds, w.split, w.model, w.parts, cfg);
  const auto r = run_attack(cfg, env);
  CHECK(r.after.at("NDCG", 10) != r.before.at("NDCG", 10));
}

TEST_CASE("audit reports every kind of violation") {
  const auto part = compact_partition({0, 0, 1, 1});
  Budget budget{2, 3};
  FakeUser dup;
  dup.items = {1, 1};
  FakeUser same;
  same.items = {0};
  same.pairs = {{0, 1}};
  FakeUser longp;
  longp.items = {0, 1, 2, 3};
  FakeUser range;
  range.items = {99};
  range.pairs = {{0, 7}};
  const std::vector<FakeUser> fakes{dup, same, longp, range};
  const auto report = audit_fakes(fakes, part, budget, 4, 10);
  CHECK_FALSE(report.ok());
  CHECK(report.violations >= 5);  // duplicate, same community, too long, item, user, count
  const auto relaxed = audit_fakes({same}, part, budget, 4, 10, false);
  CHECK(relaxed.ok());
  FakeUser good;
  good.items = {0, 2};
  good.pairs = {{0, 2}, {1, 3}};
  CHECK(audit_fakes({good}, part, budget, 4, 10).ok());
}

TEST_CASE("filler groups cover every item once, coldest first") {
  Rng rng(1);
  std::vector<std::size_t> pop(57);
  for (auto& p : pop) p = rng.index(40);
  const auto groups = filler_groups(pop, 10);
  REQUIRE(groups.size() == 12);
  CHECK(groups.front().first == "p00-10");
  CHECK(groups[9].first == "p90-100");
  CHECK(groups[10].first == "top-10%");
  CHECK(groups[11].first == "top-20%");
  std::vector<int> seen(pop.size(), 0);
  for (std::size_t g = 0; g < 10; ++g) {
    for (auto i : groups[g].second) ++seen[i];
  }
  for (int s : seen) CHECK(s == 1);
  std::size_t max_cold = 0;
  for (auto i : groups[0].second) max_cold = std::max(max_cold, pop[i]);
  for (auto i : groups[9].second) CHECK(pop[i] >= max_cold);
  const std::set<ItemId> top10(groups[10].second.begin(), groups[10].second.end());
  for (auto i : top10) {
    CHECK(std::count(groups[11].second.begin(), groups[11].second.end(), i) == 1);
  }
}

TEST_CASE("preliminary studies produce one row per group") {
  const auto& w = test::world();
  StudyConfig sc;
  sc.fakes = 3;
  sc.profile_length = 5;
  sc.spy_count = 10;
  const auto filler = run_preliminary(Study::FillerPopularity, w.ds, w.split, &w.model, sc, 2);
  CHECK(filler.rows.size() == 12);
  CHECK(filler.rows.front().values.count("NDCG@10_drop") == 1);
  const auto conn = run_preliminary(Study::ConnectionType, w.ds, w.split, &w.model, sc, 2);
  REQUIRE(conn.rows.size() == 3);
  CHECK(conn.to_csv().rfind("study,group,key,value\n", 0) == 0);
  sc.train.epochs = 10;
  sc.trend_every = 5;
  sc.model.dim = 8;
  const auto trend = run_preliminary(Study::ColdHitTrend, w.ds, w.split, nullptr, sc, 2);
  CHECK(trend.rows.size() >= 2);
  for (const auto& r : trend.rows) {
    CHECK(r.values.at("hit@10") >= 0.0);
    CHECK(r.values.at("hit@10") <= 1.0);
  }
  CHECK(kind_of([&] {
          run_preliminary(Study::FillerPopularity, w.ds, w.split, nullptr, sc, 2);
        }) == ErrorKind::InvalidState);
}
