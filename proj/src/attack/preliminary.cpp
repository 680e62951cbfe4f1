#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sra/attack.hpp"
#include "sra/error.hpp"

namespace sra {

const char* to_string(Study s) {
  switch (s) {
    case Study::FillerPopularity: return "filler-popularity";
    case Study::ConnectionType: return "connection-type";
    case Study::ColdHitTrend: return "cold-hit-trend";
  }
  return "?";
}

Study parse_study(const std::string& name) {
  for (auto s : {Study::FillerPopularity, Study::ConnectionType, Study::ColdHitTrend}) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorKind::InvalidConfig, "unknown study '" + name + "'");
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) rs.push_back({{"group", r.group}, {"values", r.values}});
  return {{"study", study}, {"seed", seed}, {"clean", clean.to_json()}, {"rows", rs}};
}

std::string StudyReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "study,group,key,value\n";
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.values) out << study << ',' << r.group << ',' << k << ',' << v << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::string, std::vector<ItemId>>> filler_groups(
    const std::vector<std::size_t>& popularity, std::size_t groups) {
  require(groups >= 1, ErrorKind::InvalidInput, "filler groups: need at least one group");
  const std::size_t m = popularity.size();
  require(m >= groups, ErrorKind::InvalidInput, "filler groups: fewer items than groups");
  std::vector<ItemId> order(m);
  std::iota(order.begin(), order.end(), ItemId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return popularity[a] < popularity[b]; });

  std::vector<std::pair<std::string, std::vector<ItemId>>> out;
  const double width = 100.0 / static_cast<double>(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * m / groups;
    const std::size_t hi = (g + 1) * m / groups;
    char label[32];
    std::snprintf(label, sizeof label, "p%02.0f-%.0f", g * width, (g + 1) * width);
    out.emplace_back(label, std::vector<ItemId>(order.begin() + lo, order.begin() + hi));
  }
  for (int pct : {10, 20}) {
    const std::size_t count = std::max<std::size_t>(1, m * pct / 100);
    out.emplace_back("top-" + std::to_string(pct) + "%",
                     std::vector<ItemId>(order.end() - count, order.end()));
  }
  return out;
}

namespace {

std::vector<ItemId> draw_profile(const std::vector<ItemId>& pool, std::size_t length, Rng& rng) {
  std::vector<ItemId> drawn;
  for (std::size_t t = 0; t < length; ++t) drawn.push_back(pool[rng.index(pool.size())]);
  return clip_profile(drawn);
}

void add_metrics(StudyRow& row, const MetricsReport& attacked, const MetricsReport& clean) {
  for (std::size_t k : kReportCutoffs) {
    for (const char* metric : {"NDCG", "Recall"}) {
      const std::string key = std::string(metric) + "@" + std::to_string(k);
      const double a = attacked.at(metric, k);
      const double c = clean.at(metric, k);
      row.values[key] = a;
      row.values[key + "_drop"] = c > 0.0 ? (c - a) / c : 0.0;
    }
  }
}

StudyReport filler_study(const Dataset& ds, const Split& split, const RecModel& target,
                         const StudyConfig& cfg, std::uint64_t seed, StudyReport report) {
  const std::size_t n = ds.user_count;
  const auto groups = filler_groups(split.train_popularity(ds.item_count), cfg.groups);
  const SeedStream root = SeedStream(seed).child("filler");

  // Social profiles are shared by every group so only the fillers differ.
  std::vector<std::vector<std::pair<UserId, UserId>>> pairs(cfg.fakes);
  auto pair_rng = root.child("pairs").rng();
  for (auto& p : pairs) {
    for (std::size_t t = 0; t < cfg.profile_length; ++t) {
      const UserId a = static_cast<UserId>(pair_rng.index(n));
      UserId b = static_cast<UserId>(pair_rng.index(n - 1));
      if (b >= a) ++b;
      p.emplace_back(a, b);
    }
  }
  for (const auto& [label, pool] : groups) {
    auto rng = root.child(label).rng();
    std::vector<FakeUser> fakes(cfg.fakes);
    for (std::size_t f = 0; f < cfg.fakes; ++f) {
      fakes[f].items = draw_profile(pool, cfg.profile_length, rng);
      fakes[f].pairs = pairs[f];
    }
    StudyRow row;
    row.group = label;
    add_metrics(row, evaluate_view(inject_evasion(target, fakes), split, n, label), report.clean);
    report.rows.push_back(std::move(row));
  }
  return report;
}

StudyReport connection_study(const Dataset& ds, const Split& split, const RecModel& target,
                             const StudyConfig& cfg, std::uint64_t seed, StudyReport report) {
  const std::size_t n = ds.user_count;
  const auto part = louvain(n, ds.social);
  require(part.n_c >= 2, ErrorKind::ConstraintInfeasible,
          "connection study: the social graph has a single community");
  const SeedStream root = SeedStream(seed).child("connection");

  std::vector<ItemId> all(ds.item_count);
  std::iota(all.begin(), all.end(), ItemId{0});
  auto item_rng = root.child("items").rng();
  std::vector<std::vector<ItemId>> items(cfg.fakes);
  for (auto& p : items) p = draw_profile(all, cfg.profile_length, item_rng);

  // The first member of every pair is shared; only the partner rule varies.
  auto first_rng = root.child("first").rng();
  std::vector<std::vector<UserId>> first(cfg.fakes);
  for (auto& f : first) {
    for (std::size_t t = 0; t < cfg.profile_length; ++t) {
      UserId u = 0;
      do {
        u = static_cast<UserId>(first_rng.index(n));
      } while (part.n_c > 1 && part.rosters[part.assignment[u]].size() < 2);
      f.push_back(u);
    }
  }

  for (const char* type : {"random", "intra", "cross"}) {
    auto rng = root.child(type).rng();
    const std::string t = type;
    std::vector<FakeUser> fakes(cfg.fakes);
    for (std::size_t f = 0; f < cfg.fakes; ++f) {
      fakes[f].items = items[f];
      for (const UserId a : first[f]) {
        const CommunityId ca = part.assignment[a];
        UserId b = a;
        while (b == a) {
          if (t == "random") {
            b = static_cast<UserId>(rng.index(n));
          } else if (t == "intra") {
            const auto& roster = part.rosters[ca];
            b = roster[rng.index(roster.size())];
          } else {
            b = static_cast<UserId>(rng.index(n));
            if (part.assignment[b] == ca) b = a;
          }
        }
        fakes[f].pairs.emplace_back(a, b);
      }
    }
    StudyRow row;
    row.group = t;
    add_metrics(row, evaluate_view(inject_evasion(target, fakes), split, n, t), report.clean);
    report.rows.push_back(std::move(row));
  }
  return report;
}

StudyReport trend_study(const Dataset& ds, const Split& split, const StudyConfig& cfg,
                        std::uint64_t seed, StudyReport report) {
  const std::size_t n = ds.user_count;
  const SeedStream root = SeedStream(seed).child("cold-hit-trend");
  const auto spies = select_spies(ds, cfg.spy_count, root.child("spies").seed());
  const auto cold = cold_start_pool(split.train_popularity(ds.item_count), cfg.cold_quantile)
                        .mask(ds.item_count);
  require(cfg.trend_every >= 1, ErrorKind::InvalidConfig, "trend: sample interval must be >= 1");

  RecModel model(cfg.model, n, ds.item_count, root.child("model").seed());
  model.attach(split.train_by_user, ds.friends());
  TrainOptions opts = cfg.train;
  opts.callback_every = cfg.trend_every;
  opts.on_epoch = [&](std::size_t epoch, const RecModel& m) {
    StudyRow row;
    char label[32];
    std::snprintf(label, sizeof label, "epoch-%05zu", epoch);
    row.group = label;
    row.values["epoch"] = static_cast<double>(epoch);
    for (std::size_t k : {std::size_t{10}, std::size_t{20}}) {
      std::vector<RankedList> lists;
      for (auto u : spies.users) lists.push_back(m.view().topk(u, k, split.train_by_user[u]));
      row.values["hit@" + std::to_string(k)] = cold_hit_reward(lists, cold, k);
    }
    report.rows.push_back(std::move(row));
  };
  train(model, split, ds, opts);
  report.clean = evaluate_view(model.view(), split, n, "clean");
  return report;
}

}  // namespace

StudyReport run_preliminary(Study study, const Dataset& dataset, const Split& split,
                            const RecModel* target, const StudyConfig& config,
                            std::uint64_t seed) {
  require(config.fakes >= 1 && config.profile_length >= 1, ErrorKind::InvalidConfig,
          "study: need at least one fake and one step");
  StudyReport report;
  report.study = to_string(study);
  report.seed = seed;
  if (study == Study::ColdHitTrend) return trend_study(dataset, split, config, seed, report);

  require(target != nullptr && target->trained(), ErrorKind::InvalidState,
          "study: a trained target model is required");
  require(target->user_count() == dataset.user_count, ErrorKind::InvalidInput,
          "study: target model does not match the dataset");
  require(dataset.user_count >= 2, ErrorKind::InvalidInput, "study: need at least two users");
  report.clean = evaluate_view(target->view(), split, dataset.user_count, "clean");
  if (study == Study::FillerPopularity) {
    return filler_study(dataset, split, *target, config, seed, std::move(report));
  }
  return connection_study(dataset, split, *target, config, seed, std::move(report));
}

}  // namespace sra
