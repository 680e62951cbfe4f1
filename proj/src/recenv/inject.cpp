#include <algorithm>

#include "sra/error.hpp"
#include "sra/kernels.hpp"
#include "sra/recenv.hpp"

namespace sra {
namespace {

void validate(std::span<const FakeUser> fakes, std::size_t users, std::size_t items) {
  for (const auto& f : fakes) {
    for (auto i : f.items) {
      require(i < items, ErrorKind::InvalidInput, "fake user: item id out of range");
    }
    for (const auto& [a, b] : f.pairs) {
      require(a < users && b < users, ErrorKind::InvalidInput, "fake user: user id out of range");
      require(a != b, ErrorKind::InvalidInput, "fake user: pair links a user to itself");
    }
  }
}

std::vector<UserId> partners(const FakeUser& f) {
  std::vector<UserId> out;
  for (const auto& [a, b] : f.pairs) {
    out.push_back(a);
    out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ItemId> sorted_items(const FakeUser& f) {
  std::vector<ItemId> s = f.items;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

ScoreView inject_evasion(const RecModel& model, std::span<const FakeUser> fakes) {
  require(model.inductive(), ErrorKind::UnsupportedMode,
          std::string("inject_evasion: ") + to_string(model.variant()) +
              " cannot embed unseen users; use poisoning");
  const std::size_t n = model.user_count();
  const std::size_t m = model.item_count();
  const std::size_t dim = model.config().dim;
  validate(fakes, n, m);

  auto items_of = model.items_of();
  auto friends_of = model.friends_of();
  Embeddings base{Matrix(n + fakes.size(), dim), model.base().items};
  std::copy(model.base().users.data.begin(), model.base().users.data.end(),
            base.users.data.begin());
  for (std::size_t f = 0; f < fakes.size(); ++f) {
    const auto fid = static_cast<UserId>(n + f);
    auto items = sorted_items(fakes[f]);
    auto row = base.users.row(fid);
    if (!items.empty()) {
      const double s = 1.0 / static_cast<double>(items.size());
      for (auto i : items) kernels::axpy(s, model.base().items.row(i), row);
    }
    items_of.push_back(std::move(items));
    auto ps = partners(fakes[f]);
    for (auto v : ps) {
      auto& fv = friends_of[v];
      fv.insert(std::upper_bound(fv.begin(), fv.end(), fid), fid);
    }
    friends_of.push_back(std::move(ps));
  }
  const auto graph = build_graph(Normalization::Mean, m, items_of, friends_of);
  ScoreView view;
  view.final = propagate(graph, base, model.propagation_spec());
  return view;
}

Dataset inject_poison(const Dataset& dataset, std::span<const FakeUser> fakes,
                      const Budget& budget) {
  require(fakes.size() <= budget.max_fake_users, ErrorKind::BudgetViolation,
          "inject_poison: " + std::to_string(fakes.size()) + " fake users exceed the budget of " +
              std::to_string(budget.max_fake_users));
  for (const auto& f : fakes) {
    require(f.items.size() <= budget.profile_length, ErrorKind::BudgetViolation,
            "inject_poison: fake profile longer than the profile length");
  }
  const std::size_t n = dataset.user_count;
  validate(fakes, n, dataset.item_count);
  auto inter = dataset.interactions;
  auto social = dataset.social;
  for (std::size_t f = 0; f < fakes.size(); ++f) {
    const auto fid = static_cast<UserId>(n + f);
    for (auto i : fakes[f].items) inter.push_back({fid, i});
    for (auto v : partners(fakes[f])) social.push_back({fid, v});
  }
  Dataset out = make_dataset(n + fakes.size(), dataset.item_count, std::move(inter),
                             std::move(social));
  out.item_original = dataset.item_original;
  out.user_original = dataset.user_original;
  std::int64_t next = 0;
  for (auto o : dataset.user_original) next = std::max(next, o + 1);
  for (std::size_t f = 0; f < fakes.size(); ++f) out.user_original.push_back(next++);
  return out;
}

Split extend_split(const Split& clean, const Dataset& polluted, std::size_t real_users) {
  require(clean.train_by_user.size() == real_users && polluted.user_count >= real_users,
          ErrorKind::InvalidInput, "extend_split: user counts disagree");
  Split s = clean;
  s.train_by_user.resize(polluted.user_count);
  s.test_by_user.resize(polluted.user_count);
  for (const auto& e : polluted.interactions) {
    if (e.a < real_users) continue;
    s.train.push_back(e);
    s.train_by_user[e.a].push_back(e.b);
  }
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace sra
