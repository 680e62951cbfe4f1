#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

namespace {

Dataset small_dataset(std::uint64_t seed) {
  SynthConfig c;
  c.users = 14;
  c.items = 20;
  c.interactions = 70;
  c.social_pairs = 18;
  c.communities = 2;
  return synthesize(c, seed);
}

}  // namespace

TEST_CASE("BPR gradients match central differences for every variant") {
  Rng pick(4);
  for (auto variant : {ModelVariant::MfBpr, ModelVariant::Sbpr, ModelVariant::SocialLgn,
                       ModelVariant::SageLite}) {
    CAPTURE(to_string(variant));
    for (int trial = 0; trial < 5; ++trial) {
      const Dataset ds = small_dataset(10 + trial);
      const Split split = split_interactions(ds, 0.2, trial);
      RecConfig rc;
      rc.variant = variant;
      rc.dim = 4;
      rc.depth = 2;
      RecModel model(rc, ds.user_count, ds.item_count, 100 + trial);
      model.attach(split.train_by_user, ds.friends());
      const auto u = static_cast<UserId>(pick.index(ds.user_count));
      const auto i = static_cast<ItemId>(pick.index(ds.item_count));
      const auto j = static_cast<ItemId>(pick.index(ds.item_count));
      const double l2 = 0.01;
      const Embeddings g = bpr_gradient(model, u, i, j, l2);
      // mutable_base() marks the cached view stale before every evaluation
      auto loss = [&] {
        model.mutable_base();
        return bpr_loss(model, u, i, j, l2);
      };
      CHECK(test::max_fd_error(loss, model.mutable_base().users.data, g.users.data) < 1e-4);
      CHECK(test::max_fd_error(loss, model.mutable_base().items.data, g.items.data) < 1e-4);
    }
  }
}

TEST_CASE("adversarial training with eps 0 is plain training bit for bit") {
  const Dataset ds = small_dataset(3);
  const Split split = split_interactions(ds, 0.2, 3);
  RecConfig rc;
  rc.dim = 8;
  TrainOptions opts;
  opts.epochs = 5;
  RecModel a(rc, ds.user_count, ds.item_count, 9);
  RecModel b(rc, ds.user_count, ds.item_count, 9);
  train(a, split, ds, opts);
  adversarial_train(b, split, ds, 0.0, opts);
  CHECK(a.base().users.data == b.base().users.data);
  CHECK(a.base().items.data == b.base().items.data);
  CHECK(kind_of([&] { adversarial_train(b, split, ds, -1.0, opts); }) ==
        ErrorKind::InvalidConfig);
}

TEST_CASE("adversarial perturbation changes training when eps is positive") {
  const Dataset ds = small_dataset(3);
  const Split split = split_interactions(ds, 0.2, 3);
  RecConfig rc;
  rc.dim = 8;
  TrainOptions opts;
  opts.epochs = 3;
  RecModel a(rc, ds.user_count, ds.item_count, 9);
  RecModel b(rc, ds.user_count, ds.item_count, 9);
  train(a, split, ds, opts);
  adversarial_train(b, split, ds, 0.5, opts);
  CHECK(a.base().users.data != b.base().users.data);
}

TEST_CASE("training lowers the loss") {
  const Dataset ds = small_dataset(6);
  const Split split = split_interactions(ds, 0.2, 6);
  RecModel model(RecConfig{}, ds.user_count, ds.item_count, 2);
  TrainOptions opts;
  opts.epochs = 40;
  const auto report = train(model, split, ds, opts);
  REQUIRE(report.epoch_loss.size() == 40);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
}

TEST_CASE("top-k excludes items and breaks ties by item id") {
  ScoreView v;
  v.final.users = Matrix(1, 1, 1.0);
  v.final.items = Matrix(5, 1);
  v.final.items.data = {0.5, 0.9, 0.5, 0.9, 0.1};
  const std::vector<ItemId> exclude{1};
  const auto top = v.topk(0, 3, exclude);
  CHECK(top.items == std::vector<ItemId>{3, 0, 2});
}

TEST_CASE("evasion with no fakes leaves the view unchanged") {
  const auto& w = test::world();
  const ScoreView v = inject_evasion(w.model, {});
  CHECK(v.final.users.data == w.model.view().final.users.data);
}

TEST_CASE("evasion moves a real user befriended by a fake") {
  const auto& w = test::world();
  FakeUser f;
  f.items = {0, 1, 2};
  f.pairs = {{0, 1}};
  const std::vector<FakeUser> fakes{f};
  const ScoreView v = inject_evasion(w.model, fakes);
  CHECK(v.final.users.rows == w.ds.user_count + 1);
  CHECK(v.final.items.rows == w.ds.item_count);
  double moved0 = 0.0;
  for (std::size_t d = 0; d < v.final.users.cols; ++d) {
    moved0 += std::abs(v.final.users(0, d) - w.model.view().final.users(0, d));
  }
  CHECK(moved0 > 0.0);
}

TEST_CASE("poison injection appends fakes and enforces the budget") {
  const auto& w = test::world();
  FakeUser f;
  f.items = {3, 4};
  f.pairs = {{0, 5}};
  Budget budget{1, 30};
  const Dataset polluted = inject_poison(w.ds, std::vector<FakeUser>{f}, budget);
  CHECK(polluted.user_count == w.ds.user_count + 1);
  CHECK(polluted.interactions.size() == w.ds.interactions.size() + 2);
  CHECK(polluted.social.size() == w.ds.social.size() + 4);
  const Split s = extend_split(w.split, polluted, w.ds.user_count);
  CHECK(s.train_by_user.back() == std::vector<ItemId>{3, 4});
  CHECK(w.ds.user_count == 120);  // clean data untouched

  Budget none{0, 30};
  CHECK(kind_of([&] { inject_poison(w.ds, std::vector<FakeUser>{f}, none); }) ==
        ErrorKind::BudgetViolation);
  Budget shortp{1, 1};
  CHECK(kind_of([&] { inject_poison(w.ds, std::vector<FakeUser>{f}, shortp); }) ==
        ErrorKind::BudgetViolation);
}

TEST_CASE("model archives restore identical scores") {
  const auto& w = test::world();
  RecModel back = RecModel::from_archive(w.model.to_archive());
  back.attach(w.split.train_by_user, w.ds.friends());
  CHECK(back.view().final.users.data == w.model.view().final.users.data);
}
