#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

TEST_CASE("ranking metrics on hand-computed lists") {
  const std::vector<ItemId> ranked{4, 2, 9, 7};
  const std::vector<ItemId> rel{9, 1};
  // one hit at rank 3; ideal places two hits at ranks 1 and 2
  const double idcg = 1.0 + 1.0 / std::log2(3.0);
  CHECK(ndcg_at_k(ranked, rel, 4) == Approx((1.0 / std::log2(4.0)) / idcg));
  CHECK(recall_at_k(ranked, rel, 4) == Approx(0.5));
  CHECK(precision_at_k(ranked, rel, 4) == Approx(0.25));
  CHECK(ndcg_at_k(ranked, rel, 2) == 0.0);
  CHECK(ndcg_at_k(std::vector<ItemId>{9, 1}, rel, 2) == Approx(1.0));
}

TEST_CASE("empty relevant sets are undefined") {
  const std::vector<ItemId> ranked{1, 2};
  CHECK(kind_of([&] { ndcg_at_k(ranked, {}, 2); }) == ErrorKind::UndefinedMetric);
  CHECK(kind_of([&] { recall_at_k(ranked, {}, 2); }) == ErrorKind::UndefinedMetric);
}

TEST_CASE("cold hit ratio averages over spies") {
  std::vector<RankedList> lists(2);
  lists[0].items = {0, 1, 2, 3};
  lists[1].items = {4, 5, 6, 7};
  std::vector<char> cold(8, 0);
  cold[1] = cold[2] = cold[7] = 1;
  CHECK(cold_hit_reward(lists, cold, 4) == Approx((2.0 / 4 + 1.0 / 4) / 2));
}

TEST_CASE("evaluate_attack arithmetic") {
  MetricsReport clean, attacked, base;
  clean.values["NDCG@10"] = 0.1567;
  attacked.values["NDCG@10"] = 0.1184;
  base.values["NDCG@10"] = 0.1472;
  const auto imp = evaluate_attack(clean, attacked, base);
  CHECK(imp.drop_vs_clean.at("NDCG@10") == Approx(0.244).epsilon(0.002));
  CHECK(imp.gain_vs_baseline.at("NDCG@10") == Approx(0.195).epsilon(0.005));

  const auto same = evaluate_attack(clean, clean, clean);
  CHECK(same.drop_vs_clean.at("NDCG@10") == 0.0);
  CHECK(same.gain_vs_baseline.at("NDCG@10") == 0.0);

  MetricsReport zero;
  zero.values["NDCG@10"] = 0.0;
  const auto undef = evaluate_attack(zero, attacked, base);
  CHECK(undef.undefined.size() == 1);
  CHECK(undef.drop_vs_clean.empty());
}

TEST_CASE("reports round-trip through JSON") {
  std::vector<std::vector<ItemId>> rankings{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20},
                                            {20, 19, 18, 17, 16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1}};
  std::vector<std::vector<ItemId>> test{{3}, {}};
  const auto r = evaluate_rankings(rankings, test, "x");
  CHECK(r.users == 1);
  CHECK(r.at("Recall", 5) == 1.0);
  const auto back = MetricsReport::from_json(r.to_json());
  CHECK(back.values == r.values);
  CHECK(back.to_csv() == r.to_csv());
}
