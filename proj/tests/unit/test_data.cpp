#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace sra;
using sra::test::kind_of;

TEST_CASE("load_dataset remaps raw ids densely and symmetrizes social links") {
  std::istringstream inter("user item\n10 500\n10 700\n30 500\n# comment\n\n30 500\n");
  std::istringstream social("20 10\n10 10\n");
  const Dataset d = load_dataset(inter, social);
  CHECK(d.user_count == 3);  // 10, 20, 30
  CHECK(d.item_count == 2);
  CHECK(d.interactions.size() == 3);
  CHECK(d.social == std::vector<Edge>{{0, 1}, {1, 0}});
  CHECK(d.user_original == std::vector<std::int64_t>{10, 20, 30});
  CHECK(d.item_original == std::vector<std::int64_t>{500, 700});
}

TEST_CASE("load_dataset rejects malformed records and empty sources") {
  std::istringstream bad("1 2\n1 x\n");
  std::istringstream soc("");
  CHECK(kind_of([&] { load_dataset(bad, soc); }) == ErrorKind::Parse);
  std::istringstream empty("");
  std::istringstream soc2("");
  CHECK(kind_of([&] { load_dataset(empty, soc2); }) == ErrorKind::InvalidInput);
}

TEST_CASE("split partitions the interactions and depends only on the seed") {
  const Dataset ds = synthesize(test::tiny_synth(), 5);
  const Split a = split_interactions(ds, 0.25, 9);
  const Split b = split_interactions(ds, 0.25, 9);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::vector<Edge> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  CHECK(all == ds.interactions);
  for (const auto& e : a.test) {
    CHECK_FALSE(std::binary_search(a.train.begin(), a.train.end(), e));
  }
  CHECK(kind_of([&] { split_interactions(ds, 1.0, 1); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { split_interactions(ds, 0.0, 1); }) == ErrorKind::InvalidInput);
}

TEST_CASE("cold and popular pools follow popularity order") {
  const std::vector<std::size_t> counts{5, 0, 3, 3, 9, 1, 0, 2, 8, 4};
  const auto cold = cold_start_pool(counts, 0.3);
  CHECK(cold.items == std::vector<ItemId>{1, 6, 5});
  const auto pop = popular_pool(counts, 3);
  CHECK(pop.items == std::vector<ItemId>{4, 8, 0});
  const auto mask = cold.mask(counts.size());
  CHECK(std::count(mask.begin(), mask.end(), 1) == 3);
  CHECK(cold_start_pool(counts, 0.05).items.empty());
}

TEST_CASE("spies are distinct, reproducible and bounded by the user count") {
  const Dataset ds = synthesize(test::tiny_synth(), 5);
  const auto s1 = select_spies(ds, 50, 4);
  const auto s2 = select_spies(ds, 50, 4);
  CHECK(s1.users == s2.users);
  std::set<UserId> uniq(s1.users.begin(), s1.users.end());
  CHECK(uniq.size() == 50);
  CHECK(kind_of([&] { select_spies(ds, ds.user_count + 1, 4); }) == ErrorKind::InvalidInput);
}

TEST_CASE("the LastFM analog matches the dataset statistics exactly") {
  const Dataset ds = synthesize(lastfm_analog(), 7);
  CHECK(ds.user_count == 1892);
  CHECK(ds.item_count == 17632);
  CHECK(ds.interactions.size() == 92834);
  CHECK(ds.social.size() == 25434);
  for (const auto& e : ds.social) CHECK_FALSE(e.a == e.b);
}

TEST_CASE("written dataset files load back to the same graph") {
  const Dataset ds = synthesize(test::tiny_synth(), 2);
  std::ostringstream fi, fs;
  write_interactions(fi, ds);
  write_social(fs, ds);
  std::istringstream ii(fi.str()), is(fs.str());
  const Dataset back = load_dataset(ii, is);
  CHECK(back.interactions == ds.interactions);
  CHECK(back.social == ds.social);
}
