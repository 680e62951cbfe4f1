#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sra/data.hpp"
#include "sra/error.hpp"
#include "sra/rng.hpp"

namespace sra {
namespace {

struct RawPair {
  std::int64_t a;
  std::int64_t b;
};

bool parse_int(std::string_view tok, std::int64_t& out) {
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ',' ||
                               line[i] == '\r')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != ',' &&
           line[j] != '\r') {
      ++j;
    }
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

// Two or three delimited fields per record; the third (weight) is ignored. A
// non-numeric first record is accepted as a column header (HetRec files
// ship one); any later malformed record is a parse error.
std::vector<RawPair> read_pairs(std::istream& in, const char* what) {
  std::vector<RawPair> out;
  std::string line;
  std::size_t lineno = 0;
  bool seen_record = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    const auto first = sv.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    if (sv[first] == '#') continue;
    auto toks = tokenize(sv);
    RawPair p{};
    const bool ok = (toks.size() == 2 || toks.size() == 3) && parse_int(toks[0], p.a) &&
                    parse_int(toks[1], p.b);
    if (!ok) {
      if (!seen_record && !toks.empty() && !parse_int(toks[0], p.a)) {
        seen_record = true;
        continue;
      }
      std::ostringstream msg;
      msg << what << " line " << lineno << ": malformed record '" << line << "'";
      fail(ErrorKind::Parse, msg.str());
    }
    seen_record = true;
    out.push_back(p);
  }
  return out;
}

void sort_unique(std::vector<Edge>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<std::size_t> Dataset::popularity() const {
  std::vector<std::size_t> counts(item_count, 0);
  for (const auto& e : interactions) ++counts[e.b];
  return counts;
}

std::vector<std::vector<UserId>> Dataset::friends() const {
  std::vector<std::vector<UserId>> adj(user_count);
  for (const auto& e : social) adj[e.a].push_back(e.b);
  return adj;
}

nlohmann::json Dataset::summary() const {
  const double n = static_cast<double>(user_count);
  const double m = static_cast<double>(item_count);
  nlohmann::json j;
  j["users"] = user_count;
  j["items"] = item_count;
  j["interactions"] = interactions.size();
  j["interaction_density"] = n > 0 && m > 0 ? interactions.size() / (n * m) : 0.0;
  j["social_relations"] = social.size();
  j["social_pairs"] = undirected_social_count();
  j["social_density"] = n > 0 ? social.size() / (n * n) : 0.0;
  j["digest"] = digest();
  return j;
}

std::string Dataset::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(user_count);
  mix(item_count);
  for (const auto& e : interactions) mix((std::uint64_t{e.a} << 32) | e.b);
  mix(0xffffffffffffffffULL);
  for (const auto& e : social) mix((std::uint64_t{e.a} << 32) | e.b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset make_dataset(std::size_t users, std::size_t items, std::vector<Edge> interactions,
                     std::vector<Edge> social) {
  Dataset d;
  d.user_count = users;
  d.item_count = items;
  for (const auto& e : interactions) {
    require(e.a < users && e.b < items, ErrorKind::InvalidInput,
            "interaction id out of range");
  }
  sort_unique(interactions);
  d.interactions = std::move(interactions);
  std::vector<Edge> sym;
  sym.reserve(social.size() * 2);
  for (const auto& e : social) {
    require(e.a < users && e.b < users, ErrorKind::InvalidInput, "social id out of range");
    if (e.a == e.b) continue;
    sym.push_back({e.a, e.b});
    sym.push_back({e.b, e.a});
  }
  sort_unique(sym);
  d.social = std::move(sym);
  d.user_original.resize(users);
  d.item_original.resize(items);
  std::iota(d.user_original.begin(), d.user_original.end(), 0);
  std::iota(d.item_original.begin(), d.item_original.end(), 0);
  return d;
}

Dataset load_dataset(std::istream& interactions, std::istream& social) {
  const auto inter = read_pairs(interactions, "interactions");
  require(!inter.empty(), ErrorKind::InvalidInput, "interaction source is empty");
  const auto soc = read_pairs(social, "social");

  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;
  for (const auto& p : inter) {
    users.push_back(p.a);
    items.push_back(p.b);
  }
  for (const auto& p : soc) {
    users.push_back(p.a);
    users.push_back(p.b);
  }
  auto uniq = [](std::vector<std::int64_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(users);
  uniq(items);
  auto lookup = [](const std::vector<std::int64_t>& v, std::int64_t id) {
    return static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), id) - v.begin());
  };

  std::vector<Edge> ie;
  ie.reserve(inter.size());
  for (const auto& p : inter) ie.push_back({lookup(users, p.a), lookup(items, p.b)});
  std::vector<Edge> se;
  se.reserve(soc.size());
  for (const auto& p : soc) se.push_back({lookup(users, p.a), lookup(users, p.b)});

  Dataset d = make_dataset(users.size(), items.size(), std::move(ie), std::move(se));
  d.user_original = std::move(users);
  d.item_original = std::move(items);
  return d;
}

Dataset load_dataset_files(const std::filesystem::path& interactions,
                           const std::filesystem::path& social) {
  std::ifstream fi(interactions);
  require(fi.good(), ErrorKind::InvalidInput, "cannot open " + interactions.string());
  std::ifstream fs(social);
  require(fs.good(), ErrorKind::InvalidInput, "cannot open " + social.string());
  return load_dataset(fi, fs);
}

std::vector<std::size_t> Split::train_popularity(std::size_t item_count) const {
  std::vector<std::size_t> counts(item_count, 0);
  for (const auto& e : train) ++counts[e.b];
  return counts;
}

Split split_interactions(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::InvalidInput,
          "test_fraction must lie in (0,1)");
  require(!dataset.interactions.empty(), ErrorKind::InvalidInput, "dataset is empty");
  Split s;
  s.train_by_user.resize(dataset.user_count);
  s.test_by_user.resize(dataset.user_count);
  std::vector<std::vector<ItemId>> by_user(dataset.user_count);
  for (const auto& e : dataset.interactions) by_user[e.a].push_back(e.b);

  const SeedStream root(seed);
  for (std::size_t u = 0; u < dataset.user_count; ++u) {
    auto items = by_user[u];
    const auto n_test =
        static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(items.size())));
    Rng rng = root.child(u).rng();
    // Partial Fisher-Yates: the first n_test slots become the holdout.
    for (std::size_t i = 0; i < n_test; ++i) {
      const std::size_t j = i + rng.index(items.size() - i);
      std::swap(items[i], items[j]);
    }
    std::vector<ItemId> test(items.begin(), items.begin() + n_test);
    std::vector<ItemId> train(items.begin() + n_test, items.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    for (auto i : train) s.train.push_back({static_cast<std::uint32_t>(u), i});
    for (auto i : test) s.test.push_back({static_cast<std::uint32_t>(u), i});
    s.train_by_user[u] = std::move(train);
    s.test_by_user[u] = std::move(test);
  }
  return s;
}

std::vector<char> ItemPool::mask(std::size_t item_count) const {
  std::vector<char> m(item_count, 0);
  for (auto i : items) m[i] = 1;
  return m;
}

ItemPool cold_start_pool(const std::vector<std::size_t>& counts, double quantile) {
  require(quantile > 0.0 && quantile <= 1.0, ErrorKind::InvalidInput,
          "cold-start quantile must lie in (0,1]");
  std::vector<ItemId> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId x, ItemId y) { return counts[x] < counts[y]; });
  const auto keep =
      static_cast<std::size_t>(std::floor(quantile * static_cast<double>(counts.size())));
  order.resize(keep);
  ItemPool pool;
  pool.items = std::move(order);
  pool.rule = "cold-start bottom " + std::to_string(quantile);
  return pool;
}

ItemPool popular_pool(const std::vector<std::size_t>& counts, std::size_t top_k) {
  require(top_k >= 1 && top_k <= counts.size(), ErrorKind::InvalidInput,
          "popular pool size out of range");
  std::vector<ItemId> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId x, ItemId y) { return counts[x] > counts[y]; });
  order.resize(top_k);
  ItemPool pool;
  pool.items = std::move(order);
  pool.rule = "popular top " + std::to_string(top_k);
  return pool;
}

SpySet select_spies(const Dataset& dataset, std::size_t count, std::uint64_t seed) {
  require(count <= dataset.user_count, ErrorKind::InvalidInput,
          "spy count exceeds user count");
  std::vector<UserId> all(dataset.user_count);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  return SpySet{std::move(all)};
}

void write_interactions(std::ostream& out, const Dataset& dataset) {
  for (const auto& e : dataset.interactions) out << e.a << '\t' << e.b << '\n';
}

void write_social(std::ostream& out, const Dataset& dataset) {
  for (const auto& e : dataset.social) out << e.a << '\t' << e.b << '\n';
}

void write_dataset_files(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::ofstream fi(dir / "interactions.tsv");
  write_interactions(fi, dataset);
  std::ofstream fs(dir / "social.tsv");
  write_social(fs, dataset);
}

}  // namespace sra
