#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "sra/error.hpp"
#include "sra/marl.hpp"

namespace sra {
namespace detail {

std::vector<double> with_one_hot(std::span<const double> features, std::size_t n,
                                 std::optional<CommunityId> hot) {
  std::vector<double> x(features.begin(), features.end());
  x.resize(features.size() + n, 0.0);
  if (hot) x[features.size() + *hot] = 1.0;
  return x;
}

std::vector<char> community_mask(const ActionSpace& space, std::optional<CommunityId> forbidden,
                                 std::optional<UserId> avoid) {
  const auto& rosters = space.partition.rosters;
  std::vector<char> mask(rosters.size(), 0);
  for (std::size_t c = 0; c < rosters.size(); ++c) {
    std::size_t eligible = rosters[c].size();
    if (avoid && std::binary_search(rosters[c].begin(), rosters[c].end(), *avoid)) --eligible;
    mask[c] = eligible > 0 ? 1 : 0;
  }
  if (forbidden) {
    require(*forbidden < rosters.size(), ErrorKind::InvalidInput,
            "act_social: forbidden community out of range");
    mask[*forbidden] = 0;
  }
  return mask;
}

std::vector<char> roster_mask(const ActionSpace& space, CommunityId community,
                              std::optional<UserId> avoid) {
  const auto& roster = space.partition.rosters[community];
  std::vector<char> mask(space.max_roster(), 0);
  for (std::size_t k = 0; k < roster.size(); ++k) {
    mask[k] = (avoid && roster[k] == *avoid) ? 0 : 1;
  }
  return mask;
}

std::vector<double> flat_features(const FlatActor& actor, const AttackState& state) {
  const auto ids = state.social_ids();
  auto x = actor.user_encoder.pool(ids);
  const auto items = actor.item_encoder.pool(state.items);
  x.insert(x.end(), items.begin(), items.end());
  x.push_back(state.horizon == 0 ? 0.0
                                 : static_cast<double>(state.t) /
                                       static_cast<double>(state.horizon));
  return x;
}

std::vector<char> flat_user_mask(const ActionSpace& space, std::size_t users,
                                 std::optional<UserId> first) {
  std::vector<char> mask(users, 0);
  for (std::size_t u = 0; u < users; ++u) {
    mask[u] = space.roster_position(static_cast<UserId>(u)) >= 0 ? 1 : 0;
  }
  if (first) {
    mask[*first] = 0;
    if (space.cross_community) {
      const auto c = space.partition.assignment[*first];
      for (auto u : space.partition.rosters[c]) mask[u] = 0;
    }
  }
  return mask;
}

}  // namespace detail

namespace {

// Policy heads start near uniform.
constexpr double kHeadGain = 0.01;

DenseStack make_net(std::size_t in, const ActorShape& shape, std::size_t out, Rng& rng) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), shape.hidden.begin(), shape.hidden.end());
  dims.push_back(out);
  auto net = DenseStack::make(dims, Activation::Relu, rng);
  auto& last = net.mutable_layers().back();
  for (auto& w : last.weight.data) w *= kHeadGain;
  return net;
}

IdEncoder make_encoder(std::size_t rows, std::size_t dim, Rng& rng) {
  return IdEncoder{random_table(rows, dim, 0.1, rng)};
}

std::size_t sample(const std::vector<double>& p, Rng& rng) { return rng.categorical(p); }

}  // namespace

SocialActor make_social_actor(const ActionSpace& space, std::size_t users,
                              const ActorShape& shape, Rng& rng) {
  const std::size_t nc = space.community_count();
  const std::size_t obs = shape.embed_dim + 1;
  require(space.max_roster() > 0, ErrorKind::InvalidInput, "social actor: every roster is empty");
  SocialActor a;
  a.encoder = make_encoder(users, shape.embed_dim, rng);
  a.community_net = make_net(obs + nc, shape, nc, rng);
  a.user_net = make_net(obs + nc, shape, space.max_roster(), rng);
  auto& bias = a.community_net.mutable_layers().back().bias;
  for (std::size_t c = 0; c < nc; ++c) {
    const auto size = space.partition.rosters[c].size();
    bias[c] = size > 0 ? std::log(static_cast<double>(size)) : 0.0;
  }
  return a;
}

ItemActor make_item_actor(const ActionSpace& space, std::size_t items, const ActorShape& shape,
                          Rng& rng) {
  require(!space.item_pool.empty(), ErrorKind::InvalidInput, "item actor: empty pool");
  ItemActor a;
  a.encoder = make_encoder(items, shape.embed_dim, rng);
  a.net = make_net(shape.embed_dim + 1, shape, space.item_pool.size(), rng);
  return a;
}

FlatActor make_flat_actor(const ActionSpace& space, std::size_t users, std::size_t items,
                          const ActorShape& shape, Rng& rng) {
  require(!space.item_pool.empty(), ErrorKind::InvalidInput, "flat actor: empty pool");
  FlatActor a;
  a.user_encoder = make_encoder(users, shape.embed_dim, rng);
  a.item_encoder = make_encoder(items, shape.embed_dim, rng);
  a.net = make_net(2 * shape.embed_dim + 1, shape, users + space.item_pool.size(), rng);
  return a;
}

std::vector<double> community_probs(const SocialActor& actor, const Observation& obs,
                                    const ActionSpace& space,
                                    std::optional<CommunityId> forbidden,
                                    std::optional<UserId> avoid) {
  const std::size_t nc = space.community_count();
  const auto mask = detail::community_mask(space, forbidden, avoid);
  if (std::none_of(mask.begin(), mask.end(), [](char m) { return m != 0; })) {
    fail(ErrorKind::ConstraintInfeasible,
         forbidden ? "act_social: no community other than the forbidden one has eligible users"
                   : "act_social: no community has eligible users");
  }
  const auto logits = actor.community_net.forward(detail::with_one_hot(obs.features, nc, forbidden));
  return masked_softmax(logits, mask);
}

std::vector<double> roster_probs(const SocialActor& actor, const Observation& obs,
                                 const ActionSpace& space, CommunityId community,
                                 std::optional<UserId> avoid) {
  const std::size_t nc = space.community_count();
  require(community < nc, ErrorKind::InvalidInput, "act_social: community out of range");
  const auto logits =
      actor.user_net.forward(detail::with_one_hot(obs.features, nc, community));
  const auto mask = detail::roster_mask(space, community, avoid);
  require(std::any_of(mask.begin(), mask.end(), [](char m) { return m != 0; }),
          ErrorKind::ConstraintInfeasible, "act_social: roster has no eligible user");
  return masked_softmax(logits, mask);
}

SocialPick act_social(const SocialActor& actor, const Observation& obs, const ActionSpace& space,
                      std::optional<CommunityId> forbidden, Rng& rng,
                      std::optional<UserId> avoid) {
  const auto pc = community_probs(actor, obs, space, forbidden, avoid);
  const auto c = static_cast<CommunityId>(sample(pc, rng));
  const auto pu = roster_probs(actor, obs, space, c, avoid);
  const auto k = sample(pu, rng);
  return {c, space.partition.rosters[c][k], std::log(pc[c]) + std::log(pu[k])};
}

std::vector<double> item_probs(const ItemActor& actor, const Observation& obs,
                               const ActionSpace& space) {
  require(!space.item_pool.empty(), ErrorKind::InvalidInput, "act_item: empty pool");
  return masked_softmax(actor.net.forward(obs.features), {});
}

ItemPick act_item(const ItemActor& actor, const Observation& obs, const ActionSpace& space,
                  Rng& rng) {
  const auto p = item_probs(actor, obs, space);
  const auto k = sample(p, rng);
  return {space.item_pool[k], std::log(p[k])};
}

// ---------------------------------------------------------------------------

const char* to_string(AgentLayout layout) {
  switch (layout) {
    case AgentLayout::Multi: return "multi";
    case AgentLayout::Double: return "double";
    case AgentLayout::Flat: return "flat";
  }
  return "?";
}

std::vector<double> AgentSet::critic_input(const AttackState& state, double progress) const {
  std::vector<double> x;
  auto append = [&](const std::vector<double>& v) { x.insert(x.end(), v.begin(), v.end()); };
  switch (layout) {
    case AgentLayout::Multi:
      append(observe(state, AgentRole::Social1, social1.encoder).features);
      append(observe(state, AgentRole::Social2, social2.encoder).features);
      append(observe(state, AgentRole::Item, item.encoder).features);
      break;
    case AgentLayout::Double:
      append(observe(state, AgentRole::Social1, social1.encoder).features);
      append(observe(state, AgentRole::Item, item.encoder).features);
      break;
    case AgentLayout::Flat:
      append(detail::flat_features(flat, state));
      break;
  }
  x.push_back(progress);
  return x;
}

double AgentSet::value(const AttackState& state, double progress) const {
  return popart.denormalize(critic.forward(critic_input(state, progress))[0]);
}

TensorArchive AgentSet::to_archive() const {
  TensorArchive a;
  const std::vector<double> meta{static_cast<double>(layout), learn_items ? 1.0 : 0.0,
                                 popart.mean, popart.second, popart.rate, popart.eps};
  a.put("meta", 1, meta.size(), meta);
  store_stack(a, "critic", critic);
  if (layout == AgentLayout::Flat) {
    a.put("flat.user_encoder", flat.user_encoder.table);
    a.put("flat.item_encoder", flat.item_encoder.table);
    store_stack(a, "flat.net", flat.net);
    return a;
  }
  auto social = [&](const std::string& p, const SocialActor& s) {
    a.put(p + ".encoder", s.encoder.table);
    store_stack(a, p + ".community", s.community_net);
    store_stack(a, p + ".user", s.user_net);
  };
  social("social1", social1);
  if (layout == AgentLayout::Multi) social("social2", social2);
  a.put("item.encoder", item.encoder.table);
  store_stack(a, "item.net", item.net);
  return a;
}

AgentSet make_agents(AgentLayout layout, bool learn_items, const ActionSpace& space,
                     std::size_t users, std::size_t items, const ActorShape& shape,
                     const PpoConfig& ppo, std::uint64_t seed) {
  const SeedStream root = SeedStream(seed).child("policy-init");
  AgentSet s;
  s.layout = layout;
  s.learn_items = learn_items && layout != AgentLayout::Flat;
  const std::size_t obs = shape.embed_dim + 1;
  std::size_t critic_in = 1;
  if (layout == AgentLayout::Flat) {
    auto rng = root.child("flat").rng();
    s.flat = make_flat_actor(space, users, items, shape, rng);
    critic_in += 2 * shape.embed_dim + 1;
  } else {
    auto r1 = root.child("social-1").rng();
    s.social1 = make_social_actor(space, users, shape, r1);
    critic_in += obs;
    if (layout == AgentLayout::Multi) {
      auto r2 = root.child("social-2").rng();
      s.social2 = make_social_actor(space, users, shape, r2);
      critic_in += obs;
    }
    auto ri = root.child("item").rng();
    s.item = make_item_actor(space, items, shape, ri);
    critic_in += obs;
  }
  auto rc = root.child("critic").rng();
  s.critic = make_net(critic_in, shape, 1, rc);
  for (auto* opt : {&s.optim.social1, &s.optim.social2, &s.optim.item, &s.optim.flat,
                    &s.optim.critic}) {
    opt->config().lr = ppo.lr;
  }
  return s;
}

JointAction act(const AgentSet& agents, const AttackState& state, const ActionSpace& space,
                Rng& rng) {
  JointAction a;
  const std::size_t pool = space.item_pool.size();
  require(pool > 0, ErrorKind::InvalidInput, "act: empty item pool");
  if (agents.layout == AgentLayout::Flat) {
    const auto& f = agents.flat;
    const std::size_t n = space.partition.assignment.size();
    const auto logits = f.net.forward(detail::flat_features(f, state));
    std::span<const double> ul(logits.data(), n);
    std::span<const double> il(logits.data() + n, pool);
    const auto p1 = masked_softmax(ul, detail::flat_user_mask(space, n, std::nullopt));
    a.u1 = static_cast<UserId>(sample(p1, rng));
    const auto m2 = detail::flat_user_mask(space, n, a.u1);
    require(std::any_of(m2.begin(), m2.end(), [](char m) { return m != 0; }),
            ErrorKind::ConstraintInfeasible, "act: no eligible second pair member");
    const auto p2 = masked_softmax(ul, m2);
    a.u2 = static_cast<UserId>(sample(p2, rng));
    const auto pi = masked_softmax(il, {});
    const auto k = sample(pi, rng);
    a.item = space.item_pool[k];
    a.c1 = space.partition.assignment[a.u1];
    a.c2 = space.partition.assignment[a.u2];
    a.logp_social1 = std::log(p1[a.u1]) + std::log(p2[a.u2]);
    a.logp_item = std::log(pi[k]);
    return a;
  }
  const auto o1 = observe(state, AgentRole::Social1, agents.social1.encoder);
  const auto first = act_social(agents.social1, o1, space, std::nullopt, rng);
  std::optional<CommunityId> forbidden;
  if (space.cross_community) forbidden = first.community;
  SocialPick second;
  if (agents.layout == AgentLayout::Multi) {
    const auto o2 = observe(state, AgentRole::Social2, agents.social2.encoder);
    second = act_social(agents.social2, o2, space, forbidden, rng, first.user);
    a.logp_social1 = first.logp;
    a.logp_social2 = second.logp;
  } else {
    second = act_social(agents.social1, o1, space, forbidden, rng, first.user);
    a.logp_social1 = first.logp + second.logp;
  }
  a.c1 = first.community;
  a.u1 = first.user;
  a.c2 = second.community;
  a.u2 = second.user;
  if (agents.learn_items) {
    const auto oi = observe(state, AgentRole::Item, agents.item.encoder);
    const auto pick = act_item(agents.item, oi, space, rng);
    a.item = pick.item;
    a.logp_item = pick.logp;
  } else {
    a.item = space.item_pool[rng.index(pool)];
    a.logp_item = -std::log(static_cast<double>(pool));
  }
  return a;
}

}  // namespace sra
