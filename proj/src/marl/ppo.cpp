#include <algorithm>
#include <array>
#include <cmath>

#include "internal.hpp"
#include "sra/error.hpp"
#include "sra/marl.hpp"

namespace sra {

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double gamma, double lambda) {
  require(rewards.size() == values.size(), ErrorKind::InvalidInput,
          "gae: rewards and values differ in length");
  const std::size_t n = rewards.size();
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    r.advantages[i] = running;
    r.returns[i] = running + values[i];
    next_value = values[i];
  }
  return r;
}

double PopArtStats::stddev() const { return std::sqrt(std::max(second - mean * mean, eps)); }

std::vector<double> popart_normalize(PopArtStats& stats, std::span<const double> returns,
                                     DenseLayer& output) {
  if (returns.empty()) return {};
  const double old_mean = stats.mean;
  const double old_std = stats.stddev();
  double m1 = 0.0;
  double m2 = 0.0;
  for (double r : returns) {
    m1 += r;
    m2 += r * r;
  }
  m1 /= static_cast<double>(returns.size());
  m2 /= static_cast<double>(returns.size());
  stats.mean = (1.0 - stats.rate) * stats.mean + stats.rate * m1;
  stats.second = (1.0 - stats.rate) * stats.second + stats.rate * m2;
  const double new_std = stats.stddev();
  for (auto& w : output.weight.data) w *= old_std / new_std;
  for (auto& b : output.bias) b = (old_std * b + old_mean - stats.mean) / new_std;
  std::vector<double> targets;
  targets.reserve(returns.size());
  for (double r : returns) targets.push_back(stats.normalize(r));
  return targets;
}

void RolloutBuffer::clear() {
  steps.clear();
  returns.clear();
  advantages.clear();
  targets.clear();
}

void finish_buffer(AgentSet& agents, RolloutBuffer& buffer, const PpoConfig& config) {
  const std::size_t n = buffer.steps.size();
  buffer.returns.assign(n, 0.0);
  buffer.advantages.assign(n, 0.0);
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && !buffer.steps[end].done) ++end;
    end = std::min(end + 1, n);
    std::vector<double> r;
    std::vector<double> v;
    for (std::size_t i = begin; i < end; ++i) {
      r.push_back(buffer.steps[i].reward);
      v.push_back(buffer.steps[i].value);
    }
    const auto g = gae(r, v, 0.0, config.gamma, config.lambda);
    for (std::size_t i = begin; i < end; ++i) {
      buffer.advantages[i] = g.advantages[i - begin];
      buffer.returns[i] = g.returns[i - begin];
    }
    begin = end;
  }
  buffer.targets = popart_normalize(agents.popart, buffer.returns, agents.critic.mutable_layers().back());
  const double sd = agents.popart.stddev();
  for (auto& a : buffer.advantages) a /= sd;
  for (double a : buffer.advantages) {
    require(std::isfinite(a), ErrorKind::TrainingDivergence, "finish_buffer: non-finite advantage");
  }
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

// d(objective)/d(log pi) of the clipped surrogate; zero where the clipped
// branch is the active minimum.
double surrogate_slope(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return ratio * advantage <= clipped * advantage ? ratio * advantage : 0.0;
}

struct SocialGrads {
  Matrix encoder;
  StackGrads community;
  StackGrads user;
};

struct ItemGrads {
  Matrix encoder;
  StackGrads net;
};

struct FlatGrads {
  Matrix user_encoder;
  Matrix item_encoder;
  StackGrads net;
};

SocialGrads zero_social(const SocialActor& a) {
  return {Matrix(a.encoder.table.rows, a.encoder.table.cols), a.community_net.zero_grads(),
          a.user_net.zero_grads()};
}

// Softmax head: adds dL/dz for L = -lp_coef * log p[chosen] - h_coef * H(p)
// into `out` over unmasked entries (p is zero where masked).
void head_grad(const std::vector<double>& p, std::size_t chosen, double lp_coef, double h_coef,
               std::vector<double>& out) {
  const double h = entropy(p);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    const double dlp = (j == chosen ? 1.0 : 0.0) - p[j];
    const double dh = -p[j] * (std::log(p[j]) + h);
    out[j] += -lp_coef * dlp - h_coef * dh;
  }
}

struct PickEval {
  double logp = 0.0;
  double entropy = 0.0;  // joint (community, user) entropy
};

// Log-probability and joint entropy of one social pick. With `grads`, adds the
// gradient of  -lp_coef * logp - h_coef * H  into the actor's gradients and
// d/d(observation features) into `obs_grad`.
PickEval social_pick(const SocialActor& actor, const std::vector<double>& obs,
                     const ActionSpace& space, std::optional<CommunityId> forbidden,
                     std::optional<UserId> avoid, CommunityId c, UserId u, double lp_coef,
                     double h_coef, SocialGrads* grads, std::vector<double>& obs_grad) {
  const std::size_t nc = space.community_count();
  const std::size_t dim = obs.size();
  DenseStack::Cache cc;
  const auto zc = actor.community_net.forward(detail::with_one_hot(obs, nc, forbidden),
                                              grads ? &cc : nullptr);
  const auto pc = masked_softmax(zc, detail::community_mask(space, forbidden, avoid));
  require(pc[c] > 0.0, ErrorKind::InvalidAction, "ppo: recorded community is not selectable");

  std::vector<DenseStack::Cache> uc(nc);
  std::vector<std::vector<double>> q(nc);
  std::vector<double> hc(nc, 0.0);
  double joint = 0.0;
  for (std::size_t k = 0; k < nc; ++k) {
    if (pc[k] <= 0.0) continue;
    const auto cid = static_cast<CommunityId>(k);
    const auto zu = actor.user_net.forward(detail::with_one_hot(obs, nc, cid),
                                           grads ? &uc[k] : nullptr);
    q[k] = masked_softmax(zu, detail::roster_mask(space, cid, avoid));
    hc[k] = entropy(q[k]);
    joint += pc[k] * (hc[k] - std::log(pc[k]));
  }
  const auto pos = space.roster_position(u);
  require(pos >= 0 && space.partition.assignment[u] == c && q[c][pos] > 0.0,
          ErrorKind::InvalidAction, "ppo: recorded user is not selectable");
  PickEval out{std::log(pc[c]) + std::log(q[c][pos]), joint};
  if (!grads) return out;

  auto add_obs = [&](const std::vector<double>& g) {
    for (std::size_t d = 0; d < dim; ++d) obs_grad[d] += g[d];
  };
  std::vector<double> gzc(nc, 0.0);
  for (std::size_t j = 0; j < nc; ++j) {
    if (pc[j] <= 0.0) continue;
    const double dlp = (j == c ? 1.0 : 0.0) - pc[j];
    const double dh = pc[j] * ((hc[j] - std::log(pc[j])) - joint);
    gzc[j] = -lp_coef * dlp - h_coef * dh;
  }
  add_obs(actor.community_net.backward(cc, gzc, grads->community));
  for (std::size_t k = 0; k < nc; ++k) {
    if (pc[k] <= 0.0) continue;
    std::vector<double> gzu(q[k].size(), 0.0);
    head_grad(q[k], 0, 0.0, h_coef * pc[k], gzu);
    if (k == c) head_grad(q[k], static_cast<std::size_t>(pos), lp_coef, 0.0, gzu);
    add_obs(actor.user_net.backward(uc[k], gzu, grads->user));
  }
  return out;
}

struct AgentTerms {
  double logp = 0.0;
  double entropy = 0.0;
};

// One step's per-agent evaluation. `coef` holds, per agent, the surrogate
// slope; when `accumulate` is set the gradients of
//   -(slope * logp + entropy_coef * H) / batch
// are added to the gradient buffers.
struct Workspace {
  SocialGrads s1, s2;
  ItemGrads item;
  FlatGrads flat;
};

std::vector<double> slice(const std::vector<double>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Index 0: social1 (or flat), 1: social2, 2: item.
std::array<AgentTerms, 3> evaluate(const AgentSet& agents, const StepRecord& step,
                                   const ActionSpace& space, const std::array<double, 3>& slope,
                                   double h_coef, Workspace* ws) {
  std::array<AgentTerms, 3> t{};
  const auto& st = step.state;
  const auto& a = step.action;
  std::optional<CommunityId> forbidden;
  if (space.cross_community) forbidden = a.c1;

  if (agents.layout == AgentLayout::Flat) {
    const auto& f = agents.flat;
    const std::size_t n = space.partition.assignment.size();
    const std::size_t pool = space.item_pool.size();
    const auto x = detail::flat_features(f, st);
    DenseStack::Cache cache;
    const auto z = f.net.forward(x, ws ? &cache : nullptr);
    std::span<const double> ul(z.data(), n);
    std::span<const double> il(z.data() + n, pool);
    const auto p1 = masked_softmax(ul, detail::flat_user_mask(space, n, std::nullopt));
    const auto p2 = masked_softmax(ul, detail::flat_user_mask(space, n, a.u1));
    const auto pi = masked_softmax(il, {});
    const auto slot = static_cast<std::size_t>(space.item_slot[a.item]);
    require(p1[a.u1] > 0.0 && p2[a.u2] > 0.0, ErrorKind::InvalidAction,
            "ppo: recorded pair is not selectable");
    t[0].logp = std::log(p1[a.u1]) + std::log(p2[a.u2]) + std::log(pi[slot]);
    t[0].entropy = entropy(p1) + entropy(p2) + entropy(pi);
    if (ws) {
      std::vector<double> gu(n, 0.0);
      std::vector<double> gi(pool, 0.0);
      head_grad(p1, a.u1, slope[0], h_coef, gu);
      head_grad(p2, a.u2, slope[0], h_coef, gu);
      head_grad(pi, slot, slope[0], h_coef, gi);
      gu.insert(gu.end(), gi.begin(), gi.end());
      const auto gx = f.net.backward(cache, gu, ws->flat.net);
      const std::size_t d = f.user_encoder.dim();
      const auto ids = st.social_ids();
      f.user_encoder.backward(ids, std::span<const double>(gx.data(), d), ws->flat.user_encoder);
      f.item_encoder.backward(st.items, std::span<const double>(gx.data() + d, d),
                              ws->flat.item_encoder);
    }
    return t;
  }

  const auto ids = st.social_ids();
  {
    const auto o = observe(st, AgentRole::Social1, agents.social1.encoder).features;
    std::vector<double> og(o.size(), 0.0);
    SocialGrads* g = ws ? &ws->s1 : nullptr;
    auto e1 = social_pick(agents.social1, o, space, std::nullopt, std::nullopt, a.c1, a.u1,
                          slope[0], h_coef, g, og);
    t[0].logp = e1.logp;
    t[0].entropy = e1.entropy;
    if (agents.layout == AgentLayout::Double) {
      auto e2 = social_pick(agents.social1, o, space, forbidden, a.u1, a.c2, a.u2, slope[0],
                            h_coef, g, og);
      t[0].logp += e2.logp;
      t[0].entropy += e2.entropy;
    }
    if (ws) agents.social1.encoder.backward(ids, slice(og, og.size() - 1), ws->s1.encoder);
  }
  if (agents.layout == AgentLayout::Multi) {
    const auto o = observe(st, AgentRole::Social2, agents.social2.encoder).features;
    std::vector<double> og(o.size(), 0.0);
    auto e = social_pick(agents.social2, o, space, forbidden, a.u1, a.c2, a.u2, slope[1], h_coef,
                         ws ? &ws->s2 : nullptr, og);
    t[1].logp = e.logp;
    t[1].entropy = e.entropy;
    if (ws) agents.social2.encoder.backward(ids, slice(og, og.size() - 1), ws->s2.encoder);
  }
  if (agents.learn_items) {
    const auto& it = agents.item;
    const auto o = observe(st, AgentRole::Item, it.encoder).features;
    DenseStack::Cache cache;
    const auto z = it.net.forward(o, ws ? &cache : nullptr);
    const auto p = masked_softmax(z, {});
    const auto slot = static_cast<std::size_t>(space.item_slot[a.item]);
    t[2].logp = std::log(p[slot]);
    t[2].entropy = entropy(p);
    if (ws) {
      std::vector<double> gz(p.size(), 0.0);
      head_grad(p, slot, slope[2], h_coef, gz);
      const auto gx = it.net.backward(cache, gz, ws->item.net);
      it.encoder.backward(st.items, slice(gx, gx.size() - 1), ws->item.encoder);
    }
  }
  return t;
}

std::array<double, 3> old_logps(const AgentSet& agents, const JointAction& a) {
  if (agents.layout == AgentLayout::Flat) return {a.logp_social1 + a.logp_item, 0.0, 0.0};
  return {a.logp_social1, a.logp_social2, a.logp_item};
}

std::array<bool, 3> active_agents(const AgentSet& agents) {
  switch (agents.layout) {
    case AgentLayout::Flat: return {true, false, false};
    case AgentLayout::Double: return {true, false, agents.learn_items};
    case AgentLayout::Multi: return {true, true, agents.learn_items};
  }
  return {false, false, false};
}

double critic_loss(const AgentSet& agents, const RolloutBuffer& buffer) {
  double loss = 0.0;
  for (std::size_t i = 0; i < buffer.steps.size(); ++i) {
    const auto x = agents.critic_input(buffer.steps[i].state, buffer.steps[i].progress);
    const double e = agents.critic.forward(x)[0] - buffer.targets[i];
    loss += e * e;
  }
  return loss / static_cast<double>(std::max<std::size_t>(1, buffer.steps.size()));
}

void check_finite(const std::vector<std::span<const double>>& blocks) {
  for (const auto& b : blocks) {
    for (double v : b) {
      if (!std::isfinite(v)) fail(ErrorKind::TrainingDivergence, "ppo_update: non-finite gradient");
    }
  }
}

std::vector<std::span<double>> social_params(SocialActor& a) {
  std::vector<std::span<double>> p{a.encoder.table.data};
  for (auto s : a.community_net.parameters()) p.push_back(s);
  for (auto s : a.user_net.parameters()) p.push_back(s);
  return p;
}

std::vector<std::span<const double>> social_grads(const SocialGrads& g) {
  std::vector<std::span<const double>> p{g.encoder.data};
  for (auto s : g.community.spans()) p.push_back(s);
  for (auto s : g.user.spans()) p.push_back(s);
  return p;
}

}  // namespace

ActionLogProbs log_probs(const AgentSet& agents, const AttackState& state,
                         const JointAction& action, const ActionSpace& space) {
  StepRecord step;
  step.state = state;
  step.action = action;
  const auto t = evaluate(agents, step, space, {0.0, 0.0, 0.0}, 0.0, nullptr);
  return {t[0].logp, t[1].logp, t[2].logp};
}

std::vector<std::span<double>> actor_parameters(AgentSet& agents) {
  std::vector<std::span<double>> p;
  if (agents.layout == AgentLayout::Flat) {
    p = {agents.flat.user_encoder.table.data, agents.flat.item_encoder.table.data};
    for (auto s : agents.flat.net.parameters()) p.push_back(s);
    return p;
  }
  p = social_params(agents.social1);
  if (agents.layout == AgentLayout::Multi) {
    for (auto s : social_params(agents.social2)) p.push_back(s);
  }
  if (agents.learn_items) {
    p.push_back(agents.item.encoder.table.data);
    for (auto s : agents.item.net.parameters()) p.push_back(s);
  }
  return p;
}

ActorObjective actor_objective(const AgentSet& agents, const StepRecord& step,
                               const ActionSpace& space, const std::array<double, 3>& weights,
                               double entropy_coef) {
  Workspace ws;
  if (agents.layout == AgentLayout::Flat) {
    ws.flat = {Matrix(agents.flat.user_encoder.table.rows, agents.flat.user_encoder.dim()),
               Matrix(agents.flat.item_encoder.table.rows, agents.flat.item_encoder.dim()),
               agents.flat.net.zero_grads()};
  } else {
    ws.s1 = zero_social(agents.social1);
    if (agents.layout == AgentLayout::Multi) ws.s2 = zero_social(agents.social2);
    ws.item = {Matrix(agents.item.encoder.table.rows, agents.item.encoder.dim()),
               agents.item.net.zero_grads()};
  }
  const auto t = evaluate(agents, step, space, weights, entropy_coef, &ws);
  const auto active = active_agents(agents);
  ActorObjective out;
  for (std::size_t k = 0; k < 3; ++k) {
    if (active[k]) out.value -= weights[k] * t[k].logp + entropy_coef * t[k].entropy;
  }
  auto add = [&](std::span<const double> g) { out.grads.emplace_back(g.begin(), g.end()); };
  if (agents.layout == AgentLayout::Flat) {
    add(ws.flat.user_encoder.data);
    add(ws.flat.item_encoder.data);
    for (auto s : ws.flat.net.spans()) add(s);
    return out;
  }
  for (auto s : social_grads(ws.s1)) add(s);
  if (agents.layout == AgentLayout::Multi) {
    for (auto s : social_grads(ws.s2)) add(s);
  }
  if (agents.learn_items) {
    add(ws.item.encoder.data);
    for (auto s : ws.item.net.spans()) add(s);
  }
  return out;
}

PpoDiagnostics ppo_update(AgentSet& agents, const RolloutBuffer& buffer,
                          const ActionSpace& space, const PpoConfig& config) {
  const std::size_t n = buffer.steps.size();
  require(buffer.advantages.size() == n && buffer.targets.size() == n, ErrorKind::InvalidState,
          "ppo_update: buffer is not finished");
  PpoDiagnostics diag;
  if (n == 0) return diag;
  const double inv = 1.0 / static_cast<double>(n);
  const auto active = active_agents(agents);
  diag.value_loss_first = critic_loss(agents, buffer);

  for (std::size_t pass = 0; pass < config.epochs; ++pass) {
    Workspace ws;
    if (agents.layout == AgentLayout::Flat) {
      ws.flat = {Matrix(agents.flat.user_encoder.table.rows, agents.flat.user_encoder.dim()),
                 Matrix(agents.flat.item_encoder.table.rows, agents.flat.item_encoder.dim()),
                 agents.flat.net.zero_grads()};
    } else {
      ws.s1 = zero_social(agents.social1);
      if (agents.layout == AgentLayout::Multi) ws.s2 = zero_social(agents.social2);
      ws.item = {Matrix(agents.item.encoder.table.rows, agents.item.encoder.dim()),
                 agents.item.net.zero_grads()};
    }
    StackGrads critic_grads = agents.critic.zero_grads();
    double policy = 0.0;
    double ent = 0.0;
    double clipped = 0.0;
    double counted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& step = buffer.steps[i];
      const double adv = buffer.advantages[i];
      // Ratios come from a gradient-free evaluation so every agent's slope is
      // known before its gradient is accumulated.
      const auto cur = evaluate(agents, step, space, {0.0, 0.0, 0.0}, 0.0, nullptr);
      const auto old = old_logps(agents, step.action);
      std::array<double, 3> slope{0.0, 0.0, 0.0};
      for (std::size_t k = 0; k < 3; ++k) {
        if (!active[k]) continue;
        const double ratio = std::exp(cur[k].logp - old[k]);
        slope[k] = surrogate_slope(ratio, adv, config.clip) * inv;
        policy -= clipped_surrogate(ratio, adv, config.clip) * inv;
        ent += cur[k].entropy * inv;
        counted += 1.0;
        if (std::abs(ratio - 1.0) > config.clip) clipped += 1.0;
      }
      evaluate(agents, step, space, slope, config.entropy_coef * inv, &ws);

      const auto x = agents.critic_input(step.state, step.progress);
      DenseStack::Cache cache;
      const double v = agents.critic.forward(x, &cache)[0];
      const double g = 2.0 * config.value_coef * (v - buffer.targets[i]) * inv;
      agents.critic.backward(cache, std::vector<double>{g}, critic_grads);
    }
    if (!std::isfinite(policy) || !std::isfinite(ent)) {
      fail(ErrorKind::TrainingDivergence, "ppo_update: non-finite loss");
    }
    diag.policy_loss = policy;
    diag.entropy = ent;
    diag.clip_fraction = counted > 0.0 ? clipped / counted : 0.0;

    if (agents.layout == AgentLayout::Flat) {
      std::vector<std::span<const double>> g{ws.flat.user_encoder.data, ws.flat.item_encoder.data};
      for (auto s : ws.flat.net.spans()) g.push_back(s);
      check_finite(g);
      std::vector<std::span<double>> p{agents.flat.user_encoder.table.data,
                                       agents.flat.item_encoder.table.data};
      for (auto s : agents.flat.net.parameters()) p.push_back(s);
      agents.optim.flat.step(p, g);
    } else {
      const auto g1 = social_grads(ws.s1);
      check_finite(g1);
      agents.optim.social1.step(social_params(agents.social1), g1);
      if (agents.layout == AgentLayout::Multi) {
        const auto g2 = social_grads(ws.s2);
        check_finite(g2);
        agents.optim.social2.step(social_params(agents.social2), g2);
      }
      if (agents.learn_items) {
        std::vector<std::span<const double>> g{ws.item.encoder.data};
        for (auto s : ws.item.net.spans()) g.push_back(s);
        check_finite(g);
        std::vector<std::span<double>> p{agents.item.encoder.table.data};
        for (auto s : agents.item.net.parameters()) p.push_back(s);
        agents.optim.item.step(p, g);
      }
    }
    const auto cg = critic_grads.spans();
    check_finite(cg);
    agents.optim.critic.step(agents.critic.parameters(), cg);
  }
  diag.value_loss = critic_loss(agents, buffer);
  if (!std::isfinite(diag.value_loss)) {
    fail(ErrorKind::TrainingDivergence, "ppo_update: non-finite critic loss");
  }
  return diag;
}

}  // namespace sra
