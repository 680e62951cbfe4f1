#include <algorithm>
#include <cmath>
#include <map>

#include "sra/error.hpp"
#include "sra/kernels.hpp"
#include "sra/recenv.hpp"

namespace sra {

const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::MfBpr: return "mf-bpr";
    case ModelVariant::Sbpr: return "sbpr";
    case ModelVariant::SocialLgn: return "social-lgn";
    case ModelVariant::SageLite: return "sage-lite";
  }
  return "?";
}

ModelVariant parse_variant(const std::string& name) {
  for (auto v : {ModelVariant::MfBpr, ModelVariant::Sbpr, ModelVariant::SocialLgn,
                 ModelVariant::SageLite}) {
    if (name == to_string(v)) return v;
  }
  fail(ErrorKind::InvalidConfig, "unknown model variant: " + name);
}

RecModel::RecModel(RecConfig config, std::size_t users, std::size_t items, std::uint64_t seed)
    : config_(config) {
  require(config.dim > 0, ErrorKind::InvalidConfig, "RecModel: dim must be positive");
  require(users > 0 && items > 0, ErrorKind::InvalidInput, "RecModel: empty universe");
  auto rng = SeedStream(seed).child("rec-init").rng();
  base_.users = random_table(users, config.dim, config.init_std, rng);
  base_.items = random_table(items, config.dim, config.init_std, rng);
  items_of_.assign(users, {});
  friends_of_.assign(users, {});
  rebuild_graph();
}

std::size_t RecModel::effective_depth() const {
  switch (config_.variant) {
    case ModelVariant::MfBpr:
    case ModelVariant::Sbpr: return 0;
    default: return config_.depth;
  }
}

PropagationSpec RecModel::propagation_spec() const {
  PropagationSpec p;
  p.depth = effective_depth();
  if (config_.variant == ModelVariant::SageLite) {
    p.combine = config_.sage_combine;
    p.normalize = config_.sage_normalize;
    p.user_scale = config_.sage_scale;
  }
  return p;
}

Normalization RecModel::normalization() const {
  return config_.variant == ModelVariant::SageLite ? Normalization::Mean
                                                   : Normalization::Symmetric;
}

void RecModel::attach(const std::vector<std::vector<ItemId>>& items_of,
                      const std::vector<std::vector<UserId>>& friends_of) {
  require(items_of.size() == user_count() && friends_of.size() == user_count(),
          ErrorKind::InvalidInput, "RecModel::attach: context user count mismatch");
  items_of_ = items_of;
  friends_of_ = friends_of;
  rebuild_graph();
}

void RecModel::rebuild_graph() {
  if (effective_depth() > 0) {
    graph_ = build_graph(normalization(), item_count(), items_of_, friends_of_);
  } else {
    graph_ = PropagationGraph{};
  }
  stale_ = true;
}

const ScoreView& RecModel::view() const {
  if (stale_) {
    view_.final = propagate(graph_, base_, propagation_spec());
    stale_ = false;
  }
  return view_;
}

TensorArchive RecModel::to_archive() const {
  TensorArchive a;
  const std::vector<double> meta{static_cast<double>(config_.variant),
                                 static_cast<double>(config_.dim),
                                 static_cast<double>(config_.depth),
                                 config_.l2,
                                 config_.init_std,
                                 trained_ ? 1.0 : 0.0,
                                 config_.sage_normalize ? 1.0 : 0.0,
                                 static_cast<double>(config_.sage_combine),
                                 config_.sage_scale};
  a.put("meta", 1, meta.size(), meta);
  a.put("user_base", base_.users);
  a.put("item_base", base_.items);
  return a;
}

RecModel RecModel::from_archive(const TensorArchive& archive) {
  const auto& meta = archive.get("meta");
  require(meta.data.size() == 9, ErrorKind::Parse, "RecModel archive: bad meta");
  RecConfig c;
  c.variant = static_cast<ModelVariant>(static_cast<int>(meta.data[0]));
  c.dim = static_cast<std::size_t>(meta.data[1]);
  c.depth = static_cast<std::size_t>(meta.data[2]);
  c.l2 = meta.data[3];
  c.init_std = meta.data[4];
  c.sage_normalize = meta.data[6] != 0.0;
  c.sage_combine = static_cast<LayerCombine>(static_cast<int>(meta.data[7]));
  c.sage_scale = meta.data[8];
  const auto& u = archive.get("user_base");
  const auto& i = archive.get("item_base");
  require(u.cols == c.dim && i.cols == c.dim, ErrorKind::Parse,
          "RecModel archive: embedding width disagrees with meta");
  RecModel m(c, u.rows, i.rows, 0);
  m.base_.users = u;
  m.base_.items = i;
  m.trained_ = meta.data[5] != 0.0;
  m.stale_ = true;
  return m;
}

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool contains(const std::vector<ItemId>& sorted, ItemId i) {
  return std::binary_search(sorted.begin(), sorted.end(), i);
}

ItemId sample_negative(Rng& rng, std::size_t items, const std::vector<ItemId>& own,
                       const std::vector<ItemId>* also = nullptr) {
  ItemId j = 0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    j = static_cast<ItemId>(rng.index(items));
    if (!contains(own, j) && (!also || !contains(*also, j))) return j;
  }
  return j;
}

struct Sample {
  UserId u;
  ItemId i;
  ItemId j;
  // SBPR middle item; `social` false means plain BPR.
  ItemId k = 0;
  double s = 0.0;
  bool social = false;
};

struct SocialItems {
  std::vector<ItemId> items;       // sorted
  std::vector<double> friend_hits;  // parallel to items
};

std::vector<SocialItems> social_items(const std::vector<std::vector<ItemId>>& items_of,
                                      const std::vector<std::vector<UserId>>& friends_of) {
  std::vector<SocialItems> out(items_of.size());
  for (std::size_t u = 0; u < items_of.size(); ++u) {
    std::map<ItemId, double> counts;
    for (auto v : friends_of[u]) {
      for (auto k : items_of[v]) {
        if (!contains(items_of[u], k)) counts[k] += 1.0;
      }
    }
    for (const auto& [k, c] : counts) {
      out[u].items.push_back(k);
      out[u].friend_hits.push_back(c);
    }
  }
  return out;
}

// Rows of one ranking term softplus(-<a, b - c> / tau) and their gradients.
struct PairTerm {
  const double* a;
  const double* b;
  const double* c;
  double* ga;
  double* gb;
  double* gc;
};

}  // namespace

double bpr_loss(const RecModel& model, UserId u, ItemId pos, ItemId neg, double l2) {
  require(u < model.user_count() && pos < model.item_count() && neg < model.item_count(),
          ErrorKind::InvalidInput, "bpr_loss: id out of range");
  const auto& view = model.view();
  const double x = view.score(u, pos) - view.score(u, neg);
  const auto& b = model.base();
  const double reg = kernels::dot(b.users.row(u), b.users.row(u)) +
                     kernels::dot(b.items.row(pos), b.items.row(pos)) +
                     kernels::dot(b.items.row(neg), b.items.row(neg));
  return softplus(-x) + l2 * reg;
}

Embeddings bpr_gradient(const RecModel& model, UserId u, ItemId pos, ItemId neg, double l2) {
  require(u < model.user_count() && pos < model.item_count() && neg < model.item_count(),
          ErrorKind::InvalidInput, "bpr_gradient: id out of range");
  const std::size_t dim = model.config().dim;
  const auto spec = model.propagation_spec();
  PropagationTape tape;
  const auto& base = model.base();
  const Embeddings fin = propagate(model.graph(), base, spec, &tape);
  Embeddings grad{Matrix(model.user_count(), dim), Matrix(model.item_count(), dim)};
  const auto eu = fin.users.row(u);
  const auto ei = fin.items.row(pos);
  const auto ej = fin.items.row(neg);
  const double g = -sigmoid(-(kernels::dot(eu, ei) - kernels::dot(eu, ej)));
  for (std::size_t d = 0; d < dim; ++d) {
    grad.users(u, d) += g * (ei[d] - ej[d]);
    grad.items(pos, d) += g * eu[d];
    grad.items(neg, d) -= g * eu[d];
  }
  Embeddings out = propagate_backward(model.graph(), grad, spec, &tape);
  kernels::axpy(2.0 * l2, base.users.row(u), out.users.row(u));
  kernels::axpy(2.0 * l2, base.items.row(pos), out.items.row(pos));
  kernels::axpy(2.0 * l2, base.items.row(neg), out.items.row(neg));
  return out;
}

TrainReport train(RecModel& model, const Split& split, const Dataset& dataset,
                  const TrainOptions& options) {
  const std::size_t n = model.user_count();
  const std::size_t m = model.item_count();
  const std::size_t dim = model.config().dim;
  require(split.train_by_user.size() == n && dataset.user_count == n, ErrorKind::InvalidInput,
          "train: split/dataset user count differs from the model");
  require(dataset.item_count == m, ErrorKind::InvalidInput,
          "train: dataset item count differs from the model");
  require(options.lr > 0.0 && options.l2 >= 0.0 && options.adversarial_eps >= 0.0,
          ErrorKind::InvalidConfig, "train: lr must be positive, l2 and eps non-negative");
  model.attach(split.train_by_user, dataset.friends());

  const bool sbpr = model.variant() == ModelVariant::Sbpr;
  std::vector<SocialItems> soc;
  if (sbpr) soc = social_items(model.items_of(), model.friends_of());

  const PropagationSpec spec = model.propagation_spec();
  PropagationTape tape;
  const auto& graph = model.graph();
  const auto& kt = kernels::active();
  const double eps = options.adversarial_eps;
  const SeedStream seeds = SeedStream(options.seed).child("train");

  Adam adam(AdamConfig{options.lr, 0.9, 0.999, 1e-8});
  TrainReport report;
  std::vector<Sample> samples;
  samples.reserve(split.train.size());
  std::vector<double> pert(3 * dim);
  std::vector<double> sa(dim), sb(dim), sc(dim), diff(dim);

  // Adds w * softplus(-<a, b - c> / tau), at the adversarially perturbed point when eps > 0.
  auto pair_term = [&](const PairTerm& t, double w, double tau) {
    const double* a = t.a;
    const double* b = t.b;
    const double* c = t.c;
    for (std::size_t d = 0; d < dim; ++d) diff[d] = b[d] - c[d];
    double z = kt.dot(a, diff.data(), dim) / tau;
    if (eps > 0.0) {
      const double g = -sigmoid(-z) / tau;
      for (std::size_t d = 0; d < dim; ++d) {
        pert[d] = g * diff[d];
        pert[dim + d] = g * a[d];
        pert[2 * dim + d] = -g * a[d];
      }
      const double norm2 = kt.dot(pert.data(), pert.data(), pert.size());
      const double s = norm2 > 0.0 ? eps / std::sqrt(norm2) : 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        sa[d] = a[d] + s * pert[d];
        sb[d] = b[d] + s * pert[dim + d];
        sc[d] = c[d] + s * pert[2 * dim + d];
        diff[d] = sb[d] - sc[d];
      }
      a = sa.data();
      z = kt.dot(a, diff.data(), dim) / tau;
    }
    const double coef = -sigmoid(-z) * w / tau;
    kt.axpy(coef, diff.data(), t.ga, dim);
    kt.axpy(coef, a, t.gb, dim);
    kt.axpy(-coef, a, t.gc, dim);
    return softplus(-z) * w;
  };

  if (options.on_epoch && options.callback_every > 0) options.on_epoch(0, model);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    auto rng = seeds.child(epoch).rng();
    samples.clear();
    for (const auto& e : split.train) {
      Sample s{e.a, e.b, 0};
      const auto& own = split.train_by_user[e.a];
      if (sbpr && !soc[e.a].items.empty()) {
        const auto pick = rng.index(soc[e.a].items.size());
        s.k = soc[e.a].items[pick];
        s.s = soc[e.a].friend_hits[pick];
        s.social = true;
        s.j = sample_negative(rng, m, own, &soc[e.a].items);
      } else {
        s.j = sample_negative(rng, m, own);
      }
      samples.push_back(s);
    }
    const std::size_t batch = options.batch_size == 0 ? samples.size() : options.batch_size;
    if (options.batch_size != 0) rng.shuffle(samples);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += batch) {
      const std::size_t stop = std::min(samples.size(), start + batch);
      const double w = 1.0 / static_cast<double>(stop - start);
      const Embeddings& base = model.base();
      const Embeddings fin = propagate(graph, base, spec, &tape);
      Embeddings grad{Matrix(n, dim), Matrix(m, dim)};

      double loss = 0.0;
      for (std::size_t t = start; t < stop; ++t) {
        const auto& s = samples[t];
        const double* eu = fin.users.row(s.u).data();
        double* gu = grad.users.row(s.u).data();
        if (!s.social) {
          loss += pair_term({eu, fin.items.row(s.i).data(), fin.items.row(s.j).data(), gu,
                             grad.items.row(s.i).data(), grad.items.row(s.j).data()},
                            w, 1.0);
        } else {
          // -ln s((x_ui - x_uk) / (1 + s_uk)) - ln s(x_uk - x_uj)
          loss += pair_term({eu, fin.items.row(s.i).data(), fin.items.row(s.k).data(), gu,
                             grad.items.row(s.i).data(), grad.items.row(s.k).data()},
                            w, 1.0 + s.s);
          loss += pair_term({eu, fin.items.row(s.k).data(), fin.items.row(s.j).data(), gu,
                             grad.items.row(s.k).data(), grad.items.row(s.j).data()},
                            w, 1.0);
        }
      }
      Embeddings gbase = propagate_backward(graph, grad, spec, &tape);
      if (options.l2 > 0.0) {
        const double c = 2.0 * options.l2 * w;
        double reg = 0.0;
        auto touch_user = [&](UserId u) {
          reg += kt.dot(base.users.row(u).data(), base.users.row(u).data(), dim);
          kt.axpy(c, base.users.row(u).data(), gbase.users.row(u).data(), dim);
        };
        auto touch_item = [&](ItemId i) {
          reg += kt.dot(base.items.row(i).data(), base.items.row(i).data(), dim);
          kt.axpy(c, base.items.row(i).data(), gbase.items.row(i).data(), dim);
        };
        for (std::size_t t = start; t < stop; ++t) {
          const auto& s = samples[t];
          touch_user(s.u);
          touch_item(s.i);
          touch_item(s.j);
          if (s.social) touch_item(s.k);
        }
        loss += options.l2 * w * reg;
      }
      if (!std::isfinite(loss)) fail(ErrorKind::TrainingDivergence, "train: non-finite loss");
      auto& mb = model.mutable_base();
      adam.step({std::span<double>(mb.users.data), std::span<double>(mb.items.data)},
                {std::span<const double>(gbase.users.data),
                 std::span<const double>(gbase.items.data)});
      epoch_loss += loss * static_cast<double>(stop - start);
    }
    report.epoch_loss.push_back(samples.empty() ? 0.0
                                                : epoch_loss / static_cast<double>(samples.size()));
    if (options.on_epoch && options.callback_every > 0 &&
        (epoch + 1) % options.callback_every == 0) {
      options.on_epoch(epoch + 1, model);
    }
  }
  model.set_trained(true);
  return report;
}

TrainReport adversarial_train(RecModel& model, const Split& split, const Dataset& dataset,
                              double eps, TrainOptions options) {
  require(eps >= 0.0, ErrorKind::InvalidConfig, "adversarial_train: eps must be >= 0");
  options.adversarial_eps = eps;
  return train(model, split, dataset, options);
}

MetricsReport evaluate_view(const ScoreView& view, const Split& split, std::size_t real_users,
                            const std::string& label) {
  std::size_t kmax = 0;
  for (auto k : kReportCutoffs) kmax = std::max(kmax, k);
  const auto rankings = view.topk_all(split.train_by_user, kmax, real_users);
  std::vector<std::vector<ItemId>> test(split.test_by_user.begin(),
                                        split.test_by_user.begin() +
                                            static_cast<std::ptrdiff_t>(real_users));
  return evaluate_rankings(rankings, test, label);
}

}  // namespace sra
