#include <algorithm>
#include <cmath>
#include <limits>

#include "sra/error.hpp"
#include "sra/kernels.hpp"
#include "sra/recenv.hpp"

namespace sra {

SparseOp SparseOp::transposed(std::size_t src_rows) const {
  SparseOp t;
  t.rows = src_rows;
  t.row_ptr.assign(src_rows + 1, 0);
  for (auto c : cols) ++t.row_ptr[c + 1];
  for (std::size_t r = 0; r < src_rows; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  t.cols.resize(cols.size());
  t.w.resize(w.size());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const auto slot = next[cols[k]]++;
      t.cols[slot] = static_cast<std::uint32_t>(r);
      t.w[slot] = w[k];
    }
  }
  return t;
}

void SparseOp::apply(const Matrix& src, Matrix& out) const {
  if (rows == 0 || cols.empty()) return;
  kernels::active().csr_accumulate(rows, row_ptr.data(), cols.data(), w.data(), src.data.data(),
                                   src.cols, out.data.data());
}

namespace {

template <class Weight>
SparseOp build_op(const std::vector<std::vector<std::uint32_t>>& adj, Weight weight) {
  SparseOp op;
  op.rows = adj.size();
  op.row_ptr.assign(adj.size() + 1, 0);
  for (std::size_t r = 0; r < adj.size(); ++r) {
    for (auto c : adj[r]) {
      op.cols.push_back(c);
      op.w.push_back(weight(r, c));
    }
    op.row_ptr[r + 1] = op.cols.size();
  }
  return op;
}

void add_scaled_rows(const std::vector<double>& s, const Matrix& src, Matrix& out) {
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < s.size(); ++r) {
    if (s[r] != 0.0) kt.axpy(s[r], src.data.data() + r * src.cols, out.data.data() + r * out.cols, src.cols);
  }
}

Embeddings zeros_like(const Embeddings& e) {
  return {Matrix(e.users.rows, e.users.cols), Matrix(e.items.rows, e.items.cols)};
}

Embeddings step(const PropagationGraph& g, const Embeddings& cur) {
  Embeddings next = zeros_like(cur);
  add_scaled_rows(g.user_self, cur.users, next.users);
  g.user_from_item.apply(cur.items, next.users);
  g.user_from_user.apply(cur.users, next.users);
  add_scaled_rows(g.item_self, cur.items, next.items);
  g.item_from_user.apply(cur.users, next.items);
  return next;
}

Embeddings step_transposed(const PropagationGraph& g, const Embeddings& grad) {
  Embeddings prev = zeros_like(grad);
  add_scaled_rows(g.user_self, grad.users, prev.users);
  g.user_from_user_t.apply(grad.users, prev.users);
  g.user_from_item_t.apply(grad.items, prev.users);
  add_scaled_rows(g.item_self, grad.items, prev.items);
  g.item_from_user_t.apply(grad.users, prev.items);
  return prev;
}

void accumulate(Embeddings& into, const Embeddings& e, double s) {
  kernels::axpy(s, e.users.data, into.users.data);
  kernels::axpy(s, e.items.data, into.items.data);
}

}  // namespace

PropagationGraph build_graph(Normalization norm, std::size_t items,
                             const std::vector<std::vector<ItemId>>& items_of,
                             const std::vector<std::vector<UserId>>& friends_of) {
  const std::size_t users = items_of.size();
  require(friends_of.size() == users, ErrorKind::InvalidInput,
          "build_graph: items_of and friends_of disagree on user count");
  std::vector<std::vector<std::uint32_t>> users_of(items);
  for (std::size_t u = 0; u < users; ++u) {
    for (auto i : items_of[u]) {
      require(i < items, ErrorKind::InvalidInput, "build_graph: item id out of range");
      users_of[i].push_back(static_cast<std::uint32_t>(u));
    }
    for (auto v : friends_of[u]) {
      require(v < users, ErrorKind::InvalidInput, "build_graph: friend id out of range");
    }
  }
  auto du = [&](std::size_t u) { return static_cast<double>(items_of[u].size()); };
  auto su = [&](std::size_t u) { return static_cast<double>(friends_of[u].size()); };
  auto di = [&](std::size_t i) { return static_cast<double>(users_of[i].size()); };

  PropagationGraph g;
  g.users = users;
  g.items = items;
  g.user_self.assign(users, 0.0);
  g.item_self.assign(items, 0.0);

  if (norm == Normalization::Symmetric) {
    // Interaction and social channels averaged; isolated nodes keep themselves.
    std::vector<double> chan(users, 1.0);
    for (std::size_t u = 0; u < users; ++u) {
      const bool a = !items_of[u].empty();
      const bool b = !friends_of[u].empty();
      chan[u] = (a && b) ? 0.5 : 1.0;
      if (!a && !b) g.user_self[u] = 1.0;
    }
    g.user_from_item = build_op(items_of, [&](std::size_t u, std::uint32_t i) {
      return chan[u] / std::sqrt(du(u) * di(i));
    });
    g.user_from_user = build_op(friends_of, [&](std::size_t u, std::uint32_t v) {
      return chan[u] / std::sqrt(su(u) * su(v));
    });
    g.item_from_user = build_op(users_of, [&](std::size_t i, std::uint32_t u) {
      return 1.0 / std::sqrt(di(i) * du(u));
    });
    for (std::size_t i = 0; i < items; ++i) {
      if (users_of[i].empty()) g.item_self[i] = 1.0;
    }
  } else {
    // Mean aggregation: self, mean of items, mean of friends, equally weighted.
    std::vector<double> share(users, 1.0);
    for (std::size_t u = 0; u < users; ++u) {
      const double c = 1.0 + (items_of[u].empty() ? 0.0 : 1.0) + (friends_of[u].empty() ? 0.0 : 1.0);
      share[u] = 1.0 / c;
      g.user_self[u] = share[u];
    }
    g.user_from_item = build_op(items_of, [&](std::size_t u, std::uint32_t) {
      return share[u] / du(u);
    });
    g.user_from_user = build_op(friends_of, [&](std::size_t u, std::uint32_t) {
      return share[u] / su(u);
    });
    g.item_from_user = build_op(users_of, [&](std::size_t i, std::uint32_t) {
      return 0.5 / di(i);
    });
    for (std::size_t i = 0; i < items; ++i) g.item_self[i] = users_of[i].empty() ? 1.0 : 0.5;
  }
  g.item_from_user_t = g.user_from_item.transposed(items);
  g.user_from_user_t = g.user_from_user.transposed(users);
  g.user_from_item_t = g.item_from_user.transposed(users);
  return g;
}

std::vector<Embeddings> propagate_layers(const PropagationGraph& graph, const Embeddings& base,
                                         std::size_t depth) {
  require(base.users.rows == graph.users && base.items.rows == graph.items, ErrorKind::InvalidInput,
          "propagate: embedding rows do not match the graph");
  require(base.users.cols == base.items.cols, ErrorKind::InvalidInput,
          "propagate: user and item dimensions differ");
  std::vector<Embeddings> layers{base};
  for (std::size_t l = 0; l < depth; ++l) layers.push_back(step(graph, layers.back()));
  return layers;
}

namespace {

void normalize_rows(Matrix& m) {
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* x = m.data.data() + r * m.cols;
    const double n = std::sqrt(kt.dot(x, x, m.cols));
    if (n > 0.0) kt.scale(1.0 / n, x, m.cols);
  }
}

// grad wrt pre-normalized rows, given grad wrt normalized rows (in place).
void normalize_rows_backward(const Matrix& pre, Matrix& grad) {
  const auto& kt = kernels::active();
  std::vector<double> h(pre.cols);
  for (std::size_t r = 0; r < pre.rows; ++r) {
    const double* z = pre.data.data() + r * pre.cols;
    double* g = grad.data.data() + r * grad.cols;
    const double n = std::sqrt(kt.dot(z, z, pre.cols));
    if (n == 0.0) {
      std::fill(g, g + grad.cols, 0.0);
      continue;
    }
    for (std::size_t d = 0; d < pre.cols; ++d) h[d] = z[d] / n;
    const double proj = kt.dot(h.data(), g, pre.cols);
    for (std::size_t d = 0; d < pre.cols; ++d) g[d] = (g[d] - proj * h[d]) / n;
  }
}

void normalize(Embeddings& e) {
  normalize_rows(e.users);
  normalize_rows(e.items);
}

}  // namespace

Embeddings propagate(const PropagationGraph& graph, const Embeddings& base,
                     const PropagationSpec& spec, PropagationTape* tape) {
  if (tape) tape->pre.clear();
  if (spec.depth == 0 && !spec.normalize && spec.user_scale == 1.0) return base;
  if (spec.depth > 0) {
    require(base.users.rows == graph.users && base.items.rows == graph.items,
            ErrorKind::InvalidInput, "propagate: embedding rows do not match the graph");
  }
  const bool last = spec.combine == LayerCombine::Last;
  const double s = last ? 1.0 : 1.0 / static_cast<double>(spec.depth + 1);
  Embeddings out = zeros_like(base);
  Embeddings cur = base;
  for (std::size_t l = 0;; ++l) {
    if (spec.normalize) {
      if (tape) tape->pre.push_back(cur);
      normalize(cur);
    }
    if (!last || l == spec.depth) accumulate(out, cur, s);
    if (l == spec.depth) break;
    cur = step(graph, cur);
  }
  if (spec.user_scale != 1.0) kernels::scale(spec.user_scale, out.users.data);
  return out;
}

Embeddings propagate(const PropagationGraph& graph, const Embeddings& base, std::size_t depth) {
  return propagate(graph, base, PropagationSpec{depth, LayerCombine::Mean, false, 1.0});
}

Embeddings propagate_backward(const PropagationGraph& graph, const Embeddings& grad_final,
                              const PropagationSpec& spec, const PropagationTape* tape) {
  require(!spec.normalize || (tape && tape->pre.size() == spec.depth + 1),
          ErrorKind::InvalidState, "propagate_backward: normalized propagation needs its tape");
  const bool last = spec.combine == LayerCombine::Last;
  const double s = last ? 1.0 : 1.0 / static_cast<double>(spec.depth + 1);
  Embeddings gfin = grad_final;
  if (spec.user_scale != 1.0) kernels::scale(spec.user_scale, gfin.users.data);
  // g holds the gradient w.r.t. the (normalized) layer l output.
  Embeddings g = zeros_like(grad_final);
  accumulate(g, gfin, s);
  for (std::size_t l = spec.depth;; --l) {
    if (spec.normalize) {
      normalize_rows_backward(tape->pre[l].users, g.users);
      normalize_rows_backward(tape->pre[l].items, g.items);
    }
    if (l == 0) break;
    Embeddings prev = step_transposed(graph, g);
    if (!last) accumulate(prev, gfin, s);
    g = std::move(prev);
  }
  return g;
}

Embeddings propagate_symmetric(const Embeddings& base,
                               const std::vector<std::vector<ItemId>>& items_of,
                               const std::vector<std::vector<UserId>>& friends_of,
                               std::size_t depth) {
  const auto g = build_graph(Normalization::Symmetric, base.items.rows, items_of, friends_of);
  return propagate(g, base, depth);
}

double ScoreView::score(UserId u, ItemId i) const {
  require(u < final.users.rows && i < final.items.rows, ErrorKind::InvalidInput,
          "score: id out of range");
  return kernels::dot(final.users.row(u), final.items.row(i));
}

namespace {

std::vector<ItemId> rank_scores(std::vector<double>& scores, std::size_t k,
                                std::span<const ItemId> exclude) {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<char> skip(scores.size(), 0);
  std::size_t excluded = 0;
  for (auto e : exclude) {
    if (e < scores.size() && !skip[e]) {
      skip[e] = 1;
      ++excluded;
    }
  }
  require(k <= scores.size() - excluded, ErrorKind::InvalidInput,
          "topk: k exceeds the number of candidate items");
  auto better = [&](ItemId a, ItemId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  // Sorted best-first buffer; items arrive in ascending id order, so an
  // equal score never displaces an earlier entry.
  std::vector<ItemId> top;
  top.reserve(k + 1);
  double worst = ninf;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (skip[i]) continue;
    if (top.size() == k && !(scores[i] > worst)) continue;
    const auto id = static_cast<ItemId>(i);
    top.insert(std::upper_bound(top.begin(), top.end(), id, better), id);
    if (top.size() > k) top.pop_back();
    if (top.size() == k) worst = scores[top.back()];
  }
  return top;
}

}  // namespace

RankedList ScoreView::topk(UserId u, std::size_t k, std::span<const ItemId> exclude) const {
  require(u < final.users.rows, ErrorKind::InvalidInput, "topk: user out of range");
  std::vector<double> scores(final.items.rows);
  kernels::active().gemv(final.items.data.data(), final.items.rows, final.items.cols,
                         final.users.row(u).data(), scores.data());
  RankedList r;
  r.user = u;
  r.k = k;
  r.items = rank_scores(scores, k, exclude);
  return r;
}

std::vector<std::vector<ItemId>> ScoreView::topk_all(
    const std::vector<std::vector<ItemId>>& exclude, std::size_t k, std::size_t users) const {
  require(users <= final.users.rows, ErrorKind::InvalidInput, "topk_all: too many users");
  // Users are scored in blocks so each item row is read once per block.
  constexpr std::size_t kBlock = 16;
  const std::size_t m = final.items.rows;
  const std::size_t dim = final.items.cols;
  const auto& kt = kernels::active();
  std::vector<std::vector<ItemId>> out(users);
  std::vector<double> block_scores(kBlock * m);
  std::vector<double> col(kBlock);
  std::vector<double> scores(m);
  static const std::vector<ItemId> none;
  for (std::size_t u0 = 0; u0 < users; u0 += kBlock) {
    const std::size_t bs = std::min(kBlock, users - u0);
    const double* ub = final.users.data.data() + u0 * dim;
    for (std::size_t i = 0; i < m; ++i) {
      kt.gemv(ub, bs, dim, final.items.data.data() + i * dim, col.data());
      for (std::size_t b = 0; b < bs; ++b) block_scores[b * m + i] = col[b];
    }
    for (std::size_t b = 0; b < bs; ++b) {
      const std::size_t u = u0 + b;
      std::copy(block_scores.begin() + static_cast<std::ptrdiff_t>(b * m),
                block_scores.begin() + static_cast<std::ptrdiff_t>((b + 1) * m), scores.begin());
      const auto& ex = u < exclude.size() ? exclude[u] : none;
      out[u] = rank_scores(scores, k, ex);
    }
  }
  return out;
}

}  // namespace sra
