#include <algorithm>
#include <cmath>
#include <limits>

#include "sra/error.hpp"
#include "sra/gradcore.hpp"
#include "sra/kernels.hpp"

namespace sra {

EmbeddingTable random_table(std::size_t rows, std::size_t dim, double stddev, Rng& rng) {
  EmbeddingTable t(rows, dim);
  for (auto& v : t.data) v = stddev * rng.normal();
  return t;
}

void StackGrads::zero() {
  for (auto& w : weight) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void StackGrads::scale(double s) {
  for (auto& w : weight) kernels::scale(s, w.data);
  for (auto& b : bias) kernels::scale(s, b);
}

std::vector<std::span<const double>> StackGrads::spans() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.emplace_back(weight[l].data);
    out.emplace_back(bias[l]);
  }
  return out;
}

DenseStack::DenseStack(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::InvalidInput, "DenseStack: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    require(L.bias.size() == L.weight.rows, ErrorKind::InvalidInput,
            "DenseStack: bias/weight mismatch");
    if (l > 0) {
      require(layers_[l - 1].weight.rows == L.weight.cols, ErrorKind::InvalidInput,
              "DenseStack: adjacent layer dims incompatible");
    }
  }
}

DenseStack DenseStack::make(const std::vector<std::size_t>& dims, Activation hidden, Rng& rng,
                            double gain) {
  require(dims.size() >= 2, ErrorKind::InvalidInput, "DenseStack::make: need >= 2 dims");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer L;
    L.weight = Matrix(dims[l + 1], dims[l]);
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, dims[l])));
    for (auto& w : L.weight.data) w = rng.uniform(-bound, bound);
    L.bias.assign(dims[l + 1], 0.0);
    L.activation = (l + 2 == dims.size()) ? Activation::Identity : hidden;
    layers.push_back(std::move(L));
  }
  return DenseStack(std::move(layers));
}

std::size_t DenseStack::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols; }
std::size_t DenseStack::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows; }

std::vector<DenseLayer>& DenseStack::mutable_layers() {
  ++version_;
  return layers_;
}

std::vector<double> DenseStack::forward(std::span<const double> input, Cache* cache) const {
  require(input.size() == input_dim(), ErrorKind::InvalidInput,
          "DenseStack::forward: input dimension mismatch");
  if (cache) {
    cache->inputs.assign(layers_.size(), {});
    cache->pre.assign(layers_.size(), {});
    cache->owner = this;
    cache->version = version_;
  }
  const auto& kt = kernels::active();
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    std::vector<double> z(L.weight.rows);
    kt.gemv(L.weight.data.data(), L.weight.rows, L.weight.cols, x.data(), z.data());
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += L.bias[r];
    if (cache) {
      cache->inputs[l] = std::move(x);
      cache->pre[l] = z;
    }
    if (L.activation == Activation::Relu) {
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }
  return x;
}

std::vector<double> DenseStack::backward(const Cache& cache, std::span<const double> out_grad,
                                         StackGrads& grads) const {
  require(cache.owner == this && cache.version == version_ &&
              cache.pre.size() == layers_.size(),
          ErrorKind::InvalidState, "DenseStack::backward: stale or foreign cache");
  require(out_grad.size() == output_dim(), ErrorKind::InvalidInput,
          "DenseStack::backward: output gradient dimension mismatch");
  if (grads.weight.size() != layers_.size()) grads = zero_grads();
  std::vector<double> g(out_grad.begin(), out_grad.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& L = layers_[li];
    if (L.activation == Activation::Relu) {
      for (std::size_t r = 0; r < g.size(); ++r) {
        if (cache.pre[li][r] <= 0.0) g[r] = 0.0;
      }
    }
    const auto& x = cache.inputs[li];
    auto& dW = grads.weight[li];
    auto& db = grads.bias[li];
    std::vector<double> gin(L.weight.cols, 0.0);
    for (std::size_t r = 0; r < L.weight.rows; ++r) {
      if (g[r] == 0.0) continue;
      db[r] += g[r];
      kernels::axpy(g[r], x, dW.row(r));
      kernels::axpy(g[r], L.weight.row(r), gin);
    }
    g = std::move(gin);
  }
  return g;
}

StackGrads DenseStack::zero_grads() const {
  StackGrads g;
  for (const auto& L : layers_) {
    g.weight.emplace_back(L.weight.rows, L.weight.cols);
    g.bias.emplace_back(L.bias.size(), 0.0);
  }
  return g;
}

std::vector<std::span<double>> DenseStack::parameters() {
  ++version_;
  std::vector<std::span<double>> out;
  for (auto& L : layers_) {
    out.emplace_back(L.weight.data);
    out.emplace_back(L.bias);
  }
  return out;
}

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const char> mask) {
  require(mask.empty() || mask.size() == logits.size(), ErrorKind::InvalidInput,
          "masked_softmax: mask length mismatch");
  auto valid = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid(i)) continue;
    any = true;
    mx = std::max(mx, logits[i]);
  }
  require(any, ErrorKind::InvalidInput, "masked_softmax: every entry is masked");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid(i)) continue;
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
  require(params.size() == grads.size(), ErrorKind::InvalidInput,
          "Adam: parameter/gradient block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size() == grads[b].size(), ErrorKind::InvalidInput,
            "Adam: parameter/gradient shape mismatch");
    for (double g : grads[b]) {
      if (!std::isfinite(g)) fail(ErrorKind::TrainingDivergence, "Adam: non-finite gradient");
    }
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), ErrorKind::InvalidInput,
          "Adam: parameter block count changed between steps");
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(m_[b].size() == params[b].size(), ErrorKind::InvalidInput,
            "Adam: parameter shape changed between steps");
    auto& m = m_[b];
    auto& v = v_[b];
    auto p = params[b];
    auto g = grads[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace sra
