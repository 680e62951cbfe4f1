#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sra/rng.hpp"

namespace sra {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Lookup table of latent vectors (user/item/node embeddings).
using EmbeddingTable = Matrix;

EmbeddingTable random_table(std::size_t rows, std::size_t dim, double stddev, Rng& rng);

enum class Activation { Identity, Relu };

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::Identity;
};

/// Gradients shaped like a DenseStack's parameters.
struct StackGrads {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  void zero();
  void scale(double s);
  std::vector<std::span<const double>> spans() const;
};

/// Feed-forward stack of affine maps with per-layer activation.
class DenseStack {
 public:
  struct Cache {
    std::vector<std::vector<double>> inputs;  // input to each layer
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
    const DenseStack* owner = nullptr;
    std::uint64_t version = 0;
  };

  DenseStack() = default;
  explicit DenseStack(std::vector<DenseLayer> layers);
  /// dims = {in, h1, ..., out}; hidden layers use `hidden`, the last layer is
  /// identity. Weights are He-uniform scaled by `gain`, biases zero.
  static DenseStack make(const std::vector<std::size_t>& dims, Activation hidden, Rng& rng,
                         double gain = 1.0);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t depth() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  /// Mutable access bumps the version, invalidating outstanding caches.
  std::vector<DenseLayer>& mutable_layers();

  std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients into `grads`; returns d loss / d input.
  std::vector<double> backward(const Cache& cache, std::span<const double> out_grad,
                               StackGrads& grads) const;

  StackGrads zero_grads() const;
  std::vector<std::span<double>> parameters();
  std::uint64_t version() const { return version_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 1;
};

/// Softmax over unmasked entries; masked entries are exactly zero.
std::vector<double> masked_softmax(std::span<const double> logits, std::span<const char> mask);
double entropy(std::span<const double> probs);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over an ordered list of parameter blocks. Moments are
/// allocated on the first step; later steps must present the same shapes.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Named row-major 2-D tensors of doubles. `.json` paths use a JSON layout;
/// anything else uses a flat little-endian binary layout.
class TensorArchive {
 public:
  void put(const std::string& name, std::size_t rows, std::size_t cols,
           std::span<const double> data);
  void put(const std::string& name, const Matrix& m) { put(name, m.rows, m.cols, m.data); }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Matrix& get(const std::string& name) const;
  const std::map<std::string, Matrix>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, Matrix> entries_;
};

void store_stack(TensorArchive& archive, const std::string& prefix, const DenseStack& stack);
/// Activations are not archived: hidden layers are rectifier, the last is identity.
DenseStack load_stack(const TensorArchive& archive, const std::string& prefix);

}  // namespace sra
