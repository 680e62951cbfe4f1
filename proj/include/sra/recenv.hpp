#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sra/data.hpp"
#include "sra/gradcore.hpp"
#include "sra/metrics.hpp"

namespace sra {

enum class ModelVariant { MfBpr, Sbpr, SocialLgn, SageLite };

/// How per-layer embeddings form the final representation.
enum class LayerCombine { Mean, Last };

const char* to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& name);

struct RecConfig {
  ModelVariant variant = ModelVariant::SageLite;
  std::size_t dim = 64;
  std::size_t depth = 3;
  double l2 = 1e-4;
  double init_std = 0.1;
  // SAGE-lite only: unit-normalize every layer and scale the final user vectors.
  bool sage_normalize = true;
  LayerCombine sage_combine = LayerCombine::Mean;
  double sage_scale = 10.0;
};

/// Shape of the forward propagation.
struct PropagationSpec {
  std::size_t depth = 0;
  LayerCombine combine = LayerCombine::Mean;
  /// Row-wise unit normalization of every layer (including layer 0).
  bool normalize = false;
  /// Multiplies final user vectors.
  double user_scale = 1.0;
};

/// Intermediate values needed to differentiate a normalized propagation.
struct PropagationTape;

struct TrainOptions {
  std::size_t epochs = 400;
  double lr = 0.01;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  /// Triples per optimizer step; 0 means one full-batch step per epoch.
  std::size_t batch_size = 0;
  /// Adversarial perturbation radius on touched final embeddings (0 = plain BPR).
  double adversarial_eps = 0.0;
  /// Called after epochs divisible by `callback_every` (and before epoch 0 as epoch 0).
  std::function<void(std::size_t epoch, const class RecModel&)> on_epoch;
  std::size_t callback_every = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

// ---------------------------------------------------------------------------
// Propagation

/// CSR operator: out[r] += sum w[k] * src[cols[k]].
struct SparseOp {
  std::size_t rows = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> w;

  SparseOp transposed(std::size_t src_rows) const;
  void apply(const Matrix& src, Matrix& out) const;
};

/// One propagation layer as a linear map over (user block, item block):
///   u' = user_self*u + user_from_item*i + user_from_user*u
///   i' = item_self*i + item_from_user*u
struct PropagationGraph {
  std::size_t users = 0;
  std::size_t items = 0;
  std::vector<double> user_self;
  std::vector<double> item_self;
  SparseOp user_from_item;
  SparseOp user_from_user;
  SparseOp item_from_user;
  // Transposes for reverse mode.
  SparseOp item_from_user_t;  // = user_from_item^T
  SparseOp user_from_user_t;  // = user_from_user^T
  SparseOp user_from_item_t;  // = item_from_user^T
};

enum class Normalization { Symmetric, Mean };

/// `items_of[u]` and `friends_of[u]` list neighbours per user.
PropagationGraph build_graph(Normalization norm, std::size_t items,
                             const std::vector<std::vector<ItemId>>& items_of,
                             const std::vector<std::vector<UserId>>& friends_of);

struct Embeddings {
  EmbeddingTable users;
  EmbeddingTable items;
};

/// Layers 0..depth of the propagation.
std::vector<Embeddings> propagate_layers(const PropagationGraph& graph, const Embeddings& base,
                                         std::size_t depth);
struct PropagationTape {
  std::vector<Embeddings> pre;  // un-normalized layers
};

/// Mean of layers 0..depth, or layer `depth` alone. Records what the reverse
/// pass needs into `tape` when given.
Embeddings propagate(const PropagationGraph& graph, const Embeddings& base,
                     const PropagationSpec& spec, PropagationTape* tape = nullptr);
/// Mean of un-normalized layers 0..depth.
Embeddings propagate(const PropagationGraph& graph, const Embeddings& base, std::size_t depth);
/// Reverse mode of `propagate`: gradient w.r.t. base given gradient w.r.t.
/// final. Normalized specs need the forward tape.
Embeddings propagate_backward(const PropagationGraph& graph, const Embeddings& grad_final,
                              const PropagationSpec& spec, const PropagationTape* tape = nullptr);
/// Symmetric-normalized social+interaction propagation (fused by per-layer mean).
Embeddings propagate_symmetric(const Embeddings& base,
                               const std::vector<std::vector<ItemId>>& items_of,
                               const std::vector<std::vector<UserId>>& friends_of,
                               std::size_t depth);

// ---------------------------------------------------------------------------
// Scoring

/// Final (post-propagation) embeddings answering top-k queries.
struct ScoreView {
  Embeddings final;

  double score(UserId u, ItemId i) const;
  /// k best items excluding `exclude` (sorted), ties by ascending item id.
  RankedList topk(UserId u, std::size_t k, std::span<const ItemId> exclude) const;
  /// Top-k for users [0, users) excluding each user's `exclude[u]`.
  std::vector<std::vector<ItemId>> topk_all(const std::vector<std::vector<ItemId>>& exclude,
                                            std::size_t k, std::size_t users) const;
};

// ---------------------------------------------------------------------------
// Model

class RecModel {
 public:
  RecModel(RecConfig config, std::size_t users, std::size_t items, std::uint64_t seed);

  const RecConfig& config() const { return config_; }
  ModelVariant variant() const { return config_.variant; }
  std::size_t user_count() const { return base_.users.rows; }
  std::size_t item_count() const { return base_.items.rows; }
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }
  bool inductive() const { return config_.variant == ModelVariant::SageLite; }

  /// Graph context: training interactions and social adjacency per user.
  void attach(const std::vector<std::vector<ItemId>>& items_of,
              const std::vector<std::vector<UserId>>& friends_of);
  const std::vector<std::vector<ItemId>>& items_of() const { return items_of_; }
  const std::vector<std::vector<UserId>>& friends_of() const { return friends_of_; }

  const Embeddings& base() const { return base_; }
  Embeddings& mutable_base() {
    stale_ = true;
    return base_;
  }
  /// Propagation depth actually used (0 for the matrix-factorization variants).
  std::size_t effective_depth() const;
  Normalization normalization() const;
  PropagationSpec propagation_spec() const;
  const PropagationGraph& graph() const { return graph_; }

  /// Final embeddings over the attached context (recomputed lazily).
  const ScoreView& view() const;

  TensorArchive to_archive() const;
  static RecModel from_archive(const TensorArchive& archive);

 private:
  void rebuild_graph();

  RecConfig config_;
  Embeddings base_;
  bool trained_ = false;
  std::vector<std::vector<ItemId>> items_of_;
  std::vector<std::vector<UserId>> friends_of_;
  PropagationGraph graph_;
  mutable ScoreView view_;
  mutable bool stale_ = true;
};

/// -ln sigma(y_ui - y_uj) + l2 * (|e_u|^2 + |e_i|^2 + |e_j|^2) on base embeddings.
double bpr_loss(const RecModel& model, UserId u, ItemId pos, ItemId neg, double l2);
/// d bpr_loss / d base embeddings (through the propagation).
Embeddings bpr_gradient(const RecModel& model, UserId u, ItemId pos, ItemId neg, double l2);

/// Stochastic BPR with uniform negatives; SBPR adds friend-consumed middle
/// items; graph variants back-propagate through the propagation.
TrainReport train(RecModel& model, const Split& split, const Dataset& dataset,
                  const TrainOptions& options);

/// Bounded worst-case perturbation training (APR-style). eps = 0 is exactly
/// `train`.
TrainReport adversarial_train(RecModel& model, const Split& split, const Dataset& dataset,
                              double eps, TrainOptions options);

// ---------------------------------------------------------------------------
// Injection

struct FakeUser {
  std::vector<ItemId> items;                    // ordered, distinct
  std::vector<std::pair<UserId, UserId>> pairs;  // each pair spans two communities
};

struct Budget {
  std::size_t max_fake_users = 0;
  std::size_t profile_length = 30;
};

/// Fake users attach to the frozen model's graph; each fake's base vector is
/// the mean of its item profile's base vectors; real users are re-propagated.
ScoreView inject_evasion(const RecModel& model, std::span<const FakeUser> fakes);

/// Appends fake users n, n+1, ... with their interactions and social links.
Dataset inject_poison(const Dataset& dataset, std::span<const FakeUser> fakes,
                      const Budget& budget);

/// The clean split extended with every fake interaction as training data.
Split extend_split(const Split& clean, const Dataset& polluted, std::size_t real_users);

/// Mean metrics over real users with the model's current view.
MetricsReport evaluate_view(const ScoreView& view, const Split& split, std::size_t real_users,
                            const std::string& label);

}  // namespace sra
