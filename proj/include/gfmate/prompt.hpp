#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"
#include "gfmate/linalg.hpp"

namespace gfmate {

/// Class centroids per layer: layers[l] is C×d.
struct CentroidMatrix {
  std::vector<DenseMatrix> layers;

  std::size_t depth() const noexcept { return layers.size(); }
  std::size_t num_classes() const noexcept { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }

  friend bool operator==(const CentroidMatrix&, const CentroidMatrix&) = default;
};

/// Centroid offsets β (one C×d matrix per layer) and layer weights η.
struct Prompts {
  std::vector<DenseMatrix> beta;
  std::vector<double> eta;

  std::size_t parameter_count() const noexcept;
  bool all_finite() const noexcept;
  friend bool operator==(const Prompts&, const Prompts&) = default;
};

/// (L+1)·C·d centroid offsets plus L+1 layer weights.
constexpr std::size_t prompt_parameter_count(std::size_t depth, std::size_t num_classes,
                                             std::size_t dim) noexcept {
  return depth * (num_classes * dim + 1);
}

enum class LayerMode { learned, frozen_uniform };
enum class TgclMode { complementary, few_shot_only, pseudo };

const char* to_string(LayerMode m) noexcept;
const char* to_string(TgclMode m) noexcept;
LayerMode parse_layer_mode(const std::string& s);
TgclMode parse_tgcl_mode(const std::string& s);

struct TuneConfig {
  double gamma = 0.5;
  double tau = 0.5;
  double lr = 0.01;
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double beta_init_std = 0.01;
  LayerMode layer_mode = LayerMode::learned;
  TgclMode tgcl_mode = TgclMode::complementary;

  void validate() const;
};

struct ComplementaryLabels {
  std::size_t pivot_layer = 0;
  std::vector<NodeId> nodes;
  std::vector<ClassId> labels;  // aligned with nodes
  std::vector<double> per_layer_entropy;
};

/// Mean of the few-shot embeddings per class and layer.
CentroidMatrix init_centroids(const EmbeddingStack& stack, const FewShotSplit& split);

/// ẽ = e + β
CentroidMatrix refine_centroids(const CentroidMatrix& e, const Prompts& prompts);

/// (L+1)×C matrix of cosine similarities between node and every centroid.
DenseMatrix layer_scores(const EmbeddingStack& stack, const CentroidMatrix& e_tilde, NodeId node);

/// Σ_l η_l · sim(h_i^(l), ẽ_c^(l)) for every class c.
std::vector<double> ensemble_scores(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
                                    const std::vector<double>& eta, NodeId node);

/// Softmax of the ensemble scores.
std::vector<double> ensemble_probabilities(const EmbeddingStack& stack,
                                           const CentroidMatrix& e_tilde,
                                           const std::vector<double>& eta, NodeId node);

/// argmax of the ensemble scores, lowest class index on ties.
std::vector<ClassId> ensemble_predict(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
                                      const std::vector<double>& eta,
                                      const std::vector<NodeId>& nodes);

/// Pivot layer = lowest mean entropy of softmax(sim(h, E)); label = least
/// similar class at the pivot layer. Uses unrefined centroids.
ComplementaryLabels compute_complementary_labels(const EmbeddingStack& stack,
                                                 const CentroidMatrix& e,
                                                 const std::vector<NodeId>& test_ids);

/// Least similar class at the last layer, no entropy selection.
ComplementaryLabels last_layer_complementary_labels(const EmbeddingStack& stack,
                                                    const CentroidMatrix& e,
                                                    const std::vector<NodeId>& test_ids);

/// Most similar class at the last layer.
std::vector<ClassId> last_layer_pseudo_labels(const EmbeddingStack& stack, const CentroidMatrix& e,
                                              const std::vector<NodeId>& test_ids);

/// How test-time targets enter the loss.
enum class TargetKind { complementary, positive };

struct TestTargets {
  std::vector<NodeId> nodes;
  std::vector<ClassId> labels;
  TargetKind kind = TargetKind::complementary;
};

struct ObjectiveValue {
  double loss_te = 0.0;
  double loss_fs = 0.0;
  double loss = 0.0;
  std::vector<DenseMatrix> grad_beta;
  std::vector<double> grad_eta;
};

/// γ·L_Te + (1−γ)·L_Fs over a fixed stack, centroids and targets.
class TgclObjective {
 public:
  TgclObjective(const EmbeddingStack& stack, CentroidMatrix centroids, const FewShotSplit& split,
                TestTargets targets, double gamma, double tau);

  ObjectiveValue evaluate(const Prompts& prompts, bool with_gradient) const;

  const CentroidMatrix& centroids() const noexcept { return centroids_; }

 private:
  struct Term;
  void accumulate(const Term& term, const CentroidMatrix& e_tilde,
                  const std::vector<double>& eta, double& loss, ObjectiveValue* grad) const;

  const EmbeddingStack& stack_;
  CentroidMatrix centroids_;
  std::vector<NodeId> shot_nodes_;
  std::vector<ClassId> shot_labels_;
  TestTargets targets_;
  double gamma_;
  double tau_;
  std::vector<std::vector<double>> node_norms_;  // [layer][node]
};

double loss_te(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
               const std::vector<double>& eta, const ComplementaryLabels& comp, double tau);

double loss_fs(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
               const std::vector<double>& eta, const FewShotSplit& split, double tau);

double tgcl_loss(const EmbeddingStack& stack, const CentroidMatrix& e, const Prompts& prompts,
                 const FewShotSplit& split, const ComplementaryLabels& comp, const TuneConfig& cfg);

struct TgclGradients {
  std::vector<DenseMatrix> beta;
  std::vector<double> eta;
};

TgclGradients tgcl_gradients(const EmbeddingStack& stack, const CentroidMatrix& e,
                             const Prompts& prompts, const FewShotSplit& split,
                             const ComplementaryLabels& comp, const TuneConfig& cfg);

/// β ~ N(0, beta_init_std²) from cfg.seed; η = 1, or 1/(L+1) when frozen.
Prompts initial_prompts(std::size_t depth, std::size_t num_classes, std::size_t dim,
                        const TuneConfig& cfg);

struct HistoryRow {
  std::size_t epoch = 0;
  double loss_te = 0.0;
  double loss_fs = 0.0;
  double loss_tgcl = 0.0;
  double val_acc = 0.0;
};

struct TuneResult {
  Prompts prompts;  // best-validation prompts
  Prompts initial;
  CentroidMatrix centroids;
  std::optional<ComplementaryLabels> comp;
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct TuneInputs {
  /// Test nodes taking part in the test-time loss; defaults to split.test_ids.
  std::optional<std::vector<NodeId>> unlabelled_ids;
};

TuneResult tune(const EmbeddingStack& stack, const Graph& graph, const FewShotSplit& split,
                const TuneConfig& cfg, const TuneInputs& inputs = {});

/// Fraction of nodes whose prediction equals the graph label.
double accuracy(const std::vector<ClassId>& predicted, const std::vector<NodeId>& nodes,
                const Graph& graph);

/// Mean member embedding per layer; one output row per node set.
EmbeddingStack subgraph_embed(const EmbeddingStack& stack,
                              const std::vector<std::vector<NodeId>>& node_sets);

}  // namespace gfmate
