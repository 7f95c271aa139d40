#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gfmate/graph.hpp"
#include "gfmate/linalg.hpp"

namespace gfmate {

/// Frozen encoder weights: L square d×d matrices, no biases.
struct GcnParams {
  std::vector<DenseMatrix> weights;

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t dim() const noexcept { return weights.empty() ? 0 : weights.front().rows(); }

  void validate() const;
  friend bool operator==(const GcnParams&, const GcnParams&) = default;
};

/// Xavier-uniform initialization, U(-a, a) with a = sqrt(6 / (d + d)).
GcnParams xavier_init(std::size_t num_layers, std::size_t dim, std::uint64_t seed);

/// Per-layer node embeddings H^(0..L); layer 0 is the aligned input.
struct EmbeddingStack {
  std::vector<DenseMatrix> layers;

  std::size_t depth() const noexcept { return layers.size(); }
  std::size_t num_nodes() const noexcept { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }

  void validate() const;
};

struct AlignOptions {
  /// L2-normalize every row after projection.
  bool row_normalize = true;
};

/// Projects each domain's features independently onto its top-d singular
/// directions (X' = U_k S_k), zero-padding columns when fewer than d exist.
std::vector<Graph> svd_align(const std::vector<Graph>& graphs, std::size_t dim,
                             std::uint64_t seed, const AlignOptions& opts = {});

EmbeddingStack gcn_forward(const GcnParams& params, const CsrAdjacency& adj,
                           const DenseMatrix& x);

struct LinkSample {
  NodeId u = 0;
  NodeId v = 0;
  double label = 0.0;  // 1 for an edge, 0 for a non-edge
};

struct LinkLoss {
  double loss = 0.0;
  DenseMatrix grad_h;
};

/// Mean binary cross-entropy of σ(h_u·h_v) over positives and negatives,
/// with its exact gradient with respect to h.
LinkLoss link_pred_loss(const DenseMatrix& h, const std::vector<Edge>& pos_edges,
                        const std::vector<Edge>& neg_edges);

/// Weight gradients of a scalar loss given dLoss/dH^(L), by backpropagation
/// through the forward pass in `stack`.
std::vector<DenseMatrix> gcn_backward(const GcnParams& params, const CsrAdjacency& adj,
                                      const EmbeddingStack& stack, const DenseMatrix& grad_last);

struct PretrainConfig {
  std::size_t epochs = 200;
  double lr = 0.01;
  double neg_ratio = 1.0;
  std::size_t batch_edges = 512;
  std::uint64_t seed = 0;
  std::size_t num_layers = 2;
  std::size_t dim = 256;

  void validate() const;
};

struct PretrainResult {
  GcnParams params;
  std::vector<double> loss_trace;           // one entry per epoch
  std::vector<std::size_t> steps_per_graph;  // indexed like the input list
  std::size_t total_steps = 0;
  std::vector<std::string> warnings;
};

/// Link-prediction pre-training with plain SGD. Each epoch is one step on the
/// next usable source graph in round-robin order.
PretrainResult pretrain(const std::vector<Graph>& graphs, const PretrainConfig& cfg);

/// Uniform non-edge sampling with rejection. `edge_keys` holds u·N+v for u<v.
std::vector<Edge> sample_negative_edges(std::size_t num_nodes,
                                        const std::vector<std::uint64_t>& edge_keys,
                                        std::size_t count, class Rng& rng);

void write_loss_trace_csv(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace gfmate
