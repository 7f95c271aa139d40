#include "gfmate/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"
#include "gfmate/svd.hpp"

namespace gfmate {

void GcnParams::validate() const {
  if (weights.empty()) fail(ErrorKind::shape, "gcn params: no layers");
  const std::size_t d = dim();
  for (const auto& w : weights) {
    if (w.rows() != d || w.cols() != d) fail(ErrorKind::shape, "gcn params: weights must all be d x d");
    if (!w.all_finite()) fail(ErrorKind::numeric, "gcn params: non-finite weight");
  }
}

GcnParams xavier_init(std::size_t num_layers, std::size_t dim, std::uint64_t seed) {
  if (num_layers == 0 || dim == 0) fail(ErrorKind::invalid_argument, "xavier_init: empty shape");
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(dim + dim));
  GcnParams p;
  for (std::size_t l = 0; l < num_layers; ++l) {
    DenseMatrix w(dim, dim);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
  }
  return p;
}

void EmbeddingStack::validate() const {
  if (layers.empty()) fail(ErrorKind::shape, "embedding stack: no layers");
  for (const auto& h : layers) {
    if (h.rows() != num_nodes() || h.cols() != dim())
      fail(ErrorKind::shape, "embedding stack: layers differ in shape");
    if (!h.all_finite()) fail(ErrorKind::numeric, "embedding stack: non-finite embedding");
  }
}

std::vector<Graph> svd_align(const std::vector<Graph>& graphs, std::size_t dim,
                             std::uint64_t seed, const AlignOptions& opts) {
  if (graphs.empty()) fail(ErrorKind::empty_input, "svd_align: no graphs");
  if (dim == 0) fail(ErrorKind::invalid_argument, "svd_align: target dimension must be >= 1");
  std::vector<Graph> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    const DenseMatrix& x = g.features;
    DenseMatrix aligned(x.rows(), dim);
    const std::size_t k = std::min({dim, x.rows(), x.cols()});
    if (k > 0) {
      const SvdResult svd = truncated_svd(x, k, seed);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) aligned(i, j) = svd.u(i, j) * svd.s[j];
    }
    if (opts.row_normalize) {
      for (std::size_t i = 0; i < aligned.rows(); ++i) {
        auto row = aligned.row(i);
        const double n = norm2(row);
        if (n > kZeroNormGuard)
          for (double& v : row) v /= n;
      }
    }
    Graph a = g;
    a.features = std::move(aligned);
    out.push_back(std::move(a));
  }
  return out;
}

EmbeddingStack gcn_forward(const GcnParams& params, const CsrAdjacency& adj,
                           const DenseMatrix& x) {
  if (x.cols() != params.dim())
    fail(ErrorKind::shape, "gcn_forward: feature width " + std::to_string(x.cols()) +
                               " but model dimension " + std::to_string(params.dim()));
  if (adj.num_rows() != x.rows())
    fail(ErrorKind::shape, "gcn_forward: adjacency and feature row counts differ");
  EmbeddingStack stack;
  stack.layers.reserve(params.num_layers() + 1);
  stack.layers.push_back(x);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    DenseMatrix z = matmul(spmm(adj, stack.layers.back()), params.weights[l]);
    if (l + 1 < params.num_layers()) relu_in_place(z);
    stack.layers.push_back(std::move(z));
  }
  return stack;
}

namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

LinkLoss link_pred_loss(const DenseMatrix& h, const std::vector<Edge>& pos_edges,
                        const std::vector<Edge>& neg_edges) {
  const std::size_t total = pos_edges.size() + neg_edges.size();
  if (total == 0) fail(ErrorKind::empty_input, "link_pred_loss: empty batch");
  LinkLoss out{0.0, DenseMatrix(h.rows(), h.cols())};
  const double inv = 1.0 / static_cast<double>(total);

  auto accumulate = [&](const Edge& e, double label) {
    if (e.src >= h.rows() || e.dst >= h.rows())
      fail(ErrorKind::index, "link_pred_loss: endpoint out of range");
    const auto hu = h.row(e.src);
    const auto hv = h.row(e.dst);
    const double s = dot(hu, hv);
    // BCE(σ(s), y) = softplus(s) − y·s
    out.loss += softplus(s) - label * s;
    const double g = (sigmoid(s) - label) * inv;
    auto gu = out.grad_h.row(e.src);
    auto gv = out.grad_h.row(e.dst);
    for (std::size_t k = 0; k < hu.size(); ++k) {
      gu[k] += g * hv[k];
      gv[k] += g * hu[k];
    }
  };
  for (const auto& e : pos_edges) accumulate(e, 1.0);
  for (const auto& e : neg_edges) accumulate(e, 0.0);
  out.loss *= inv;
  return out;
}

std::vector<DenseMatrix> gcn_backward(const GcnParams& params, const CsrAdjacency& adj,
                                      const EmbeddingStack& stack, const DenseMatrix& grad_last) {
  const std::size_t L = params.num_layers();
  if (stack.depth() != L + 1) fail(ErrorKind::shape, "gcn_backward: stack depth mismatch");
  std::vector<DenseMatrix> grads(L);
  DenseMatrix upstream = grad_last;
  for (std::size_t l = L; l-- > 0;) {
    // Forward was H_{l+1} = act(P W_l) with P = Â H_l.
    if (l + 1 < L) {
      const auto out = stack.layers[l + 1].data();
      auto g = upstream.data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(out[i] > 0.0)) g[i] = 0.0;
    }
    const DenseMatrix p = spmm(adj, stack.layers[l]);
    grads[l] = matmul_tn(p, upstream);
    if (l > 0) {
      // Â is symmetric, so Âᵀ·(dZ Wᵀ) is another spmm.
      upstream = spmm(adj, matmul_nt(upstream, params.weights[l]));
    }
  }
  return grads;
}

void PretrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::config, "pretrain: epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::config, "pretrain: lr must be finite and >= 0");
  if (!(neg_ratio > 0.0)) fail(ErrorKind::config, "pretrain: neg_ratio must be > 0");
  if (batch_edges < 1) fail(ErrorKind::config, "pretrain: batch_edges must be >= 1");
  if (num_layers < 1 || dim < 1) fail(ErrorKind::config, "pretrain: num_layers and dim must be >= 1");
}

std::vector<Edge> sample_negative_edges(std::size_t num_nodes,
                                        const std::vector<std::uint64_t>& edge_keys,
                                        std::size_t count, Rng& rng) {
  std::vector<Edge> out;
  if (num_nodes < 2) return out;
  const std::uint64_t pairs = static_cast<std::uint64_t>(num_nodes) * (num_nodes - 1) / 2;
  if (edge_keys.size() >= pairs) return out;
  out.reserve(count);
  while (out.size() < count) {
    auto u = static_cast<NodeId>(rng.below(num_nodes));
    auto v = static_cast<NodeId>(rng.below(num_nodes));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    const std::uint64_t key = static_cast<std::uint64_t>(u) * num_nodes + v;
    if (std::binary_search(edge_keys.begin(), edge_keys.end(), key)) continue;
    out.push_back({u, v});
  }
  return out;
}

PretrainResult pretrain(const std::vector<Graph>& graphs, const PretrainConfig& cfg) {
  cfg.validate();
  if (graphs.empty()) fail(ErrorKind::empty_input, "pretrain: no source graphs");

  struct Source {
    std::size_t index;
    const Graph* graph;
    CsrAdjacency adj;
    std::vector<std::uint64_t> keys;
  };

  PretrainResult result;
  result.steps_per_graph.assign(graphs.size(), 0);
  std::vector<Source> sources;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    if (g.features.cols() != cfg.dim)
      fail(ErrorKind::shape, "pretrain: graph '" + g.domain_id + "' has feature width " +
                                 std::to_string(g.features.cols()) + ", expected " + std::to_string(cfg.dim));
    if (g.edges.empty()) {
      result.warnings.push_back("skipping edgeless source graph '" + g.domain_id + "'");
      continue;
    }
    Source s{i, &g, normalize_adjacency(g), {}};
    s.keys.reserve(g.edges.size());
    for (const auto& e : g.edges) s.keys.push_back(static_cast<std::uint64_t>(e.src) * g.num_nodes + e.dst);
    std::sort(s.keys.begin(), s.keys.end());
    sources.push_back(std::move(s));
  }
  if (sources.empty()) fail(ErrorKind::no_signal, "pretrain: every source graph is edgeless");

  Rng master(cfg.seed);
  result.params = xavier_init(cfg.num_layers, cfg.dim, master.next());
  Rng sampler = master.split();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Source& src = sources[epoch % sources.size()];
    const Graph& g = *src.graph;

    std::vector<Edge> pos;
    if (cfg.batch_edges >= g.edges.size()) {
      pos = g.edges;
    } else {
      pos.reserve(cfg.batch_edges);
      for (std::size_t k = 0; k < cfg.batch_edges; ++k) pos.push_back(g.edges[sampler.below(g.edges.size())]);
    }
    const auto num_neg = static_cast<std::size_t>(
        std::llround(cfg.neg_ratio * static_cast<double>(pos.size())));
    const std::vector<Edge> neg = sample_negative_edges(g.num_nodes, src.keys, num_neg, sampler);

    const EmbeddingStack stack = gcn_forward(result.params, src.adj, g.features);
    const LinkLoss ll = link_pred_loss(stack.layers.back(), pos, neg);
    if (!std::isfinite(ll.loss)) fail(ErrorKind::numeric, "pretrain: loss became non-finite at epoch " + std::to_string(epoch));
    const auto grads = gcn_backward(result.params, src.adj, stack, ll.grad_h);
    for (std::size_t l = 0; l < grads.size(); ++l) axpy(-cfg.lr, grads[l], result.params.weights[l]);

    result.loss_trace.push_back(ll.loss);
    ++result.steps_per_graph[src.index];
    ++result.total_steps;
  }
  result.params.validate();
  return result;
}

void write_loss_trace_csv(const std::vector<double>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << fmt::format("{},{}\n", i, trace[i]);
}

}  // namespace gfmate
