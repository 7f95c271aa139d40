#include "gfmate/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"

namespace gfmate {

namespace {

constexpr double kLogClamp = 1e-12;

void check_stack_centroids(const EmbeddingStack& stack, const CentroidMatrix& e) {
  if (stack.depth() != e.depth() || stack.dim() != e.dim())
    fail(ErrorKind::shape, "centroids (" + std::to_string(e.depth()) + " layers, dim " +
                               std::to_string(e.dim()) + ") do not match embedding stack (" +
                               std::to_string(stack.depth()) + " layers, dim " +
                               std::to_string(stack.dim()) + ")");
}

void check_eta(const CentroidMatrix& e, const std::vector<double>& eta) {
  if (eta.size() != e.depth())
    fail(ErrorKind::shape, "layer prompt has " + std::to_string(eta.size()) + " entries for " +
                               std::to_string(e.depth()) + " layers");
}

void check_node(const EmbeddingStack& stack, NodeId node) {
  if (node >= stack.num_nodes())
    fail(ErrorKind::index, "node " + std::to_string(node) + " outside embedding stack of " +
                               std::to_string(stack.num_nodes()) + " nodes");
}

}  // namespace

std::size_t Prompts::parameter_count() const noexcept {
  std::size_t n = eta.size();
  for (const auto& b : beta) n += b.rows() * b.cols();
  return n;
}

bool Prompts::all_finite() const noexcept {
  return std::all_of(beta.begin(), beta.end(), [](const DenseMatrix& b) { return b.all_finite(); }) &&
         std::all_of(eta.begin(), eta.end(), [](double v) { return std::isfinite(v); });
}

const char* to_string(LayerMode m) noexcept {
  return m == LayerMode::learned ? "learned" : "frozen-uniform";
}

const char* to_string(TgclMode m) noexcept {
  switch (m) {
    case TgclMode::complementary: return "complementary";
    case TgclMode::few_shot_only: return "few-shot-only";
    case TgclMode::pseudo: return "pseudo";
  }
  return "?";
}

LayerMode parse_layer_mode(const std::string& s) {
  if (s == "learned") return LayerMode::learned;
  if (s == "frozen-uniform") return LayerMode::frozen_uniform;
  fail(ErrorKind::config, "unknown layer_mode '" + s + "'");
}

TgclMode parse_tgcl_mode(const std::string& s) {
  if (s == "complementary") return TgclMode::complementary;
  if (s == "few-shot-only") return TgclMode::few_shot_only;
  if (s == "pseudo") return TgclMode::pseudo;
  fail(ErrorKind::config, "unknown tgcl_mode '" + s + "'");
}

void TuneConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorKind::config, "tune: gamma must lie in [0, 1]");
  if (!(tau > 0.0)) fail(ErrorKind::config, "tune: tau must be > 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::config, "tune: lr must be finite and >= 0");
  if (!(beta_init_std >= 0.0)) fail(ErrorKind::config, "tune: beta_init_std must be >= 0");
}

CentroidMatrix init_centroids(const EmbeddingStack& stack, const FewShotSplit& split) {
  stack.validate();
  if (split.shots.empty()) fail(ErrorKind::missing_class, "init_centroids: split has no classes");
  const std::size_t num_classes = static_cast<std::size_t>(split.shots.rbegin()->first) + 1;
  CentroidMatrix e;
  for (const auto& h : stack.layers) {
    DenseMatrix c(num_classes, stack.dim());
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
      const auto it = split.shots.find(static_cast<ClassId>(cls));
      if (it == split.shots.end() || it->second.empty())
        fail(ErrorKind::missing_class, "init_centroids: class " + std::to_string(cls) + " has no shots");
      auto row = c.row(cls);
      for (const NodeId v : it->second) {
        check_node(stack, v);
        const auto src = h.row(v);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += src[k];
      }
      const double inv = 1.0 / static_cast<double>(it->second.size());
      for (double& x : row) x *= inv;
    }
    e.layers.push_back(std::move(c));
  }
  return e;
}

CentroidMatrix refine_centroids(const CentroidMatrix& e, const Prompts& prompts) {
  if (prompts.beta.size() != e.depth())
    fail(ErrorKind::shape, "refine_centroids: prompt depth differs from centroid depth");
  CentroidMatrix out = e;
  for (std::size_t l = 0; l < e.depth(); ++l) axpy(1.0, prompts.beta[l], out.layers[l]);
  return out;
}

DenseMatrix layer_scores(const EmbeddingStack& stack, const CentroidMatrix& e_tilde, NodeId node) {
  check_stack_centroids(stack, e_tilde);
  check_node(stack, node);
  DenseMatrix s(e_tilde.depth(), e_tilde.num_classes());
  for (std::size_t l = 0; l < e_tilde.depth(); ++l)
    for (std::size_t c = 0; c < e_tilde.num_classes(); ++c)
      s(l, c) = cosine_sim(stack.layers[l].row(node), e_tilde.layers[l].row(c));
  return s;
}

std::vector<double> ensemble_scores(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
                                    const std::vector<double>& eta, NodeId node) {
  check_eta(e_tilde, eta);
  const DenseMatrix s = layer_scores(stack, e_tilde, node);
  std::vector<double> total(e_tilde.num_classes(), 0.0);
  for (std::size_t l = 0; l < s.rows(); ++l)
    for (std::size_t c = 0; c < s.cols(); ++c) total[c] += eta[l] * s(l, c);
  return total;
}

std::vector<double> ensemble_probabilities(const EmbeddingStack& stack,
                                           const CentroidMatrix& e_tilde,
                                           const std::vector<double>& eta, NodeId node) {
  return row_softmax(ensemble_scores(stack, e_tilde, eta, node), 1.0);
}

std::vector<ClassId> ensemble_predict(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
                                      const std::vector<double>& eta,
                                      const std::vector<NodeId>& nodes) {
  std::vector<ClassId> out;
  out.reserve(nodes.size());
  // Softmax is monotone, so the argmax is taken on the raw scores.
  for (const NodeId v : nodes)
    out.push_back(static_cast<ClassId>(argmax(ensemble_scores(stack, e_tilde, eta, v))));
  return out;
}

ComplementaryLabels compute_complementary_labels(const EmbeddingStack& stack,
                                                 const CentroidMatrix& e,
                                                 const std::vector<NodeId>& test_ids) {
  if (test_ids.empty()) fail(ErrorKind::empty_input, "complementary labels: no test nodes");
  check_stack_centroids(stack, e);
  ComplementaryLabels out;
  out.nodes = test_ids;
  out.per_layer_entropy.assign(e.depth(), 0.0);
  std::vector<double> sims(e.num_classes());
  for (std::size_t l = 0; l < e.depth(); ++l) {
    double total = 0.0;
    for (const NodeId v : test_ids) {
      check_node(stack, v);
      for (std::size_t c = 0; c < sims.size(); ++c)
        sims[c] = cosine_sim(stack.layers[l].row(v), e.layers[l].row(c));
      total += shannon_entropy(row_softmax(sims, 1.0));
    }
    out.per_layer_entropy[l] = total / static_cast<double>(test_ids.size());
  }
  out.pivot_layer = argmin(out.per_layer_entropy);
  out.labels.reserve(test_ids.size());
  for (const NodeId v : test_ids) {
    for (std::size_t c = 0; c < sims.size(); ++c)
      sims[c] = cosine_sim(stack.layers[out.pivot_layer].row(v), e.layers[out.pivot_layer].row(c));
    out.labels.push_back(static_cast<ClassId>(argmin(sims)));
  }
  return out;
}

ComplementaryLabels last_layer_complementary_labels(const EmbeddingStack& stack,
                                                    const CentroidMatrix& e,
                                                    const std::vector<NodeId>& test_ids) {
  if (test_ids.empty()) fail(ErrorKind::empty_input, "complementary labels: no test nodes");
  check_stack_centroids(stack, e);
  ComplementaryLabels out;
  out.nodes = test_ids;
  out.pivot_layer = e.depth() - 1;
  std::vector<double> sims(e.num_classes());
  for (const NodeId v : test_ids) {
    check_node(stack, v);
    for (std::size_t c = 0; c < sims.size(); ++c)
      sims[c] = cosine_sim(stack.layers[out.pivot_layer].row(v), e.layers[out.pivot_layer].row(c));
    out.labels.push_back(static_cast<ClassId>(argmin(sims)));
  }
  return out;
}

std::vector<ClassId> last_layer_pseudo_labels(const EmbeddingStack& stack, const CentroidMatrix& e,
                                              const std::vector<NodeId>& test_ids) {
  check_stack_centroids(stack, e);
  const std::size_t last = e.depth() - 1;
  std::vector<ClassId> out;
  std::vector<double> sims(e.num_classes());
  for (const NodeId v : test_ids) {
    check_node(stack, v);
    for (std::size_t c = 0; c < sims.size(); ++c)
      sims[c] = cosine_sim(stack.layers[last].row(v), e.layers[last].row(c));
    out.push_back(static_cast<ClassId>(argmax(sims)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TGCL objective

struct TgclObjective::Term {
  const std::vector<NodeId>* nodes;
  const std::vector<ClassId>* labels;
  TargetKind kind;
  double weight;  // per-node weight, already divided by the set size
};

TgclObjective::TgclObjective(const EmbeddingStack& stack, CentroidMatrix centroids,
                             const FewShotSplit& split, TestTargets targets, double gamma,
                             double tau)
    : stack_(stack),
      centroids_(std::move(centroids)),
      targets_(std::move(targets)),
      gamma_(gamma),
      tau_(tau) {
  check_stack_centroids(stack_, centroids_);
  if (!(tau_ > 0.0)) fail(ErrorKind::invalid_argument, "tgcl: tau must be > 0");
  if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) fail(ErrorKind::invalid_argument, "tgcl: gamma must lie in [0, 1]");
  if (targets_.nodes.size() != targets_.labels.size())
    fail(ErrorKind::shape, "tgcl: test target nodes and labels differ in length");
  for (const auto& [cls, ids] : split.shots)
    for (const NodeId v : ids) {
      shot_nodes_.push_back(v);
      shot_labels_.push_back(cls);
    }
  const std::size_t C = centroids_.num_classes();
  auto check_labels = [&](const std::vector<NodeId>& nodes, const std::vector<ClassId>& labels) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      check_node(stack_, nodes[i]);
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C)
        fail(ErrorKind::index, "tgcl: target class out of range");
    }
  };
  check_labels(shot_nodes_, shot_labels_);
  check_labels(targets_.nodes, targets_.labels);

  node_norms_.resize(stack_.depth());
  for (std::size_t l = 0; l < stack_.depth(); ++l) {
    node_norms_[l].resize(stack_.num_nodes());
    for (std::size_t i = 0; i < stack_.num_nodes(); ++i)
      node_norms_[l][i] = norm2(stack_.layers[l].row(i));
  }
}

void TgclObjective::accumulate(const Term& term, const CentroidMatrix& e_tilde,
                               const std::vector<double>& eta, double& loss,
                               ObjectiveValue* grad) const {
  const std::size_t C = e_tilde.num_classes();
  const std::size_t d = e_tilde.dim();
  const bool want_grad = grad != nullptr && term.weight != 0.0;
  std::vector<double> sims(C), z(C), dz(C), centroid_norms(C);
  DenseMatrix acc_h(C, d);
  std::vector<double> acc_s(C);

  for (std::size_t l = 0; l < e_tilde.depth(); ++l) {
    const DenseMatrix& centers = e_tilde.layers[l];
    for (std::size_t c = 0; c < C; ++c) centroid_norms[c] = norm2(centers.row(c));
    if (want_grad) {
      std::fill(acc_h.data().begin(), acc_h.data().end(), 0.0);
      std::fill(acc_s.begin(), acc_s.end(), 0.0);
    }
    double layer_loss = 0.0;
    double eta_grad = 0.0;

    for (std::size_t k = 0; k < term.nodes->size(); ++k) {
      const NodeId v = (*term.nodes)[k];
      const auto target = static_cast<std::size_t>((*term.labels)[k]);
      const auto h = stack_.layers[l].row(v);
      const double nh = node_norms_[l][v];
      for (std::size_t c = 0; c < C; ++c) {
        const double ne = centroid_norms[c];
        sims[c] = (nh < kZeroNormGuard || ne < kZeroNormGuard) ? 0.0 : dot(h, centers.row(c)) / (nh * ne);
        z[c] = eta[l] * sims[c] / tau_;
      }
      const double lse = log_sum_exp(z);

      if (term.kind == TargetKind::positive) {
        layer_loss -= z[target] - lse;
        if (want_grad)
          for (std::size_t c = 0; c < C; ++c)
            dz[c] = term.weight * (std::exp(z[c] - lse) - (c == target ? 1.0 : 0.0));
      } else {
        // log(1 − p_ȳ) = logsumexp over the other classes − logsumexp over all.
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < C; ++c)
          if (c != target) top = std::max(top, z[c]);
        double rest = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          if (c != target) rest += std::exp(z[c] - top);
        const double log_rest = C > 1 ? top + std::log(rest) - lse : -std::numeric_limits<double>::infinity();
        const bool clamped = !(log_rest >= std::log(kLogClamp));
        layer_loss -= clamped ? std::log(kLogClamp) : log_rest;
        if (want_grad) {
          if (clamped) {
            std::fill(dz.begin(), dz.end(), 0.0);
          } else {
            const double p_bar = std::exp(z[target] - lse);
            const double one_minus = std::exp(log_rest);
            for (std::size_t c = 0; c < C; ++c) {
              const double p_c = std::exp(z[c] - lse);
              dz[c] = term.weight * (c == target ? p_bar : -p_bar * p_c / one_minus);
            }
          }
        }
      }

      if (!want_grad) continue;
      for (std::size_t c = 0; c < C; ++c) {
        if (dz[c] == 0.0) continue;
        eta_grad += dz[c] * sims[c] / tau_;
        const double ne = centroid_norms[c];
        if (nh < kZeroNormGuard || ne < kZeroNormGuard) continue;
        const double ds = dz[c] * eta[l] / tau_;
        // ∂cos/∂e = h/(‖h‖‖e‖) − cos·e/‖e‖²; the first part is accumulated
        // as Σ ds·h/‖h‖ and divided by ‖e‖ once per class below.
        auto row = acc_h.row(c);
        const double f = ds / nh;
        for (std::size_t j = 0; j < d; ++j) row[j] += f * h[j];
        acc_s[c] += ds * sims[c];
      }
    }

    loss += term.weight * layer_loss;
    if (want_grad) {
      grad->grad_eta[l] += eta_grad;
      for (std::size_t c = 0; c < C; ++c) {
        const double ne = centroid_norms[c];
        if (ne < kZeroNormGuard) continue;
        auto g = grad->grad_beta[l].row(c);
        const auto e = centers.row(c);
        const auto a = acc_h.row(c);
        for (std::size_t j = 0; j < d; ++j) g[j] += a[j] / ne - acc_s[c] * e[j] / (ne * ne);
      }
    }
  }
}

ObjectiveValue TgclObjective::evaluate(const Prompts& prompts, bool with_gradient) const {
  check_eta(centroids_, prompts.eta);
  const CentroidMatrix e_tilde = refine_centroids(centroids_, prompts);
  ObjectiveValue out;
  if (with_gradient) {
    out.grad_eta.assign(e_tilde.depth(), 0.0);
    for (const auto& layer : e_tilde.layers) out.grad_beta.emplace_back(layer.rows(), layer.cols());
  }

  // Losses are accumulated unweighted by γ first so each part is reported on
  // its own; gradients carry the γ factor through the term weight.
  const double fs_scale = shot_nodes_.empty() ? 0.0 : 1.0 / static_cast<double>(shot_nodes_.size());
  const double te_scale = targets_.nodes.empty() ? 0.0 : 1.0 / static_cast<double>(targets_.nodes.size());

  {
    double raw = 0.0;
    const Term plain{&shot_nodes_, &shot_labels_, TargetKind::positive, fs_scale};
    accumulate(plain, e_tilde, prompts.eta, raw, nullptr);
    out.loss_fs = raw;
  }
  {
    double raw = 0.0;
    const Term plain{&targets_.nodes, &targets_.labels, targets_.kind, te_scale};
    accumulate(plain, e_tilde, prompts.eta, raw, nullptr);
    out.loss_te = raw;
  }
  out.loss = gamma_ * out.loss_te + (1.0 - gamma_) * out.loss_fs;

  if (with_gradient) {
    double ignored = 0.0;
    const Term fs{&shot_nodes_, &shot_labels_, TargetKind::positive, (1.0 - gamma_) * fs_scale};
    accumulate(fs, e_tilde, prompts.eta, ignored, &out);
    const Term te{&targets_.nodes, &targets_.labels, targets_.kind, gamma_ * te_scale};
    accumulate(te, e_tilde, prompts.eta, ignored, &out);
  }
  return out;
}

namespace {

TestTargets complementary_targets(const ComplementaryLabels& comp) {
  return {comp.nodes, comp.labels, TargetKind::complementary};
}

Prompts zero_beta_prompts(const CentroidMatrix& e, const std::vector<double>& eta) {
  Prompts p;
  for (const auto& layer : e.layers) p.beta.emplace_back(layer.rows(), layer.cols());
  p.eta = eta;
  return p;
}

}  // namespace

double loss_te(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
               const std::vector<double>& eta, const ComplementaryLabels& comp, double tau) {
  const TgclObjective obj(stack, e_tilde, FewShotSplit{}, complementary_targets(comp), 1.0, tau);
  return obj.evaluate(zero_beta_prompts(e_tilde, eta), false).loss_te;
}

double loss_fs(const EmbeddingStack& stack, const CentroidMatrix& e_tilde,
               const std::vector<double>& eta, const FewShotSplit& split, double tau) {
  const TgclObjective obj(stack, e_tilde, split, TestTargets{}, 0.0, tau);
  return obj.evaluate(zero_beta_prompts(e_tilde, eta), false).loss_fs;
}

double tgcl_loss(const EmbeddingStack& stack, const CentroidMatrix& e, const Prompts& prompts,
                 const FewShotSplit& split, const ComplementaryLabels& comp, const TuneConfig& cfg) {
  const TgclObjective obj(stack, e, split, complementary_targets(comp), cfg.gamma, cfg.tau);
  return obj.evaluate(prompts, false).loss;
}

TgclGradients tgcl_gradients(const EmbeddingStack& stack, const CentroidMatrix& e,
                             const Prompts& prompts, const FewShotSplit& split,
                             const ComplementaryLabels& comp, const TuneConfig& cfg) {
  const TgclObjective obj(stack, e, split, complementary_targets(comp), cfg.gamma, cfg.tau);
  ObjectiveValue v = obj.evaluate(prompts, true);
  return {std::move(v.grad_beta), std::move(v.grad_eta)};
}

Prompts initial_prompts(std::size_t depth, std::size_t num_classes, std::size_t dim,
                        const TuneConfig& cfg) {
  Rng rng(cfg.seed);
  Prompts p;
  for (std::size_t l = 0; l < depth; ++l) {
    DenseMatrix b(num_classes, dim);
    for (double& v : b.data()) v = cfg.beta_init_std * rng.normal();
    p.beta.push_back(std::move(b));
  }
  const double eta0 = cfg.layer_mode == LayerMode::frozen_uniform ? 1.0 / static_cast<double>(depth) : 1.0;
  p.eta.assign(depth, eta0);
  return p;
}

double accuracy(const std::vector<ClassId>& predicted, const std::vector<NodeId>& nodes,
                const Graph& graph) {
  if (predicted.size() != nodes.size()) fail(ErrorKind::shape, "accuracy: length mismatch");
  if (nodes.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (graph.labels.at(nodes[i]) == predicted[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

TuneResult tune(const EmbeddingStack& stack, const Graph& graph, const FewShotSplit& split,
                const TuneConfig& cfg, const TuneInputs& inputs) {
  cfg.validate();
  TuneResult result;
  result.centroids = init_centroids(stack, split);
  const std::size_t depth = stack.depth();
  result.initial = initial_prompts(depth, result.centroids.num_classes(), stack.dim(), cfg);

  const std::vector<NodeId>& unlabelled = inputs.unlabelled_ids ? *inputs.unlabelled_ids : split.test_ids;
  double gamma = cfg.gamma;
  TestTargets targets;
  if (cfg.tgcl_mode == TgclMode::few_shot_only || unlabelled.empty()) {
    gamma = 0.0;
  } else if (cfg.tgcl_mode == TgclMode::complementary) {
    result.comp = compute_complementary_labels(stack, result.centroids, unlabelled);
    targets = complementary_targets(*result.comp);
  } else {
    targets = {unlabelled, last_layer_pseudo_labels(stack, result.centroids, unlabelled),
               TargetKind::positive};
  }
  const TgclObjective objective(stack, result.centroids, split, std::move(targets), gamma, cfg.tau);
  const bool learn_eta = cfg.layer_mode == LayerMode::learned;

  Prompts current = result.initial;
  Prompts best = current;
  double best_val = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const ObjectiveValue v = objective.evaluate(current, true);
    if (!std::isfinite(v.loss)) fail(ErrorKind::numeric, "tune: loss became non-finite at epoch " + std::to_string(epoch));
    const CentroidMatrix e_tilde = refine_centroids(result.centroids, current);
    const double val = accuracy(ensemble_predict(stack, e_tilde, current.eta, split.val_ids),
                                split.val_ids, graph);
    result.history.push_back({epoch, v.loss_te, v.loss_fs, v.loss, val});
    if (epoch == 0) result.initial_loss = v.loss;

    if (split.val_ids.empty() || val > best_val) {
      best_val = val;
      best = current;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }

    for (std::size_t l = 0; l < depth; ++l) {
      axpy(-cfg.lr, v.grad_beta[l], current.beta[l]);
      if (learn_eta) current.eta[l] -= cfg.lr * v.grad_eta[l];
    }
    if (!current.all_finite()) fail(ErrorKind::numeric, "tune: prompts became non-finite");
  }
  // Without a validation set the last iterate is returned.
  result.prompts = split.val_ids.empty() ? std::move(current) : std::move(best);
  result.final_loss = result.history.empty() ? 0.0 : objective.evaluate(result.prompts, false).loss;
  return result;
}

EmbeddingStack subgraph_embed(const EmbeddingStack& stack,
                              const std::vector<std::vector<NodeId>>& node_sets) {
  EmbeddingStack out;
  for (const auto& h : stack.layers) {
    DenseMatrix pooled(node_sets.size(), h.cols());
    for (std::size_t s = 0; s < node_sets.size(); ++s) {
      if (node_sets[s].empty())
        fail(ErrorKind::empty_input, "subgraph_embed: node set " + std::to_string(s) + " is empty");
      auto row = pooled.row(s);
      for (const NodeId v : node_sets[s]) {
        check_node(stack, v);
        const auto src = h.row(v);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += src[k];
      }
      const double inv = 1.0 / static_cast<double>(node_sets[s].size());
      for (double& x : row) x *= inv;
    }
    out.layers.push_back(std::move(pooled));
  }
  return out;
}

}  // namespace gfmate
