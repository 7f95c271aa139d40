#include "gfmate/synthetic.hpp"

#include <cmath>

#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"

namespace gfmate {

Graph generate_sbm(const SbmSpec& spec) {
  if (spec.num_nodes == 0 || spec.num_classes == 0 || spec.feature_dim == 0)
    fail(ErrorKind::invalid_argument, "sbm: nodes, classes and feature_dim must be positive");
  if (!(spec.p_in >= 0.0 && spec.p_in <= 1.0 && spec.p_out >= 0.0 && spec.p_out <= 1.0))
    fail(ErrorKind::invalid_argument, "sbm: probabilities must lie in [0, 1]");

  Rng rng(spec.seed);
  Rng structure = rng.split();
  Rng features = rng.split();

  Graph g;
  g.domain_id = spec.domain_id;
  g.num_nodes = spec.num_nodes;
  g.num_classes = spec.num_classes;
  g.labels.resize(spec.num_nodes);
  for (std::size_t i = 0; i < spec.num_nodes; ++i)
    g.labels[i] = static_cast<ClassId>(i % spec.num_classes);

  for (std::size_t i = 0; i < spec.num_nodes; ++i)
    for (std::size_t j = i + 1; j < spec.num_nodes; ++j) {
      const double p = g.labels[i] == g.labels[j] ? spec.p_in : spec.p_out;
      if (structure.uniform() < p)
        g.edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }

  DenseMatrix means(spec.num_classes, spec.feature_dim);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto row = means.row(c);
    for (double& v : row) v = features.normal();
    const double n = norm2(row);
    for (double& v : row) v *= spec.feature_signal / (n > 0.0 ? n : 1.0);
  }
  g.features = DenseMatrix(spec.num_nodes, spec.feature_dim);
  for (std::size_t i = 0; i < spec.num_nodes; ++i) {
    const auto mu = means.row(static_cast<std::size_t>(g.labels[i]));
    auto row = g.features.row(i);
    for (std::size_t k = 0; k < spec.feature_dim; ++k)
      row[k] = mu[k] + spec.feature_shift + spec.feature_noise * features.normal();
  }
  g.validate();
  return g;
}

}  // namespace gfmate
