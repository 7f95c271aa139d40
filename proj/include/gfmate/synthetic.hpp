#pragma once

#include <cstdint>
#include <string>

#include "gfmate/graph.hpp"

namespace gfmate {

/// Planted-partition stochastic block model with class-conditional Gaussian
/// node features.
struct SbmSpec {
  std::string domain_id = "sbm";
  std::size_t num_nodes = 500;
  std::size_t num_classes = 3;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t feature_dim = 32;
  /// Norm of each class mean vector.
  double feature_signal = 1.0;
  /// Per-coordinate standard deviation around the class mean.
  double feature_noise = 1.0;
  /// Constant offset added to every feature (domain shift).
  double feature_shift = 0.0;
  std::uint64_t seed = 0;
};

/// Labels are assigned round-robin (node i has class i mod C) so class sizes
/// differ by at most one.
Graph generate_sbm(const SbmSpec& spec);

}  // namespace gfmate
