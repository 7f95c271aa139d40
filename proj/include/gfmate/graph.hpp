#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gfmate/linalg.hpp"

namespace gfmate {

using NodeId = std::uint32_t;
using ClassId = std::int32_t;

/// Marks an unlabelled node in Graph::labels.
inline constexpr ClassId kNoLabel = -1;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One domain: undirected structure stored once per edge (src < dst), raw
/// features, optional labels and a domain tag.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  DenseMatrix features;
  std::vector<ClassId> labels;  // empty, or one entry per node (kNoLabel allowed)
  std::string domain_id;
  std::size_t num_classes = 0;

  bool has_labels() const noexcept { return !labels.empty(); }

  /// Throws index/shape errors when an invariant does not hold.
  void validate() const;
};

/// Sorts (min, max) pairs, drops self-loops and duplicates.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

struct LoadOptions {
  bool feature_header = false;
  std::optional<std::size_t> num_classes;
  std::string domain_id;
};

/// Reads the edge-list, feature CSV and label CSV triple. The node count is
/// the number of feature rows.
Graph load_edge_list(const std::filesystem::path& edge_path,
                     const std::filesystem::path& feature_path,
                     const std::filesystem::path& label_path,
                     const LoadOptions& opts = {});

/// D̃^{-1/2}(A + I)D̃^{-1/2} in CSR form. Both directions are materialized.
CsrAdjacency normalize_adjacency(const Graph& g);

struct FewShotSplit {
  std::map<ClassId, std::vector<NodeId>> shots;
  std::vector<NodeId> val_ids;
  std::vector<NodeId> test_ids;
  std::size_t m = 0;
  std::uint64_t seed = 0;

  std::vector<NodeId> shot_ids() const;
};

/// m shots per class, remaining labelled nodes split ⌊n/10⌋ val, rest test.
FewShotSplit sample_few_shot_split(const Graph& g, std::size_t m, std::uint64_t seed);

/// ⌈ratio·|test_ids|⌉ selected test rows are permuted among themselves.
Graph perturb_features(const Graph& g, const std::vector<NodeId>& test_ids, double ratio,
                       std::uint64_t seed);

/// Each edge touching a test node is dropped with probability ratio.
Graph perturb_edges(const Graph& g, const std::vector<NodeId>& test_ids, double ratio,
                    std::uint64_t seed);

/// Relabels to two classes: 0 for group_a, 1 for the rest.
Graph merge_classes(const Graph& g, const std::set<ClassId>& group_a);

/// A uniformly drawn class subset of the given size, for merge_classes.
std::set<ClassId> random_class_group(std::size_t num_classes, std::size_t size,
                                     std::uint64_t seed);

/// Nodes per class (labelled nodes only).
std::vector<std::size_t> class_counts(const Graph& g);

}  // namespace gfmate
