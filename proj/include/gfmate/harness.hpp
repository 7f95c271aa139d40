#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"
#include "gfmate/prompt.hpp"
#include "gfmate/synthetic.hpp"

namespace gfmate {

/// One dataset in a manifest: either on-disk files or a synthetic SBM.
struct DomainEntry {
  std::string domain_id;
  std::filesystem::path edge_path;
  std::filesystem::path feature_path;
  std::filesystem::path label_path;
  std::optional<std::size_t> num_classes;
  bool feature_header = false;
  std::optional<SbmSpec> synthetic;
};

struct Manifest {
  std::vector<DomainEntry> domains;

  /// Relative file paths resolve against the manifest's directory.
  static Manifest load(const std::filesystem::path& path);
  static Manifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  const DomainEntry* find(const std::string& domain_id) const noexcept;
};

Graph load_domain(const DomainEntry& entry);

enum class SweepKind { none, ratio, perturb_features, perturb_edges, shots };

const char* to_string(SweepKind k) noexcept;
SweepKind parse_sweep_kind(const std::string& s);

struct SweepSpec {
  SweepKind kind = SweepKind::none;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::filesystem::path manifest_path;
  std::string target_domain;
  std::size_t shots = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  PretrainConfig pretrain;
  TuneConfig tune;
  bool row_normalize = true;
  /// Binary class-merging setup: classes in this group become class 0.
  std::optional<std::set<ClassId>> merge_group;
  SweepSpec sweep;
  std::filesystem::path output_dir = "out";
  /// Load this encoder instead of pre-training.
  std::optional<std::filesystem::path> checkpoint;
  /// Empty means GFMATE_CACHE_DIR, falling back to <output_dir>/cache.
  std::filesystem::path cache_dir;
  bool use_cache = true;
  /// Pre-train a separate encoder per evaluation seed.
  bool repretrain_per_seed = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

nlohmann::json to_json(const PretrainConfig& c);
nlohmann::json to_json(const TuneConfig& c);

struct SeedResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // fraction in [0, 1]
  std::optional<double> comp_label_accuracy;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t pivot_layer = 0;
  std::vector<HistoryRow> history;
};

struct MetricReport {
  std::string label;
  std::string target_domain;
  std::optional<double> sweep_value;
  std::vector<SeedResult> per_seed;
  double mean = 0.0;    // accuracy fraction
  double stddev = 0.0;  // sample standard deviation
  std::optional<double> comp_label_accuracy;
  double wallclock_seconds = 0.0;
  std::size_t param_count = 0;
  std::size_t pretrain_steps = 0;

  std::vector<double> accuracies() const;
  /// Recomputes mean / stddev / comp_label_accuracy from per_seed.
  void finalize();
};

double mean_of(const std::vector<double>& v);
double sample_stddev(const std::vector<double>& v);

struct Encoder {
  GcnParams params;
  std::size_t pretrain_steps = 0;
  bool from_cache = false;
  std::vector<double> loss_trace;
};

/// Cache key: SHA-256 over sorted source ids, pre-training config and
/// alignment options.
std::string encoder_cache_key(std::vector<std::string> source_ids, const ExperimentConfig& cfg);

std::filesystem::path resolve_cache_dir(const ExperimentConfig& cfg);

/// Pre-trains on every domain except the target, or reuses a cached encoder.
Encoder obtain_encoder(const std::vector<Graph>& domains, const ExperimentConfig& cfg,
                       std::uint64_t pretrain_seed_offset = 0);

/// Knobs for one evaluation pass over the seeds.
struct EvalOptions {
  std::string label = "gfmate";
  std::optional<double> sweep_value;
  /// Fraction of test nodes entering the test-time loss.
  double test_ratio = 1.0;
  SweepKind perturbation = SweepKind::none;
  double perturb_ratio = 0.0;
  std::optional<std::size_t> shots;
};

/// Tunes and evaluates on an aligned target for every seed in cfg.seeds.
MetricReport evaluate_target(const Graph& target, const GcnParams& params,
                             const ExperimentConfig& cfg, const EvalOptions& opts = {});

/// Loads the manifest, prepares the encoder and runs one evaluation.
MetricReport run_experiment(const ExperimentConfig& cfg);

/// Same as run_experiment over in-memory domains.
MetricReport run_experiment(const std::vector<Graph>& domains, const ExperimentConfig& cfg);

std::vector<MetricReport> run_ratio_sweep(const std::vector<Graph>& domains,
                                          const ExperimentConfig& cfg,
                                          const std::vector<double>& ratios);

/// Generic sweep dispatch on cfg.sweep.
std::vector<MetricReport> run_sweep(const std::vector<Graph>& domains, const ExperimentConfig& cfg);

struct AuditSeed {
  std::uint64_t seed = 0;
  double pivot_correctness = 0.0;
  double last_layer_correctness = 0.0;
  std::size_t pivot_layer = 0;
};

struct AuditReport {
  std::vector<AuditSeed> per_seed;
  double pivot_correctness = 0.0;
  double last_layer_correctness = 0.0;
};

/// Fraction of test nodes whose label differs from the true class.
double complementary_correctness(const ComplementaryLabels& comp, const Graph& graph);

/// Complementary-label audit on a fixed embedding stack.
AuditSeed audit_stack(const EmbeddingStack& stack, const Graph& graph, std::size_t shots,
                      std::uint64_t seed);

AuditReport audit_complementary_labels(const std::vector<Graph>& domains, const ExperimentConfig& cfg);
AuditReport audit_complementary_labels(const ExperimentConfig& cfg);

std::vector<Graph> load_all_domains(const Manifest& manifest);

/// Target graph after optional class merging and SVD alignment.
Graph prepare_target(const std::vector<Graph>& domains, const ExperimentConfig& cfg);

}  // namespace gfmate
