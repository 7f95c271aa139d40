#include "gfmate/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "gfmate/checkpoint.hpp"
#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"

namespace gfmate {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stream indices handed to Rng::derive per evaluation seed.
enum Stream : std::uint64_t { kSplitStream = 0, kTuneStream = 1, kPerturbStream = 2, kRatioStream = 3 };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) { return Rng::derive(seed, s).next(); }

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

SbmSpec sbm_from_json(const json& j, const std::string& domain_id) {
  SbmSpec s;
  s.domain_id = domain_id;
  read_opt(j, "nodes", s.num_nodes);
  read_opt(j, "classes", s.num_classes);
  read_opt(j, "p_in", s.p_in);
  read_opt(j, "p_out", s.p_out);
  read_opt(j, "feature_dim", s.feature_dim);
  read_opt(j, "feature_signal", s.feature_signal);
  read_opt(j, "feature_noise", s.feature_noise);
  read_opt(j, "feature_shift", s.feature_shift);
  read_opt(j, "seed", s.seed);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

Manifest Manifest::from_json(const json& j, const fs::path& base_dir) {
  const json& list = j.is_array() ? j : j.at("domains");
  Manifest m;
  for (const auto& item : list) {
    DomainEntry d;
    d.domain_id = item.at("domain_id").get<std::string>();
    if (item.contains("num_classes")) d.num_classes = item.at("num_classes").get<std::size_t>();
    read_opt(item, "feature_header", d.feature_header);
    if (item.contains("synthetic")) {
      d.synthetic = sbm_from_json(item.at("synthetic"), d.domain_id);
      if (d.num_classes) d.synthetic->num_classes = *d.num_classes;
    } else {
      d.edge_path = resolve(base_dir, item.at("edge_path").get<std::string>());
      d.feature_path = resolve(base_dir, item.at("feature_path").get<std::string>());
      if (item.contains("label_path")) d.label_path = resolve(base_dir, item.at("label_path").get<std::string>());
    }
    if (m.find(d.domain_id) != nullptr) fail(ErrorKind::config, "manifest: duplicate domain '" + d.domain_id + "'");
    m.domains.push_back(std::move(d));
  }
  if (m.domains.empty()) fail(ErrorKind::config, "manifest lists no domains");
  return m;
}

Manifest Manifest::load(const fs::path& path) {
  try {
    return from_json(parse_json_file(path), path.parent_path());
  } catch (const json::exception& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
}

const DomainEntry* Manifest::find(const std::string& domain_id) const noexcept {
  for (const auto& d : domains)
    if (d.domain_id == domain_id) return &d;
  return nullptr;
}

Graph load_domain(const DomainEntry& entry) {
  if (entry.synthetic) return generate_sbm(*entry.synthetic);
  LoadOptions opts;
  opts.domain_id = entry.domain_id;
  opts.feature_header = entry.feature_header;
  opts.num_classes = entry.num_classes;
  return load_edge_list(entry.edge_path, entry.feature_path, entry.label_path, opts);
}

std::vector<Graph> load_all_domains(const Manifest& manifest) {
  std::vector<Graph> out;
  for (const auto& d : manifest.domains) out.push_back(load_domain(d));
  return out;
}

// ---------------------------------------------------------------------------
// Config

const char* to_string(SweepKind k) noexcept {
  switch (k) {
    case SweepKind::none: return "none";
    case SweepKind::ratio: return "ratio";
    case SweepKind::perturb_features: return "perturb-features";
    case SweepKind::perturb_edges: return "perturb-edges";
    case SweepKind::shots: return "shots";
  }
  return "?";
}

SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "none") return SweepKind::none;
  if (s == "ratio") return SweepKind::ratio;
  if (s == "perturb-features" || s == "perturb") return SweepKind::perturb_features;
  if (s == "perturb-edges") return SweepKind::perturb_edges;
  if (s == "shots") return SweepKind::shots;
  fail(ErrorKind::config, "unknown sweep kind '" + s + "'");
}

json to_json(const PretrainConfig& c) {
  return {{"epochs", c.epochs},         {"lr", c.lr},     {"neg_ratio", c.neg_ratio},
          {"batch_edges", c.batch_edges}, {"seed", c.seed}, {"num_layers", c.num_layers},
          {"dim", c.dim}};
}

json to_json(const TuneConfig& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"beta_init_std", c.beta_init_std},
          {"layer_mode", to_string(c.layer_mode)},
          {"tgcl_mode", to_string(c.tgcl_mode)}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("manifest")) c.manifest_path = j.at("manifest").get<std::string>();
    read_opt(j, "target", c.target_domain);
    read_opt(j, "shots", c.shots);
    read_opt(j, "seeds", c.seeds);
    if (j.contains("pretrain")) {
      const json& p = j.at("pretrain");
      read_opt(p, "epochs", c.pretrain.epochs);
      read_opt(p, "lr", c.pretrain.lr);
      read_opt(p, "neg_ratio", c.pretrain.neg_ratio);
      read_opt(p, "batch_edges", c.pretrain.batch_edges);
      read_opt(p, "seed", c.pretrain.seed);
      read_opt(p, "num_layers", c.pretrain.num_layers);
      read_opt(p, "dim", c.pretrain.dim);
    }
    if (j.contains("tune")) {
      const json& t = j.at("tune");
      read_opt(t, "gamma", c.tune.gamma);
      read_opt(t, "tau", c.tune.tau);
      read_opt(t, "lr", c.tune.lr);
      read_opt(t, "max_epochs", c.tune.max_epochs);
      read_opt(t, "patience", c.tune.patience);
      read_opt(t, "seed", c.tune.seed);
      read_opt(t, "beta_init_std", c.tune.beta_init_std);
      if (t.contains("layer_mode")) c.tune.layer_mode = parse_layer_mode(t.at("layer_mode").get<std::string>());
      if (t.contains("tgcl_mode")) c.tune.tgcl_mode = parse_tgcl_mode(t.at("tgcl_mode").get<std::string>());
    }
    read_opt(j, "row_normalize", c.row_normalize);
    if (j.contains("merge_group")) c.merge_group = j.at("merge_group").get<std::set<ClassId>>();
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      c.sweep.kind = parse_sweep_kind(s.at("kind").get<std::string>());
      read_opt(s, "values", c.sweep.values);
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("checkpoint")) c.checkpoint = fs::path(j.at("checkpoint").get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    read_opt(j, "use_cache", c.use_cache);
    read_opt(j, "repretrain_per_seed", c.repretrain_per_seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  ExperimentConfig c = from_json(parse_json_file(path));
  c.manifest_path = resolve(path.parent_path(), c.manifest_path);
  return c;
}

json ExperimentConfig::to_json() const {
  json j = {{"manifest", manifest_path.string()},
            {"target", target_domain},
            {"shots", shots},
            {"seeds", seeds},
            {"pretrain", gfmate::to_json(pretrain)},
            {"tune", gfmate::to_json(tune)},
            {"row_normalize", row_normalize},
            {"sweep", {{"kind", to_string(sweep.kind)}, {"values", sweep.values}}},
            {"output_dir", output_dir.string()},
            {"use_cache", use_cache},
            {"repretrain_per_seed", repretrain_per_seed}};
  if (merge_group) j["merge_group"] = *merge_group;
  if (checkpoint) j["checkpoint"] = checkpoint->string();
  if (!cache_dir.empty()) j["cache_dir"] = cache_dir.string();
  return j;
}

void ExperimentConfig::validate() const {
  if (target_domain.empty()) fail(ErrorKind::config, "experiment: target domain not set");
  if (seeds.empty()) fail(ErrorKind::config, "experiment: seed list is empty");
  if (shots < 1) fail(ErrorKind::config, "experiment: shots must be >= 1");
  pretrain.validate();
  tune.validate();
  for (const double v : sweep.values)
    if (sweep.kind != SweepKind::shots && !(v >= 0.0 && v <= 1.0))
      fail(ErrorKind::config, "experiment: sweep ratios must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Reports

std::vector<double> MetricReport::accuracies() const {
  std::vector<double> v;
  for (const auto& s : per_seed) v.push_back(s.accuracy);
  return v;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void MetricReport::finalize() {
  const auto acc = accuracies();
  mean = mean_of(acc);
  stddev = sample_stddev(acc);
  std::vector<double> comp;
  for (const auto& s : per_seed)
    if (s.comp_label_accuracy) comp.push_back(*s.comp_label_accuracy);
  comp_label_accuracy = comp.empty() ? std::nullopt : std::optional<double>(mean_of(comp));
}

// ---------------------------------------------------------------------------
// Encoder

std::string encoder_cache_key(std::vector<std::string> source_ids, const ExperimentConfig& cfg) {
  std::sort(source_ids.begin(), source_ids.end());
  const json material = {{"format", kCheckpointVersion},
                         {"sources", source_ids},
                         {"pretrain", to_json(cfg.pretrain)},
                         {"row_normalize", cfg.row_normalize}};
  return sha256_hex(material.dump());
}

fs::path resolve_cache_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("GFMATE_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  return cfg.output_dir / "cache";
}

Encoder obtain_encoder(const std::vector<Graph>& domains, const ExperimentConfig& cfg,
                       std::uint64_t pretrain_seed_offset) {
  if (cfg.checkpoint) {
    Encoder enc{load_params(*cfg.checkpoint), 0, true, {}};
    if (enc.params.dim() != cfg.pretrain.dim || enc.params.num_layers() != cfg.pretrain.num_layers)
      fail(ErrorKind::config, "checkpoint " + cfg.checkpoint->string() + " has L=" +
                                  std::to_string(enc.params.num_layers()) + ", d=" +
                                  std::to_string(enc.params.dim()) + "; config asks for L=" +
                                  std::to_string(cfg.pretrain.num_layers) + ", d=" +
                                  std::to_string(cfg.pretrain.dim));
    return enc;
  }

  std::vector<Graph> sources;
  std::vector<std::string> ids;
  for (const auto& g : domains)
    if (g.domain_id != cfg.target_domain) {
      sources.push_back(g);
      ids.push_back(g.domain_id);
    }
  if (sources.empty()) fail(ErrorKind::config, "no source domains besides target '" + cfg.target_domain + "'");

  ExperimentConfig effective = cfg;
  effective.pretrain.seed += pretrain_seed_offset;
  const std::string key = encoder_cache_key(ids, effective);
  std::sort(ids.begin(), ids.end());
  const json material = {{"sources", ids}, {"pretrain", to_json(effective.pretrain)},
                         {"row_normalize", effective.row_normalize}};

  const fs::path dir = resolve_cache_dir(cfg);
  const fs::path ckpt = dir / (key + ".gfmp");
  const fs::path meta = dir / (key + ".json");
  if (cfg.use_cache && fs::exists(ckpt)) {
    json stored;
    if (fs::exists(meta)) stored = parse_json_file(meta);
    if (stored != material)
      fail(ErrorKind::stale_cache, "cached encoder " + ckpt.string() + " does not match the current config");
    Encoder enc{load_params(ckpt), 0, true, {}};
    if (enc.params.dim() != effective.pretrain.dim || enc.params.num_layers() != effective.pretrain.num_layers)
      fail(ErrorKind::stale_cache, "cached encoder " + ckpt.string() + " has the wrong shape");
    return enc;
  }

  const auto aligned = svd_align(sources, effective.pretrain.dim, effective.pretrain.seed,
                                 AlignOptions{effective.row_normalize});
  PretrainResult trained = pretrain(aligned, effective.pretrain);
  Encoder enc{std::move(trained.params), trained.total_steps, false, std::move(trained.loss_trace)};
  if (cfg.use_cache) {
    fs::create_directories(dir);
    save_params(enc.params, ckpt);
    std::ofstream(meta) << material.dump(2) << '\n';
    write_loss_trace_csv(enc.loss_trace, dir / (key + ".loss.csv"));
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Evaluation

Graph prepare_target(const std::vector<Graph>& domains, const ExperimentConfig& cfg) {
  const auto it = std::find_if(domains.begin(), domains.end(),
                               [&](const Graph& g) { return g.domain_id == cfg.target_domain; });
  if (it == domains.end()) fail(ErrorKind::config, "target domain '" + cfg.target_domain + "' not in manifest");
  if (!it->has_labels()) fail(ErrorKind::config, "target domain '" + cfg.target_domain + "' has no labels");
  Graph target = cfg.merge_group ? merge_classes(*it, *cfg.merge_group) : *it;
  return svd_align({target}, cfg.pretrain.dim, cfg.pretrain.seed, AlignOptions{cfg.row_normalize}).front();
}

namespace {

std::vector<NodeId> ratio_subset(const std::vector<NodeId>& test_ids, double ratio, std::uint64_t seed) {
  if (ratio >= 1.0) return test_ids;
  const auto count = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(test_ids.size()) - 1e-9));
  std::vector<NodeId> chosen = test_ids;
  Rng rng(seed);
  rng.shuffle(std::span<NodeId>(chosen));
  chosen.resize(std::min(count, chosen.size()));
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

MetricReport evaluate_target(const Graph& target, const GcnParams& params,
                             const ExperimentConfig& cfg, const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  MetricReport report;
  report.label = opts.label;
  report.target_domain = target.domain_id;
  report.sweep_value = opts.sweep_value;
  const std::size_t shots = opts.shots.value_or(cfg.shots);

  std::optional<EmbeddingStack> shared;
  if (opts.perturbation == SweepKind::none || opts.perturb_ratio == 0.0)
    shared = gcn_forward(params, normalize_adjacency(target), target.features);

  for (const std::uint64_t seed : cfg.seeds) {
    const FewShotSplit split = sample_few_shot_split(target, shots, stream_seed(seed, kSplitStream));

    EmbeddingStack local;
    if (!shared) {
      const Graph perturbed =
          opts.perturbation == SweepKind::perturb_features
              ? perturb_features(target, split.test_ids, opts.perturb_ratio, stream_seed(seed, kPerturbStream))
              : perturb_edges(target, split.test_ids, opts.perturb_ratio, stream_seed(seed, kPerturbStream));
      local = gcn_forward(params, normalize_adjacency(perturbed), perturbed.features);
    }
    const EmbeddingStack& stack = shared ? *shared : local;
    stack.validate();

    TuneConfig tcfg = cfg.tune;
    tcfg.seed = Rng::derive(cfg.tune.seed, stream_seed(seed, kTuneStream)).next();
    TuneInputs inputs;
    inputs.unlabelled_ids = ratio_subset(split.test_ids, opts.test_ratio, stream_seed(seed, kRatioStream));
    TuneResult tuned = tune(stack, target, split, tcfg, inputs);

    const CentroidMatrix e_tilde = refine_centroids(tuned.centroids, tuned.prompts);
    const auto predicted = ensemble_predict(stack, e_tilde, tuned.prompts.eta, split.test_ids);

    SeedResult r;
    r.seed = seed;
    r.accuracy = accuracy(predicted, split.test_ids, target);
    if (tuned.comp) {
      r.comp_label_accuracy = complementary_correctness(*tuned.comp, target);
      r.pivot_layer = tuned.comp->pivot_layer;
    }
    r.best_epoch = tuned.best_epoch;
    r.epochs_run = tuned.history.size();
    r.history = std::move(tuned.history);
    if (!std::isfinite(r.accuracy)) fail(ErrorKind::numeric, "non-finite accuracy");
    report.per_seed.push_back(std::move(r));
  }
  report.param_count = prompt_parameter_count(params.num_layers() + 1, target.num_classes, params.dim());
  report.finalize();
  report.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

MetricReport run_experiment(const std::vector<Graph>& domains, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Graph target = prepare_target(domains, cfg);
  MetricReport report;
  if (cfg.repretrain_per_seed) {
    std::size_t steps = 0;
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
      const Encoder enc = obtain_encoder(domains, cfg, cfg.seeds[k]);
      steps += enc.pretrain_steps;
      ExperimentConfig single = cfg;
      single.seeds = {cfg.seeds[k]};
      MetricReport part = evaluate_target(target, enc.params, single);
      if (k == 0) report = std::move(part);
      else report.per_seed.push_back(std::move(part.per_seed.front()));
    }
    report.pretrain_steps = steps;
    report.finalize();
  } else {
    const Encoder enc = obtain_encoder(domains, cfg);
    report = evaluate_target(target, enc.params, cfg);
    report.pretrain_steps = enc.pretrain_steps;
  }
  report.wallclock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

MetricReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Manifest manifest = Manifest::load(cfg.manifest_path);
  if (manifest.find(cfg.target_domain) == nullptr)
    fail(ErrorKind::config, "target domain '" + cfg.target_domain + "' not in manifest");
  return run_experiment(load_all_domains(manifest), cfg);
}

std::vector<MetricReport> run_ratio_sweep(const std::vector<Graph>& domains,
                                          const ExperimentConfig& cfg,
                                          const std::vector<double>& ratios) {
  ExperimentConfig c = cfg;
  c.sweep = {SweepKind::ratio, ratios};
  return run_sweep(domains, c);
}

std::vector<MetricReport> run_sweep(const std::vector<Graph>& domains, const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.kind == SweepKind::none) return {run_experiment(domains, cfg)};
  if (cfg.sweep.values.empty()) fail(ErrorKind::config, "sweep has no values");
  const Graph target = prepare_target(domains, cfg);
  const Encoder enc = obtain_encoder(domains, cfg);
  std::vector<MetricReport> out;
  for (const double v : cfg.sweep.values) {
    EvalOptions opts;
    opts.sweep_value = v;
    switch (cfg.sweep.kind) {
      case SweepKind::ratio:
        opts.test_ratio = v;
        opts.label = "ratio";
        break;
      case SweepKind::perturb_features:
      case SweepKind::perturb_edges:
        opts.perturbation = cfg.sweep.kind;
        opts.perturb_ratio = v;
        opts.label = to_string(cfg.sweep.kind);
        break;
      case SweepKind::shots:
        if (v < 1.0 || v != std::floor(v)) fail(ErrorKind::config, "shot counts must be positive integers");
        opts.shots = static_cast<std::size_t>(v);
        opts.label = "shots";
        break;
      case SweepKind::none:
        break;
    }
    MetricReport r = evaluate_target(target, enc.params, cfg, opts);
    r.pretrain_steps = out.empty() ? enc.pretrain_steps : 0;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Complementary-label audit

double complementary_correctness(const ComplementaryLabels& comp, const Graph& graph) {
  if (comp.nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < comp.nodes.size(); ++i)
    if (graph.labels.at(comp.nodes[i]) != comp.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(comp.nodes.size());
}

AuditSeed audit_stack(const EmbeddingStack& stack, const Graph& graph, std::size_t shots,
                      std::uint64_t seed) {
  const FewShotSplit split = sample_few_shot_split(graph, shots, stream_seed(seed, kSplitStream));
  const CentroidMatrix e = init_centroids(stack, split);
  const ComplementaryLabels pivot = compute_complementary_labels(stack, e, split.test_ids);
  const ComplementaryLabels last = last_layer_complementary_labels(stack, e, split.test_ids);
  return {seed, complementary_correctness(pivot, graph), complementary_correctness(last, graph),
          pivot.pivot_layer};
}

AuditReport audit_complementary_labels(const std::vector<Graph>& domains, const ExperimentConfig& cfg) {
  cfg.validate();
  const Graph target = prepare_target(domains, cfg);
  const Encoder enc = obtain_encoder(domains, cfg);
  const EmbeddingStack stack = gcn_forward(enc.params, normalize_adjacency(target), target.features);
  AuditReport report;
  std::vector<double> pivot, last;
  for (const std::uint64_t seed : cfg.seeds) {
    report.per_seed.push_back(audit_stack(stack, target, cfg.shots, seed));
    pivot.push_back(report.per_seed.back().pivot_correctness);
    last.push_back(report.per_seed.back().last_layer_correctness);
  }
  report.pivot_correctness = mean_of(pivot);
  report.last_layer_correctness = mean_of(last);
  return report;
}

AuditReport audit_complementary_labels(const ExperimentConfig& cfg) {
  const Manifest manifest = Manifest::load(cfg.manifest_path);
  return audit_complementary_labels(load_all_domains(manifest), cfg);
}

}  // namespace gfmate
