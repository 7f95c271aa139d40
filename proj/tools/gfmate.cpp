// gfmate: command-line front end for pre-training, prompt tuning, sweeps,
// complementary-label audits and plotting.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "gfmate/checkpoint.hpp"
#include "gfmate/error.hpp"
#include "gfmate/harness.hpp"
#include "gfmate/plot.hpp"
#include "gfmate/report.hpp"

namespace fs = std::filesystem;
using namespace gfmate;

namespace {

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) fail(ErrorKind::config, "not a seed: '" + s + "'");
  return v;
}

/// Accepts "a..b" (inclusive) or a comma-separated list.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = parse_u64(text.substr(0, dots));
    const auto hi = parse_u64(text.substr(dots + 2));
    if (hi < lo) fail(ErrorKind::config, "empty seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(parse_u64(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) fail(ErrorKind::config, "no seeds in '" + text + "'");
  return out;
}

/// Flags shared by every subcommand that builds an ExperimentConfig. Unset
/// flags leave the config file values alone.
struct CommonFlags {
  std::string config;
  std::string manifest;
  std::string target;
  std::string ckpt;
  std::string out;
  std::string seeds;
  std::optional<std::size_t> shots;
  std::optional<double> gamma, tau, tune_lr, pretrain_lr;
  std::optional<std::size_t> max_epochs, patience, pretrain_epochs, dim, layers;
  std::string layer_mode, tgcl_mode;
  bool no_cache = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON experiment config");
    app->add_option("--manifest", manifest, "domain manifest JSON");
    app->add_option("--target", target, "held-out target domain id");
    app->add_option("--ckpt", ckpt, "pre-trained encoder checkpoint");
    app->add_option("--out", out, "output directory");
    app->add_option("--seeds", seeds, "seed range a..b or list a,b,c");
    app->add_option("--shots", shots, "labelled nodes per class");
    app->add_option("--gamma", gamma, "test-time loss weight");
    app->add_option("--tau", tau, "softmax temperature");
    app->add_option("--lr", tune_lr, "prompt learning rate");
    app->add_option("--max-epochs", max_epochs, "prompt tuning epoch cap");
    app->add_option("--patience", patience, "early-stopping patience");
    app->add_option("--pretrain-lr", pretrain_lr, "encoder learning rate");
    app->add_option("--pretrain-epochs", pretrain_epochs, "encoder training steps");
    app->add_option("--dim", dim, "embedding width");
    app->add_option("--layers", layers, "GCN depth");
    app->add_option("--layer-mode", layer_mode, "learned | frozen-uniform");
    app->add_option("--tgcl-mode", tgcl_mode, "complementary | few-shot-only | pseudo");
    app->add_flag("--no-cache", no_cache, "always pre-train; never read or write the cache");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
    if (!manifest.empty()) cfg.manifest_path = manifest;
    if (!target.empty()) cfg.target_domain = target;
    if (!ckpt.empty()) cfg.checkpoint = fs::path(ckpt);
    if (!out.empty()) cfg.output_dir = out;
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    if (shots) cfg.shots = *shots;
    if (gamma) cfg.tune.gamma = *gamma;
    if (tau) cfg.tune.tau = *tau;
    if (tune_lr) cfg.tune.lr = *tune_lr;
    if (max_epochs) cfg.tune.max_epochs = *max_epochs;
    if (patience) cfg.tune.patience = *patience;
    if (pretrain_lr) cfg.pretrain.lr = *pretrain_lr;
    if (pretrain_epochs) cfg.pretrain.epochs = *pretrain_epochs;
    if (dim) cfg.pretrain.dim = *dim;
    if (layers) cfg.pretrain.num_layers = *layers;
    if (!layer_mode.empty()) cfg.tune.layer_mode = parse_layer_mode(layer_mode);
    if (!tgcl_mode.empty()) cfg.tune.tgcl_mode = parse_tgcl_mode(tgcl_mode);
    if (no_cache) cfg.use_cache = false;
    if (cfg.manifest_path.empty()) fail(ErrorKind::config, "no manifest given (--manifest or config)");
    return cfg;
  }
};

void write_json(const nlohmann::json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_report(const MetricReport& r) {
  std::string extra;
  if (r.comp_label_accuracy) extra = fmt::format("  comp-label correctness {:.2f}%", 100.0 * *r.comp_label_accuracy);
  if (r.sweep_value)
    fmt::print("{} {:g}: {:.2f} ± {:.2f}{}\n", r.label, *r.sweep_value, 100.0 * r.mean, 100.0 * r.stddev, extra);
  else
    fmt::print("{} on {}: {:.2f} ± {:.2f} over {} seeds{}\n", r.label, r.target_domain, 100.0 * r.mean,
               100.0 * r.stddev, r.per_seed.size(), extra);
}

int cmd_pretrain(const CommonFlags& flags, const std::string& exclude, const std::string& out_ckpt) {
  ExperimentConfig cfg = flags.build();
  if (!exclude.empty()) cfg.target_domain = exclude;
  cfg.checkpoint.reset();
  cfg.use_cache = false;
  const auto domains = load_all_domains(Manifest::load(cfg.manifest_path));
  const Encoder enc = obtain_encoder(domains, cfg);
  const fs::path ckpt = out_ckpt.empty() ? cfg.output_dir / "encoder.gfmp" : fs::path(out_ckpt);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_params(enc.params, ckpt);
  fs::path trace = ckpt;
  trace.replace_extension(".loss.csv");
  write_loss_trace_csv(enc.loss_trace, trace);
  fmt::print("pre-trained {} steps, loss {:.4f} -> {:.4f}; wrote {}\n", enc.pretrain_steps,
             enc.loss_trace.front(), enc.loss_trace.back(), ckpt.string());
  return 0;
}

int cmd_tune(const CommonFlags& flags) {
  const ExperimentConfig cfg = flags.build();
  const MetricReport r = run_experiment(cfg);
  write_report_files(r, cfg.output_dir);
  emit_plots({r}, cfg.output_dir / "plots");
  write_json(cfg.to_json(), cfg.output_dir / "config.json");
  print_report(r);
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& kind, const std::vector<double>& values) {
  ExperimentConfig cfg = flags.build();
  if (!kind.empty()) cfg.sweep.kind = parse_sweep_kind(kind);
  if (!values.empty()) cfg.sweep.values = values;
  if (cfg.sweep.kind == SweepKind::none) fail(ErrorKind::config, "sweep needs --kind");
  const auto domains = load_all_domains(Manifest::load(cfg.manifest_path));
  const auto reports = run_sweep(domains, cfg);
  write_sweep_reports(reports, cfg.output_dir);
  emit_plots(reports, cfg.output_dir / "plots");
  write_json(cfg.to_json(), cfg.output_dir / "config.json");
  for (const auto& r : reports) print_report(r);
  return 0;
}

int cmd_audit(const CommonFlags& flags) {
  const ExperimentConfig cfg = flags.build();
  const AuditReport a = audit_complementary_labels(cfg);
  write_json(audit_to_json(a), cfg.output_dir / "audit.json");
  fmt::print("complementary correctness: pivot {:.2f}%, last layer {:.2f}% over {} seeds\n",
             100.0 * a.pivot_correctness, 100.0 * a.last_layer_correctness, a.per_seed.size());
  return 0;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out_dir) {
  std::vector<MetricReport> reports;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p) && fs::exists(p / "sweep.json")) {
      std::ifstream s(p / "sweep.json");
      for (const auto& j : nlohmann::json::parse(s)) reports.push_back(report_from_json(j));
    } else {
      reports.push_back(read_report(fs::is_directory(p) ? p / "report.json" : p));
    }
  }
  for (const auto& path : emit_plots(reports, out_dir)) fmt::print("wrote {}\n", path.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph foundation model prompting with test-time complementary learning"};
  app.require_subcommand(1);

  CommonFlags pre_flags, tune_flags, sweep_flags, audit_flags;
  std::string exclude, out_ckpt, sweep_kind, plot_out = "plots";
  std::vector<double> sweep_values;
  std::vector<std::string> plot_inputs;

  auto* pre = app.add_subcommand("pretrain", "pre-train an encoder on every domain but the excluded one");
  pre_flags.attach(pre);
  pre->add_option("--exclude", exclude, "domain left out of pre-training");
  pre->add_option("--out-ckpt", out_ckpt, "checkpoint path (default <out>/encoder.gfmp)");

  auto* tune = app.add_subcommand("tune", "tune prompts on the target over all seeds and write reports");
  tune_flags.attach(tune);
  auto* run = app.add_subcommand("run", "alias of tune");
  CommonFlags run_flags;
  run_flags.attach(run);

  auto* sweep = app.add_subcommand("sweep", "ratio, perturbation or shot-count sweep");
  sweep_flags.attach(sweep);
  sweep->add_option("--kind", sweep_kind, "ratio | perturb | perturb-edges | shots");
  sweep->add_option("--values", sweep_values, "sweep points")->delimiter(',');

  auto* audit = app.add_subcommand("audit-labels", "complementary-label correctness, pivot vs last layer");
  audit_flags.attach(audit);

  auto* plot = app.add_subcommand("plot", "render SVG charts from report directories");
  plot->add_option("inputs", plot_inputs, "report.json files, report directories or sweep directories")->required();
  plot->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorKind::config);
  }

  try {
    if (*pre) {
      // `pretrain --out X` with a checkpoint-looking path writes the checkpoint there.
      std::string ckpt = out_ckpt;
      if (ckpt.empty() && fs::path(pre_flags.out).has_extension()) {
        ckpt = pre_flags.out;
        pre_flags.out.clear();
      }
      return cmd_pretrain(pre_flags, exclude, ckpt);
    }
    if (*tune) return cmd_tune(tune_flags);
    if (*run) return cmd_tune(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_kind, sweep_values);
    if (*audit) return cmd_audit(audit_flags);
    if (*plot) return cmd_plot(plot_inputs, plot_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "gfmate: %s: %s\n", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "gfmate: config error: %s\n", e.what());
    return exit_code_for(ErrorKind::config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gfmate: error: %s\n", e.what());
    return exit_code_for(ErrorKind::io);
  }
  return 0;
}
