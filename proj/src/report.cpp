#include "gfmate/report.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gfmate/error.hpp"

namespace gfmate {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  return out;
}

}  // namespace

json report_to_json(const MetricReport& r) {
  json seeds = json::array();
  for (const auto& s : r.per_seed) {
    json item = {{"seed", s.seed},
                 {"accuracy", s.accuracy},
                 {"best_epoch", s.best_epoch},
                 {"epochs_run", s.epochs_run},
                 {"pivot_layer", s.pivot_layer}};
    if (s.comp_label_accuracy) item["comp_label_accuracy"] = *s.comp_label_accuracy;
    seeds.push_back(std::move(item));
  }
  json j = {{"label", r.label},
            {"target", r.target_domain},
            {"per_seed", std::move(seeds)},
            {"accuracy_mean", r.mean},
            {"accuracy_std", r.stddev},
            {"summary", fmt::format("{:.2f} ± {:.2f}", 100.0 * r.mean, 100.0 * r.stddev)},
            {"param_count", r.param_count},
            {"pretrain_steps", r.pretrain_steps}};
  if (r.sweep_value) j["sweep_value"] = *r.sweep_value;
  if (r.comp_label_accuracy) j["comp_label_accuracy"] = *r.comp_label_accuracy;
  return j;
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  try {
    r.label = j.value("label", std::string{});
    r.target_domain = j.value("target", std::string{});
    if (j.contains("sweep_value")) r.sweep_value = j.at("sweep_value").get<double>();
    for (const auto& item : j.at("per_seed")) {
      SeedResult s;
      s.seed = item.at("seed").get<std::uint64_t>();
      s.accuracy = item.at("accuracy").get<double>();
      s.best_epoch = item.value("best_epoch", std::size_t{0});
      s.epochs_run = item.value("epochs_run", std::size_t{0});
      s.pivot_layer = item.value("pivot_layer", std::size_t{0});
      if (item.contains("comp_label_accuracy")) s.comp_label_accuracy = item.at("comp_label_accuracy").get<double>();
      r.per_seed.push_back(std::move(s));
    }
    r.param_count = j.value("param_count", std::size_t{0});
    r.pretrain_steps = j.value("pretrain_steps", std::size_t{0});
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("report: ") + e.what());
  }
  r.finalize();
  return r;
}

void write_history_csv(const std::vector<HistoryRow>& history, const fs::path& path) {
  auto out = open_out(path);
  out << "epoch,loss_te,loss_fs,loss_tgcl,val_acc\n";
  for (const auto& h : history)
    out << fmt::format("{},{},{},{},{}\n", h.epoch, h.loss_te, h.loss_fs, h.loss_tgcl, h.val_acc);
}

void write_report_files(const MetricReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  open_out(dir / "report.json") << report_to_json(r).dump(2) << '\n';
  {
    auto out = open_out(dir / "per_seed.csv");
    out << "seed,accuracy,comp_label_accuracy,best_epoch,epochs_run\n";
    for (const auto& s : r.per_seed)
      out << fmt::format("{},{},{},{},{}\n", s.seed, s.accuracy,
                         s.comp_label_accuracy ? fmt::format("{}", *s.comp_label_accuracy) : std::string{},
                         s.best_epoch, s.epochs_run);
  }
  for (const auto& s : r.per_seed) write_history_csv(s.history, dir / fmt::format("history_seed{}.csv", s.seed));
  open_out(dir / "timing.json") << json{{"wallclock_seconds", r.wallclock_seconds}}.dump(2) << '\n';
}

MetricReport read_report(const fs::path& report_json) {
  std::ifstream in(report_json);
  if (!in) fail(ErrorKind::io, "cannot open " + report_json.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, report_json.string() + ": " + e.what());
  }
}

std::vector<double> read_per_seed_accuracies(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) fail(ErrorKind::io, "cannot open " + csv.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string seed, acc;
    std::getline(fields, seed, ',');
    std::getline(fields, acc, ',');
    out.push_back(std::stod(acc));
  }
  return out;
}

void write_sweep_reports(const std::vector<MetricReport>& reports, const fs::path& dir) {
  fs::create_directories(dir);
  json summary = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const fs::path sub = dir / fmt::format("point_{}", i);
    write_report_files(reports[i], sub);
    summary.push_back(report_to_json(reports[i]));
  }
  open_out(dir / "sweep.json") << summary.dump(2) << '\n';
}

json audit_to_json(const AuditReport& a) {
  json seeds = json::array();
  for (const auto& s : a.per_seed)
    seeds.push_back({{"seed", s.seed},
                     {"pivot_correctness", s.pivot_correctness},
                     {"last_layer_correctness", s.last_layer_correctness},
                     {"pivot_layer", s.pivot_layer}});
  return {{"per_seed", std::move(seeds)},
          {"pivot_correctness", a.pivot_correctness},
          {"last_layer_correctness", a.last_layer_correctness}};
}

}  // namespace gfmate
