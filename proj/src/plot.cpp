#include "gfmate/plot.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "gfmate/error.hpp"

namespace gfmate {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 60.0;

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  std::string s = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"0 0 {0:.0f} {1:.0f}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2:.1f}\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\" "
      "text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
  // Axes and a y grid in percent.
  const double x0 = kMargin, y0 = kHeight - kMargin, y1 = kMargin;
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", x0, y0, y1);
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", x0, y0,
                   kWidth - kMargin);
  for (int pct = 0; pct <= 100; pct += 25) {
    const double y = y0 - (y0 - y1) * pct / 100.0;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
                     "text-anchor=\"end\">{}</text>\n",
                     x0 - 6, y + 4, pct);
  }
  return s;
}

double y_of(double fraction) {
  const double y0 = kHeight - kMargin, y1 = kMargin;
  return y0 - (y0 - y1) * std::clamp(fraction, 0.0, 1.0);
}

void check_nonempty(const std::vector<MetricReport>& reports) {
  if (reports.empty()) fail(ErrorKind::empty_input, "plot: no reports");
}

}  // namespace

std::string render_bar_svg(const std::vector<MetricReport>& reports) {
  check_nonempty(reports);
  std::string s = header("Mean test accuracy (%)");
  const double span = kWidth - 2 * kMargin;
  const double slot = span / static_cast<double>(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const double x = kMargin + slot * static_cast<double>(i) + slot * 0.15;
    const double top = y_of(r.mean);
    s += fmt::format("<rect class=\"bar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                     "fill=\"#4c72b0\"/>\n",
                     x, top, slot * 0.7, (kHeight - kMargin) - top);
    std::string name = r.label;
    if (r.sweep_value) name += fmt::format("={}", *r.sweep_value);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     x + slot * 0.35, kHeight - kMargin + 16, escape(name));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                     "text-anchor=\"middle\">{:.2f}</text>\n",
                     x + slot * 0.35, top - 4, 100.0 * r.mean);
  }
  s += "</svg>\n";
  return s;
}

std::string render_line_svg(const std::vector<MetricReport>& reports) {
  check_nonempty(reports);
  for (const auto& r : reports)
    if (!r.sweep_value) fail(ErrorKind::invalid_argument, "plot: line chart needs sweep values");
  std::string s = header("Mean test accuracy (%) vs " + reports.front().label);
  double lo = *reports.front().sweep_value, hi = lo;
  for (const auto& r : reports) {
    lo = std::min(lo, *r.sweep_value);
    hi = std::max(hi, *r.sweep_value);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  auto x_of = [&](double v) { return kMargin + (kWidth - 2 * kMargin) * (v - lo) / range; };

  std::string points;
  for (const auto& r : reports) {
    if (!points.empty()) points += ' ';
    points += fmt::format("{:.2f},{:.2f}", x_of(*r.sweep_value), y_of(r.mean));
  }
  s += fmt::format("<polyline fill=\"none\" stroke=\"#c44e52\" stroke-width=\"2\" points=\"{}\"/>\n", points);
  for (const auto& r : reports) {
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"#c44e52\"/>\n", x_of(*r.sweep_value),
                     y_of(r.mean));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     x_of(*r.sweep_value), kHeight - kMargin + 16, *r.sweep_value);
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_plots(const std::vector<MetricReport>& reports,
                                              const std::filesystem::path& dir) {
  check_nonempty(reports);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::string& name, const std::string& svg) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << svg;
    written.push_back(path);
  };
  write("accuracy.svg", render_bar_svg(reports));
  const bool sweep = reports.size() >= 2 &&
                     std::all_of(reports.begin(), reports.end(), [](const MetricReport& r) { return r.sweep_value.has_value(); });
  if (sweep) write("sweep.svg", render_line_svg(reports));
  return written;
}

}  // namespace gfmate
