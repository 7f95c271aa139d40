#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gfmate/harness.hpp"

namespace gfmate {

/// Bar chart of mean accuracy, one bar per report.
std::string render_bar_svg(const std::vector<MetricReport>& reports);

/// Mean accuracy against sweep value as a single polyline.
std::string render_line_svg(const std::vector<MetricReport>& reports);

/// Writes accuracy.svg (bars) and, when every report carries a sweep value
/// and there are at least two, sweep.svg (line). Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const std::vector<MetricReport>& reports,
                                              const std::filesystem::path& dir);

}  // namespace gfmate
