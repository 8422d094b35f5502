#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace delusive {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

struct PlotSpec {
  std::string title;
  std::string xlabel, ylabel;
  bool log_x = false;  // log10 axis; requires every x > 0
  int width = 720, height = 480;
};

// Minimal line plot: axes, ticks, one polyline per series, legend. The
// output is deterministic byte-for-byte for identical inputs.
std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series);

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec,
                     const std::vector<Series>& series);

}  // namespace delusive
