#pragma once

#include <string>
#include <vector>

namespace demo::harness {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  ///< non-positive y values are dropped
  int width = 640;
  int height = 360;
};

/// Standalone SVG line chart with axes, min/max tick labels and a legend.
std::string svg_line_chart(const std::vector<Series>& series, const PlotOptions& options);

}  // namespace demo::harness
