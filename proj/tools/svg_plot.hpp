#pragma once

// Minimal static line charts written as SVG.

#include <iosfwd>
#include <string>
#include <vector>

namespace gradflow::cli {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title, x_label, y_label;
  bool log_y = false;
  std::vector<Series> series;
};

/// Non-finite points (and non-positive ones on a log axis) are skipped.
void write_svg(const LinePlot& plot, std::ostream& out);

}  // namespace gradflow::cli
