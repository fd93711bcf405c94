#pragma once

#include <string>
#include <vector>

namespace dio {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal SVG line chart (loss curves, tau sweeps). Axes are scaled to the
/// data range; y_log plots log10(y) for positive values.
std::string svg_line_chart(const std::string& title, const std::vector<Series>& series,
                           const std::string& x_label, const std::string& y_label, bool y_log = false);

/// Vertical bars, one per label (per-head accuracies).
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label);

}  // namespace dio
