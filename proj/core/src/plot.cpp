#include "dio/plot.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dio {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& os, const std::string& title, const std::string& xl, const std::string& yl) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(xl)
     << "</text>\n"
     << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kH / 2
     << ")\">" << escape(yl) << "</text>\n";
}

void y_ticks(std::ostringstream& os, double lo, double hi, bool log) {
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double py = kH - kBottom - (kH - kTop - kBottom) * i / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">";
    if (log) os << "1e" << std::lround(v);
    else os << std::setprecision(3) << v;
    os << "</text>\n";
  }
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series,
                           const std::string& x_label, const std::string& y_label, bool y_log) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  auto ty = [&](double y) { return y_log ? std::log10(std::max(y, 1e-300)) : y; };
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("svg_line_chart: x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (y_log && !(s.y[i] > 0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  if (y_log) ymin = std::floor(ymin), ymax = std::ceil(ymax);
  if (ymax == ymin) ymax = ymin + 1;

  std::ostringstream os;
  header(os, title, x_label, y_label);
  y_ticks(os, ymin, ymax, y_log);
  auto px = [&](double x) { return kLeft + (kW - kLeft - kRight) * (x - xmin) / (xmax - xmin); };
  auto py = [&](double y) { return kH - kBottom - (kH - kTop - kBottom) * (ty(y) - ymin) / (ymax - ymin); };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (y_log && !(s.y[i] > 0)) continue;
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 140 << "\" y=\"" << kTop + 14 * (k + 1) << "\" fill=\"" << color
       << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label) {
  if (labels.size() != values.size()) throw std::invalid_argument("svg_bar_chart: label/value mismatch");
  double ymax = 0.0;
  for (double v : values) ymax = std::max(ymax, v);
  if (ymax <= 0) ymax = 1;
  std::ostringstream os;
  header(os, title, "", y_label);
  y_ticks(os, 0.0, ymax, false);
  const double slot = (kW - kLeft - kRight) / std::max<std::size_t>(1, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = (kH - kTop - kBottom) * std::max(0.0, values[i]) / ymax;
    const double x = kLeft + slot * i + slot * 0.15;
    os << "<rect x=\"" << x << "\" y=\"" << kH - kBottom - h << "\" width=\"" << slot * 0.7 << "\" height=\""
       << h << "\" fill=\"" << kPalette[0] << "\"/>\n"
       << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
       << escape(labels[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dio
