#include "demo/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace demo::harness {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

}  // namespace

std::string svg_line_chart(const std::vector<Series>& series, const PlotOptions& o) {
  const double left = 70, right = 150, top = 30, bottom = 45;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto ty = [&](double y) { return o.log_y ? std::log10(y) : y; };
  auto usable = [&](double y) { return std::isfinite(y) && (!o.log_y || y > 0); };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1 - (ty(y) - y0) / (y1 - y0)) * ph; };
  auto label_y = [&](double v) { return fmt(o.log_y ? std::pow(10.0, v) : v); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o.width) + "\" height=\"" +
       std::to_string(o.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + escape(o.title) +
       "</text>\n";
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"" + fmt(top + ph + 15) + "\" text-anchor=\"middle\">" + fmt(x0) + "</text>\n";
  s += "<text x=\"" + fmt(left + pw) + "\" y=\"" + fmt(top + ph + 15) + "\" text-anchor=\"middle\">" + fmt(x1) +
       "</text>\n";
  s += "<text x=\"" + fmt(left - 5) + "\" y=\"" + fmt(top + ph) + "\" text-anchor=\"end\">" + label_y(y0) + "</text>\n";
  s += "<text x=\"" + fmt(left - 5) + "\" y=\"" + fmt(top + 10) + "\" text-anchor=\"end\">" + label_y(y1) + "</text>\n";
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(o.height - 8) + "\" text-anchor=\"middle\">" +
       escape(o.x_label) + "</text>\n";
  s += "<text transform=\"translate(14," + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(o.y_label) + (o.log_y ? " (log)" : "") + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& se = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(se.x.size(), se.y.size()); ++i) {
      if (!usable(se.y[i]) || !std::isfinite(se.x[i])) continue;
      pts += fmt(px(se.x[i])) + "," + fmt(py(se.y[i])) + " ";
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
    const double ly = top + 12 + 16.0 * static_cast<double>(k);
    s += "<line x1=\"" + fmt(left + pw + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(left + pw + 28) +
         "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(left + pw + 32) + "\" y=\"" + fmt(ly) + "\">" + escape(se.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace demo::harness
