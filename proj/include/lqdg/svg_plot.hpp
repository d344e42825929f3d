#pragma once

// Minimal SVG line charts for convergence traces. Output depends only on the
// input data, so the same series always produce the same bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace lqdg::svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  int width = 720;
  int height = 420;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#2ca02c", "#9467bd", "#1f77b4", "#d62728",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf"};
  return palette[i % (sizeof palette / sizeof palette[0])];
}

}  // namespace detail

/// Renders every series as a polyline. With log_y, nonpositive or non-finite
/// y values are dropped.
inline std::string line_chart(const std::vector<Series>& series,
                              const PlotOptions& opt) {
  const double left = 80, right = 170, top = 40, bottom = 55;
  const double plot_w = opt.width - left - right;
  const double plot_h = opt.height - top - bottom;

  auto transform_y = [&](double y) { return opt.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!opt.log_y || y > 0.0);
  };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!usable(x, y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, transform_y(y));
      ymax = std::max(ymax, transform_y(y));
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  }
  if (opt.log_y) {
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double ty) {
    return top + (1.0 - (ty - ymin) / (ymax - ymin)) * plot_h;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(opt.width) + "\" height=\"" +
         std::to_string(opt.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::num(left + plot_w / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::escape(opt.title) + "</text>\n";
  out += "<rect x=\"" + detail::num(left) + "\" y=\"" + detail::num(top) +
         "\" width=\"" + detail::num(plot_w) + "\" height=\"" +
         detail::num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

  // y ticks: decades on a log axis, five even steps otherwise.
  std::vector<double> yticks;
  if (opt.log_y) {
    const int span = static_cast<int>(ymax - ymin);
    const int stride = std::max(1, span / 8);
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); e += stride) {
      yticks.push_back(e);
    }
  } else {
    for (int t = 0; t <= 5; ++t) yticks.push_back(ymin + (ymax - ymin) * t / 5.0);
  }
  for (double ty : yticks) {
    const double y = py(ty);
    const std::string label =
        opt.log_y ? "1e" + std::to_string(static_cast<int>(ty)) : detail::tick_label(ty);
    out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(y) +
           "\" x2=\"" + detail::num(left + plot_w) + "\" y2=\"" + detail::num(y) +
           "\" stroke=\"#dddddd\"/>\n";
    out += "<text x=\"" + detail::num(left - 6) + "\" y=\"" + detail::num(y + 4) +
           "\" text-anchor=\"end\">" + label + "</text>\n";
  }
  for (int t = 0; t <= 5; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 5.0;
    const double x = px(xv);
    out += "<text x=\"" + detail::num(x) + "\" y=\"" +
           detail::num(top + plot_h + 16) + "\" text-anchor=\"middle\">" +
           detail::tick_label(xv) + "</text>\n";
  }
  out += "<text x=\"" + detail::num(left + plot_w / 2) + "\" y=\"" +
         detail::num(opt.height - 12.0) + "\" text-anchor=\"middle\">" +
         detail::escape(opt.x_label) + "</text>\n";
  out += "<text transform=\"translate(18," + detail::num(top + plot_h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + detail::escape(opt.y_label) +
         "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!usable(x, y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::num(px(x)) + "," + detail::num(py(transform_y(y)));
    }
    out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" +
           std::string(detail::color(i)) + "\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(i);
    out += "<line x1=\"" + detail::num(left + plot_w + 10) + "\" y1=\"" +
           detail::num(ly - 4) + "\" x2=\"" + detail::num(left + plot_w + 30) +
           "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" +
           detail::color(i) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::num(left + plot_w + 36) + "\" y=\"" +
           detail::num(ly) + "\">" + detail::escape(series[i].label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace lqdg::svg
