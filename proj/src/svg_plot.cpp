#include "sef/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "sef/error.hpp"

namespace sef {

namespace {

struct Ticks {
  double start = 0.0;
  double step = 1.0;
  int count = 0;
};

// Round-number tick positions covering [lo, hi] with at most max_ticks marks.
Ticks nice_ticks(double lo, double hi, int max_ticks) {
  const double raw = (hi - lo) / max_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  Ticks t;
  t.step = step;
  t.start = std::ceil(lo / step) * step;
  t.count = static_cast<int>(std::floor((hi - t.start) / step + 1e-9)) + 1;
  return t;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace

std::string interval_scatter_svg(const Eigen::VectorXd& targets,
                                 const IntervalPrediction& prediction,
                                 const PlotOptions& options) {
  prediction.check();
  if (static_cast<std::size_t>(targets.size()) != prediction.size() || targets.size() == 0) {
    throw ShapeError("plot needs one target per interval");
  }
  const auto n = static_cast<std::size_t>(targets.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return targets(static_cast<Eigen::Index>(a)) < targets(static_cast<Eigen::Index>(b));
  });

  double x_lo = targets.minCoeff();
  double x_hi = targets.maxCoeff();
  double y_lo = std::min({prediction.lower.minCoeff(), prediction.point.minCoeff(), x_lo});
  double y_hi = std::max({prediction.upper.maxCoeff(), prediction.point.maxCoeff(), x_hi});
  const auto pad = [](double& lo, double& hi) {
    const double span = hi > lo ? hi - lo : 1.0;
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(x_lo, x_hi);
  pad(y_lo, y_hi);

  const double left = 70.0, right = 20.0, top = 40.0, bottom = 55.0;
  const double plot_w = options.width - left - right;
  const double plot_h = options.height - top - bottom;
  const auto sx = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto sy = [&](double v) { return top + (y_hi - v) / (y_hi - y_lo) * plot_h; };

  std::string svg;
  svg += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0:.0f}\" "
      "height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} {1:.0f}\">\n",
      options.width, options.height);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
                     options.width, options.height);
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
      "text-anchor=\"middle\">{}</text>\n",
      options.width / 2.0, escape(options.title));

  // Interval band: lower bounds left to right, then upper bounds back.
  svg += "<polygon fill=\"#c8c8c8\" fill-opacity=\"0.7\" stroke=\"none\" points=\"";
  for (auto i : order) {
    const auto e = static_cast<Eigen::Index>(i);
    svg += fmt::format("{:.2f},{:.2f} ", sx(targets(e)), sy(prediction.lower(e)));
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto e = static_cast<Eigen::Index>(*it);
    svg += fmt::format("{:.2f},{:.2f} ", sx(targets(e)), sy(prediction.upper(e)));
  }
  svg += "\"/>\n";

  const auto polyline = [&](const Eigen::VectorXd& values, const char* colour) {
    std::string s = fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"",
                                colour);
    for (auto i : order) {
      const auto e = static_cast<Eigen::Index>(i);
      s += fmt::format("{:.2f},{:.2f} ", sx(targets(e)), sy(values(e)));
    }
    return s + "\"/>\n";
  };
  svg += polyline(prediction.lower, "#555555");
  svg += polyline(prediction.upper, "#555555");

  // Perfect-prediction diagonal.
  const double d_lo = std::max(x_lo, y_lo);
  const double d_hi = std::min(x_hi, y_hi);
  if (d_hi > d_lo) {
    svg += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" "
        "stroke-dasharray=\"4,3\" stroke-width=\"1\"/>\n",
        sx(d_lo), sy(d_lo), sx(d_hi), sy(d_hi));
  }

  for (auto i : order) {
    const auto e = static_cast<Eigen::Index>(i);
    const bool covered = prediction.lower(e) <= targets(e) && targets(e) <= prediction.upper(e);
    svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{}\" fill=\"{}\"/>\n",
                       sx(targets(e)), sy(prediction.point(e)), covered ? "2.5" : "4",
                       covered ? "#1f5fbf" : "#d62728");
  }

  // Axes, ticks and labels.
  svg += fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      left, top, plot_w, plot_h);
  const auto xt = nice_ticks(x_lo, x_hi, 8);
  for (int t = 0; t < xt.count; ++t) {
    const double v = xt.start + t * xt.step;
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.1f}\" x2=\"{0:.2f}\" y2=\"{2:.1f}\" stroke=\"black\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{4:g}</text>\n",
        sx(v), top + plot_h, top + plot_h + 5.0, top + plot_h + 18.0, v);
  }
  const auto yt = nice_ticks(y_lo, y_hi, 8);
  for (int t = 0; t < yt.count; ++t) {
    const double v = yt.start + t * yt.step;
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.2f}\" x2=\"{2:.1f}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
        "<text x=\"{3:.1f}\" y=\"{4:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{5:g}</text>\n",
        left - 5.0, sy(v), left, left - 8.0, sy(v) + 4.0, v);
  }
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"13\" "
      "text-anchor=\"middle\">actual y</text>\n",
      left + plot_w / 2.0, options.height - 12.0);
  svg += fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" font-family=\"sans-serif\" font-size=\"13\" "
      "text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">predicted / bounds</text>\n",
      top + plot_h / 2.0);
  svg += "</svg>\n";
  return svg;
}

}  // namespace sef
