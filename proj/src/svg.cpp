#include "csmil/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csmil/common.hpp"

namespace csmil {

namespace {

constexpr double kW = 640, kH = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

std::string text(double x, double y, const std::string& s, const std::string& extra = "") {
  return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"sans-serif\" font-size=\"12\"" +
         extra + ">" + esc(s) + "</text>\n";
}

std::string header(const std::string& title) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kW) + "\" height=\"" +
                    px(kH) + "\" viewBox=\"0 0 " + px(kW) + " " + px(kH) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += text(kW / 2, 22, title, " text-anchor=\"middle\" font-size=\"14\"");
  return out;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<double>& x,
                           const std::vector<SvgSeries>& series, bool log_x) {
  if (x.empty() || series.empty()) throw ConfigError("empty chart input");
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  double xmin = tx(x.front()), xmax = tx(x.front());
  for (double v : x) {
    xmin = std::min(xmin, tx(v));
    xmax = std::max(xmax, tx(v));
  }
  double ymin = series[0].y[0], ymax = ymin;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (tx(v) - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double v) { return kTop + (ymax - v) / (ymax - ymin) * plot_h; };

  std::string out = header(title);
  out += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" + px(plot_w) +
         "\" height=\"" + px(plot_h) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fy = ymin + (ymax - ymin) * i / 4.0;
    out += text(kLeft - 8, sy(fy) + 4, fmt_tick(fy), " text-anchor=\"end\"");
    double fxv = xmin + (xmax - xmin) * i / 4.0;
    double fx = log_x ? std::pow(10.0, fxv) : fxv;
    out += text(kLeft + plot_w * i / 4.0, kH - kBottom + 18, fmt_tick(fx), " text-anchor=\"middle\"");
  }
  out += text(kW / 2, kH - 12, xlabel, " text-anchor=\"middle\"");
  out += text(16, kTop - 10, ylabel);

  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].y.size() != x.size()) throw ConfigError("series length mismatch");
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i)
      pts += px(sx(x[i])) + "," + px(sy(series[s].y[i])) + " ";
    const char* color = kColors[s % 6];
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    out += text(kLeft + plot_w - 120, kTop + 16 + 16 * static_cast<double>(s), series[s].label,
                std::string(" fill=\"") + color + "\"");
  }
  out += "</svg>\n";
  return out;
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  if (labels.empty() || labels.size() != values.size()) throw ConfigError("empty chart input");
  double ymin = std::min(0.0, *std::min_element(values.begin(), values.end()));
  double ymax = std::max(0.0, *std::max_element(values.begin(), values.end()));
  if (ymax == ymin) ymax = ymin + 1;
  double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto sy = [&](double v) { return kTop + (ymax - v) / (ymax - ymin) * plot_h; };

  std::string out = header(title);
  out += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" + px(plot_w) +
         "\" height=\"" + px(plot_h) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fy = ymin + (ymax - ymin) * i / 4.0;
    out += text(kLeft - 8, sy(fy) + 4, fmt_tick(fy), " text-anchor=\"end\"");
  }
  double slot = plot_w / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double x0 = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    double top = sy(std::max(values[i], 0.0));
    double bottom = sy(std::min(values[i], 0.0));
    out += "<rect x=\"" + px(x0) + "\" y=\"" + px(top) + "\" width=\"" + px(slot * 0.7) +
           "\" height=\"" + px(std::max(bottom - top, 0.5)) + "\" fill=\"#1f77b4\"/>\n";
    out += text(x0 + slot * 0.35, kH - kBottom + 18, labels[i], " text-anchor=\"middle\"");
  }
  out += "</svg>\n";
  return out;
}

}  // namespace csmil
