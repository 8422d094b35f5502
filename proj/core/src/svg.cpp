#include "delusive/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "delusive/errors.hpp"

namespace delusive {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
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

std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  if (series.empty()) throw std::domain_error("plot needs at least one series");
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& s : series) {
    if (s.points.empty()) throw std::domain_error("plot series '" + s.label + "' is empty");
    for (auto [x, y] : s.points) {
      if (spec.log_x && !(x > 0.0))
        throw std::domain_error("log-x plot needs positive x values");
      const double tx = spec.log_x ? std::log10(x) : x;
      if (first) {
        xmin = xmax = tx;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, tx);
        xmax = std::max(xmax, tx);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double left = 62, right = 16, top = 34, bottom = 46;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto px = [&](double x) {
    const double tx = spec.log_x ? std::log10(x) : x;
    return left + (tx - xmin) / (xmax - xmin) * pw;
  };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" " +
         "font-family=\"sans-serif\" font-size=\"14\">" + escape(spec.title) + "</text>\n";

  // Axes box and ticks.
  out += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = xmin + (xmax - xmin) * t / ticks;
    const double gx = left + pw * t / ticks;
    const double label = spec.log_x ? std::pow(10.0, fx) : fx;
    out += "<line x1=\"" + fmt(gx) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(gx) +
           "\" y2=\"" + fmt(top + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt(gx) + "\" y=\"" + fmt(top + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           fmt_tick(label) + "</text>\n";
    const double fy = ymin + (ymax - ymin) * t / ticks;
    const double gy = top + ph - ph * t / ticks;
    out += "<line x1=\"" + fmt(left - 5) + "\" y1=\"" + fmt(gy) + "\" x2=\"" + fmt(left) +
           "\" y2=\"" + fmt(gy) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(gy + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt_tick(fy) +
           "</text>\n";
  }
  out += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(spec.height - 8.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape(spec.xlabel) + "</text>\n";
  out += "<text x=\"14\" y=\"" + fmt(top + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
         fmt(top + ph / 2) + ")\">" + escape(spec.ylabel) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if (!pts.empty()) pts += ' ';
      pts += fmt(px(x)) + "," + fmt(py(y));
    }
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }

  // Legend, top-right inside the plot box.
  const double lx = left + pw - 150, ly = top + 10;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
    const double row = ly + 16.0 * static_cast<double>(i);
    out += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(row) + "\" x2=\"" + fmt(lx + 22) +
           "\" y2=\"" + fmt(row) + "\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt(lx + 28) + "\" y=\"" + fmt(row + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(series[i].label) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec,
                     const std::vector<Series>& series) {
  const std::string svg = render_line_plot(spec, series);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  f << svg;
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

}  // namespace delusive
