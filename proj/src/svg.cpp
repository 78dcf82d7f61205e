#include "cpdkit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cpdkit/tensor.hpp"

namespace cpdkit::svg {

namespace {

constexpr int kLeft = 70;
constexpr int kRight = 20;
constexpr int kTop = 30;
constexpr int kBottom = 45;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
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

std::string line_chart(const std::vector<Panel>& panels, const std::string& x_label) {
  if (panels.empty()) throw DomainError("line_chart: nothing to plot");
  std::size_t length = 0;
  for (const auto& p : panels) {
    if (p.series.empty()) throw DomainError("line_chart: panel '" + p.title + "' has no series");
    for (const auto& s : p.series) {
      if (s.values.empty()) throw DomainError("line_chart: series '" + s.label + "' is empty");
      if (length == 0) length = s.values.size();
      if (s.values.size() != length) throw DimensionError("line_chart: series lengths differ");
    }
  }

  const int height = kPanelHeight * static_cast<int>(panels.size());
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kCanvasWidth) + "\" height=\"" +
         std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(kCanvasWidth) + " " + std::to_string(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double plot_w = kCanvasWidth - kLeft - kRight;
  const double plot_h = kPanelHeight - kTop - kBottom;
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const auto& panel = panels[pi];
    const double y0 = static_cast<double>(pi) * kPanelHeight;
    double lo = panel.series.front().values.front(), hi = lo;
    for (const auto& s : panel.series)
      for (double v : s.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (hi == lo) {
      lo -= 1.0;
      hi += 1.0;
    }
    auto px = [&](std::size_t k) {
      return kLeft + (length > 1 ? plot_w * static_cast<double>(k) / static_cast<double>(length - 1) : plot_w / 2);
    };
    auto py = [&](double v) { return y0 + kTop + plot_h * (hi - v) / (hi - lo); };

    out += "<g>\n";
    out += "<text x=\"" + num(kCanvasWidth / 2.0) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\">" +
           escape(panel.title) + "</text>\n";
    out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y0 + kTop + plot_h) + "\" x2=\"" + num(kLeft + plot_w) +
           "\" y2=\"" + num(y0 + kTop + plot_h) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y0 + kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(y0 + kTop + plot_h) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(kLeft - 5) + "\" y=\"" + num(y0 + kTop + 4) + "\" text-anchor=\"end\">" + tick(hi) +
           "</text>\n";
    out += "<text x=\"" + num(kLeft - 5) + "\" y=\"" + num(y0 + kTop + plot_h) + "\" text-anchor=\"end\">" +
           tick(lo) + "</text>\n";
    out += "<text x=\"" + num(kLeft) + "\" y=\"" + num(y0 + kTop + plot_h + 15) + "\" text-anchor=\"middle\">1</text>\n";
    out += "<text x=\"" + num(kLeft + plot_w) + "\" y=\"" + num(y0 + kTop + plot_h + 15) +
           "\" text-anchor=\"middle\">" + std::to_string(length) + "</text>\n";
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(y0 + kTop + plot_h + 32) +
           "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
    out += "<text x=\"15\" y=\"" + num(y0 + kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
           num(y0 + kTop + plot_h / 2) + ")\">" + escape(panel.title) + "</text>\n";

    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const auto& s = panel.series[si];
      const char* color = kPalette[si % std::size(kPalette)];
      out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < s.values.size(); ++k) {
        if (k) out += ' ';
        out += num(px(k)) + "," + num(py(s.values[k]));
      }
      out += "\"/>\n";
      const double ly = y0 + kTop + 12 + 14 * static_cast<double>(si);
      out += "<text x=\"" + num(kLeft + plot_w - 5) + "\" y=\"" + num(ly) + "\" text-anchor=\"end\" fill=\"" + color +
             "\">" + escape(s.label) + "</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace cpdkit::svg
