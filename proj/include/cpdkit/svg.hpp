#pragma once

#include <string>
#include <vector>

namespace cpdkit::svg {

struct Series {
  std::string label;
  std::vector<double> values;
};

/// One stacked chart; all series share the sample axis.
struct Panel {
  std::string title;
  std::vector<Series> series;
};

constexpr int kCanvasWidth = 800;
constexpr int kPanelHeight = 300;

/// Static SVG, kCanvasWidth wide and kPanelHeight per panel, one polyline
/// per series. Output depends only on the input values.
std::string line_chart(const std::vector<Panel>& panels, const std::string& x_label = "sample");

}  // namespace cpdkit::svg
