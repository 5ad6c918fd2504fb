#pragma once

// Four-axis radar chart (usability, inverted task load, efficiency,
// reliability) as standalone SVG, read from radar.json.

#include <torqueflow/error.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace torqueflow {

inline std::string radar_svg(const nlohmann::json& radar) {
  const std::vector<std::string> axes = {"usability", "inverted_task_load", "efficiency", "reliability"};
  const std::vector<std::string> labels = {"Usability", "Inverted task load", "Efficiency", "Reliability"};
  const std::vector<std::pair<std::string, std::string>> series = {{"CONVENTIONAL", "#d9534f"}, {"AR_GUIDED", "#2b7bb9"}};
  constexpr double cx = 250, cy = 230, r = 160;

  auto point = [&](std::size_t axis, double value) {
    const double a = -std::numbers::pi / 2 + 2 * std::numbers::pi * static_cast<double>(axis) / axes.size();
    return std::pair{cx + r * value / 100.0 * std::cos(a), cy + r * value / 100.0 * std::sin(a)};
  };
  char buf[256];
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"480\" font-family=\"sans-serif\" "
                    "font-size=\"13\">\n<rect width=\"500\" height=\"480\" fill=\"white\"/>\n";
  for (int ring = 1; ring <= 4; ++ring) {
    std::string pts;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto [x, y] = point(i, ring * 25.0);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
      pts += buf;
    }
    svg += "<polygon points=\"" + pts + "\" fill=\"none\" stroke=\"#ccc\"/>\n";
  }
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const auto [x, y] = point(i, 100);
    const auto [lx, ly] = point(i, 116);
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#999\"/>\n", cx, cy, x, y);
    svg += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">", lx, ly + 4);
    svg += buf + labels[i] + "</text>\n";
  }
  double legend_y = 440;
  for (const auto& [name, color] : series) {
    if (!radar.contains(name)) throw FormatError("radar", 0, "missing series " + name);
    const auto& s = radar[name];
    std::string pts;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto& v = s.contains(axes[i]) ? s[axes[i]] : nlohmann::json();
      const double value = v.is_number() ? v.get<double>() : 0.0;
      const auto [x, y] = point(i, value);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
      pts += buf;
    }
    svg += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"30\" y=\"%.0f\" width=\"12\" height=\"12\" fill=\"%s\"/>", legend_y - 10,
                  color.c_str());
    svg += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"48\" y=\"%.0f\">", legend_y);
    svg += buf + name + "</text>\n";
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace torqueflow
