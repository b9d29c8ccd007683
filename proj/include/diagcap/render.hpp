#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "diagcap/diagram.hpp"

namespace diagcap::render {

enum class Theme { Light, Dark };

struct RenderConfig {
  double canvas_padding = 20;
  double node_gap_x = 40;
  double node_gap_y = 50;
  double font_size = 14;
  Theme theme = Theme::Light;

  /// Throws Error unless every size is positive.
  void check() const;
};

struct Point {
  double x = 0;
  double y = 0;

  bool operator==(const Point&) const = default;
};

struct Box {
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;

  double right() const { return x + width; }
  double bottom() const { return y + height; }
  double cx() const { return x + width / 2; }
  double cy() const { return y + height / 2; }
  bool overlaps(const Box& o) const;
  bool on_boundary(Point p, double eps = 1e-6) const;
  /// True if the segment passes through the open interior of the box.
  bool crosses_interior(Point a, Point b) const;
};

struct Layout {
  DiagramKind kind = DiagramKind::Flowchart;
  double width = 0;
  double height = 0;

  // Flowchart: one box per node, one polyline per edge (same order as the AST).
  // Sequence: one header box per participant.
  std::map<std::string, Box> boxes;
  std::map<std::string, int> layer;  // flowchart only, 1-based
  std::vector<std::vector<Point>> edges;
  std::vector<bool> back_edge;

  // Sequence only.
  std::vector<double> lifeline_x;  // declaration order
  double lifeline_top = 0;
  double lifeline_bottom = 0;
  std::vector<double> message_y;  // seq_index order
  std::vector<std::vector<Point>> message_paths;
};

/// Estimated rendered width of a single-line string: code points x 0.6 x font size.
double text_width(std::string_view text, double font_size);

/// Point at half the arc length of a polyline.
Point polyline_midpoint(const std::vector<Point>& pts);

/// Deterministic layout. Throws Error on an invalid AST or config.
Layout layout(const DiagramAst& ast, const RenderConfig& cfg = {});

/// Standalone SVG 1.1 document; the root element's id is the diagram id.
std::string render(const DiagramAst& ast, const RenderConfig& cfg = {});

std::string xml_escape(std::string_view s);

}  // namespace diagcap::render
