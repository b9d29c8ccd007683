#include "diagcap/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace diagcap::render {

void RenderConfig::check() const {
  if (!(canvas_padding > 0) || !(node_gap_x > 0) || !(node_gap_y > 0) || !(font_size > 0))
    throw Error("render config: padding, gaps and font size must be positive");
}

bool Box::overlaps(const Box& o) const {
  return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
}

bool Box::on_boundary(Point p, double eps) const {
  const bool in_x = p.x >= x - eps && p.x <= right() + eps;
  const bool in_y = p.y >= y - eps && p.y <= bottom() + eps;
  const bool on_v = std::abs(p.x - x) <= eps || std::abs(p.x - right()) <= eps;
  const bool on_h = std::abs(p.y - y) <= eps || std::abs(p.y - bottom()) <= eps;
  return (on_v && in_y) || (on_h && in_x);
}

bool Box::crosses_interior(Point a, Point b) const {
  // Liang-Barsky clip against the open rectangle.
  double t0 = 0, t1 = 1;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - x, right() - a.x, a.y - y, bottom() - a.y};
  constexpr double eps = 1e-9;
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0) {
      if (q[i] <= eps) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
  }
  if (t1 - t0 <= eps) return false;
  // The clipped piece may still lie on the boundary; test its midpoint strictly.
  const double tm = (t0 + t1) / 2;
  const double mx = a.x + tm * dx, my = a.y + tm * dy;
  return mx > x + eps && mx < right() - eps && my > y + eps && my < bottom() - eps;
}

double text_width(std::string_view text, double font_size) {
  std::size_t code_points = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++code_points;
  return static_cast<double>(code_points) * 0.6 * font_size;
}

Point polyline_midpoint(const std::vector<Point>& pts) {
  if (pts.empty()) return {};
  double total = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  double remaining = total / 2;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    if (seg >= remaining && seg > 0) {
      const double t = remaining / seg;
      return {pts[i - 1].x + t * (pts[i].x - pts[i - 1].x), pts[i - 1].y + t * (pts[i].y - pts[i - 1].y)};
    }
    remaining -= seg;
  }
  return pts.back();
}

namespace {

constexpr double kTextPad = 1.2;  // boxes absorb a 20% text width estimate error

double padded_text(std::string_view s, double font) { return text_width(s, font) * kTextPad; }

/// Tracks the extent of everything drawn so the picture can be shifted onto the canvas.
struct Extent {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -std::numeric_limits<double>::infinity(), y1 = x1;

  void add(Point p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  void add(const Box& b) {
    add(Point{b.x, b.y});
    add(Point{b.right(), b.bottom()});
  }
  void add_label(Point center, std::string_view text, double font) {
    const double w = padded_text(text, font) / 2;
    add(Point{center.x - w, center.y - font});
    add(Point{center.x + w, center.y + font});
  }
};

void shift(Layout& lay, const Extent& ext, double pad) {
  const double dx = pad - ext.x0, dy = pad - ext.y0;
  for (auto& [_, b] : lay.boxes) {
    b.x += dx;
    b.y += dy;
  }
  for (auto* paths : {&lay.edges, &lay.message_paths})
    for (auto& path : *paths)
      for (auto& p : path) {
        p.x += dx;
        p.y += dy;
      }
  for (auto& x : lay.lifeline_x) x += dx;
  for (auto& y : lay.message_y) y += dy;
  lay.lifeline_top += dy;
  lay.lifeline_bottom += dy;
  lay.width = ext.x1 - ext.x0 + 2 * pad;
  lay.height = ext.y1 - ext.y0 + 2 * pad;
}

Point edge_label_anchor(const std::vector<Point>& pts, double font) {
  Point mid = polyline_midpoint(pts);
  return {mid.x, mid.y - font * 0.6};
}

Layout layout_flowchart(const FlowchartGraph& g, const std::string& start, const RenderConfig& cfg) {
  const double font = cfg.font_size;
  const bool td = g.direction == Direction::TopDown;
  // Abstract axes: "main" runs along the layers, "cross" across them.
  const double main_gap = td ? cfg.node_gap_y : cfg.node_gap_x;
  const double cross_gap = td ? cfg.node_gap_x : cfg.node_gap_y;

  std::map<std::string, std::vector<std::size_t>> out_edges;
  for (std::size_t i = 0; i < g.edges.size(); ++i) out_edges[g.edges[i].src].push_back(i);

  // Back edges: edges into a node still on the depth-first stack.
  std::vector<bool> back(g.edges.size(), false);
  {
    std::set<std::string> done, on_stack{start};
    std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& outs = out_edges[node];
      if (next >= outs.size()) {
        on_stack.erase(node);
        done.insert(node);
        stack.pop_back();
        continue;
      }
      const std::size_t ei = outs[next++];
      const std::string& dst = g.edges[ei].dst;
      if (on_stack.count(dst)) {
        back[ei] = true;
      } else if (!done.count(dst)) {
        on_stack.insert(dst);
        stack.emplace_back(dst, 0);
      }
    }
  }

  // Longest-path layering over the forward edges, in topological order.
  std::map<std::string, int> layer, indeg;
  for (const auto& n : g.nodes) {
    layer[n.id] = 1;
    indeg[n.id] = 0;
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (!back[i]) ++indeg[g.edges[i].dst];
  std::vector<std::string> ready;
  for (const auto& n : g.nodes)
    if (indeg[n.id] == 0) ready.push_back(n.id);
  for (std::size_t k = 0; k < ready.size(); ++k) {
    const std::string id = ready[k];
    for (std::size_t ei : out_edges[id]) {
      if (back[ei]) continue;
      const auto& dst = g.edges[ei].dst;
      layer[dst] = std::max(layer[dst], layer[id] + 1);
      if (--indeg[dst] == 0) ready.push_back(dst);
    }
  }
  int layers = 0;
  for (const auto& [_, l] : layer) layers = std::max(layers, l);

  // Node sizes in screen orientation.
  std::map<std::string, std::pair<double, double>> size;  // width, height
  for (const auto& n : g.nodes) {
    const double tw = padded_text(n.label, font);
    const double h = font * 2.4;
    switch (n.shape) {
      case NodeShape::Terminal: size[n.id] = {tw + h, h}; break;
      case NodeShape::Process: size[n.id] = {std::max(tw + font, font * 4), h}; break;
      case NodeShape::Decision: size[n.id] = {tw * 1.6 + font * 2, font * 4}; break;
    }
  }
  auto main_size = [&](const std::string& id) { return td ? size[id].second : size[id].first; };
  auto cross_size = [&](const std::string& id) { return td ? size[id].first : size[id].second; };

  // Abstract boxes: c0/m0 corner, cs/ms extents.
  struct ABox {
    double c0, m0, cs, ms;
    double c1() const { return c0 + cs; }
    double m1() const { return m0 + ms; }
    double cc() const { return c0 + cs / 2; }
    double mc() const { return m0 + ms / 2; }
  };
  std::map<std::string, ABox> abox;
  std::vector<double> band_start(static_cast<std::size_t>(layers) + 2, 0), band_end(band_start);
  double cursor = 0, cross_min = 0, cross_max = 0;
  for (int l = 1; l <= layers; ++l) {
    std::vector<std::string> members;
    for (const auto& n : g.nodes)
      if (layer[n.id] == l) members.push_back(n.id);
    double extent = 0, total_cross = 0;
    for (const auto& id : members) {
      extent = std::max(extent, main_size(id));
      total_cross += cross_size(id);
    }
    total_cross += cross_gap * static_cast<double>(members.size() - 1);
    double c = -total_cross / 2;
    for (const auto& id : members) {
      abox[id] = {c, cursor + (extent - main_size(id)) / 2, cross_size(id), main_size(id)};
      c += cross_size(id) + cross_gap;
    }
    cross_min = std::min(cross_min, -total_cross / 2);
    cross_max = std::max(cross_max, total_cross / 2);
    band_start[static_cast<std::size_t>(l)] = cursor;
    band_end[static_cast<std::size_t>(l)] = cursor + extent;
    cursor += extent + main_gap;
  }
  auto channel_below = [&](int l) {
    const auto i = static_cast<std::size_t>(l);
    return l < layers ? (band_end[i] + band_start[i + 1]) / 2 : band_end[i] + main_gap / 2;
  };
  auto channel_above = [&](int l) { return l > 1 ? channel_below(l - 1) : band_start[1] - main_gap / 2; };

  Layout lay;
  lay.kind = DiagramKind::Flowchart;
  lay.layer = layer;
  lay.back_edge = back;

  auto to_screen = [&](double c, double m) { return td ? Point{c, m} : Point{m, c}; };

  int right_lanes = 0, left_lanes = 0;
  for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
    const auto& e = g.edges[ei];
    const ABox& s = abox[e.src];
    const ABox& d = abox[e.dst];
    const int ls = layer[e.src], ld = layer[e.dst];
    const bool decision = g.find(e.src)->shape == NodeShape::Decision;
    const auto& outs = out_edges[e.src];
    const std::size_t branch = static_cast<std::size_t>(std::find(outs.begin(), outs.end(), ei) - outs.begin());
    const double below = channel_below(ls);

    std::vector<std::pair<double, double>> pts;  // (cross, main)
    if (decision && branch == 1) {
      pts = {{s.c1(), s.mc()}, {s.c1() + cross_gap / 3, s.mc()}, {s.c1() + cross_gap / 3, below}};
    } else if (decision && branch == 2) {
      pts = {{s.c0, s.mc()}, {s.c0 - cross_gap / 3, s.mc()}, {s.c0 - cross_gap / 3, below}};
    } else {
      pts = {{s.cc(), s.m1()}, {s.cc(), below}};
    }
    if (!back[ei] && ld == ls + 1) {
      pts.push_back({d.cc(), below});
    } else {
      const double lane = back[ei] ? cross_min - cross_gap * (++left_lanes) : cross_max + cross_gap * (++right_lanes);
      const double above = channel_above(ld);
      pts.push_back({lane, below});
      pts.push_back({lane, above});
      pts.push_back({d.cc(), above});
    }
    pts.push_back({d.cc(), d.m0});

    std::vector<Point> path;
    for (const auto& [c, m] : pts) {
      Point p = to_screen(c, m);
      if (path.empty() || !(path.back() == p)) path.push_back(p);
    }
    lay.edges.push_back(std::move(path));
  }

  for (const auto& [id, a] : abox) {
    Point corner = to_screen(a.c0, a.m0);
    lay.boxes[id] = {corner.x, corner.y, size[id].first, size[id].second};
  }

  Extent ext;
  for (const auto& [_, b] : lay.boxes) ext.add(b);
  for (std::size_t ei = 0; ei < lay.edges.size(); ++ei) {
    for (const auto& p : lay.edges[ei]) ext.add(p);
    if (g.edges[ei].label) ext.add_label(edge_label_anchor(lay.edges[ei], font), *g.edges[ei].label, font);
  }
  shift(lay, ext, cfg.canvas_padding);
  return lay;
}

Layout layout_sequence(const SequenceDiagram& d, const RenderConfig& cfg) {
  const double font = cfg.font_size;
  const double head_h = font * 2.4;
  double head_w = font * 4;
  for (const auto& p : d.participants) head_w = std::max(head_w, padded_text(p.display_name, font) + font);

  double spacing = head_w + cfg.node_gap_x;
  for (const auto& m : d.messages) {
    const int span = std::abs(d.column(m.from) - d.column(m.to));
    if (span > 0) spacing = std::max(spacing, (padded_text(m.label, font) + font) / span);
  }

  Layout lay;
  lay.kind = DiagramKind::Sequence;
  for (std::size_t i = 0; i < d.participants.size(); ++i) {
    const double x = static_cast<double>(i) * spacing;
    lay.lifeline_x.push_back(x);
    lay.boxes[d.participants[i].id] = {x - head_w / 2, 0, head_w, head_h};
  }
  lay.lifeline_top = head_h;

  const double step = font * 2.5;
  const double loop_w = font * 2.5, loop_h = font * 1.2;
  double y = head_h + cfg.node_gap_y / 2 + font;
  for (const auto& m : d.messages) {
    const double x0 = lay.lifeline_x[static_cast<std::size_t>(d.column(m.from))];
    const double x1 = lay.lifeline_x[static_cast<std::size_t>(d.column(m.to))];
    lay.message_y.push_back(y);
    if (m.is_self()) {
      lay.message_paths.push_back({{x0, y}, {x0 + loop_w, y}, {x0 + loop_w, y + loop_h}, {x0, y + loop_h}});
      y += loop_h;
    } else {
      lay.message_paths.push_back({{x0, y}, {x1, y}});
    }
    y += step;
  }
  lay.lifeline_bottom = y - step + cfg.node_gap_y / 2 + font;

  Extent ext;
  for (const auto& [_, b] : lay.boxes) ext.add(b);
  ext.add(Point{lay.lifeline_x.front(), lay.lifeline_bottom});
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    for (const auto& p : lay.message_paths[i]) ext.add(p);
    const auto& path = lay.message_paths[i];
    if (d.messages[i].is_self()) {
      const double w = padded_text(d.messages[i].label, font);
      ext.add(Point{path[1].x + font * 0.4 + w, path[1].y});
    } else {
      ext.add_label({(path[0].x + path[1].x) / 2, path[0].y - font * 0.6}, d.messages[i].label, font);
    }
  }
  shift(lay, ext, cfg.canvas_padding);
  return lay;
}

struct Palette {
  const char* background;
  const char* stroke;
  const char* fill;
  const char* text;
  const char* lifeline;
};

Palette palette(Theme t) {
  if (t == Theme::Dark) return {"#1e1e1e", "#d0d0d0", "#2d2d30", "#eeeeee", "#777777"};
  return {"#ffffff", "#333333", "#f4f4f8", "#111111", "#aaaaaa"};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string points_attr(const std::vector<Point>& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ' ';
    out += num(p.x) + "," + num(p.y);
  }
  return out;
}

class SvgWriter {
 public:
  SvgWriter(const std::string& id, double w, double h, const RenderConfig& cfg) : cfg_(cfg), pal_(palette(cfg.theme)) {
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" id=\"" + xml_escape(id) + "\" width=\"" +
            num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
    out_ += "<defs>\n";
    out_ += std::string("<marker id=\"head-filled\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"8\" "
                        "markerHeight=\"8\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"") +
            pal_.stroke + "\"/></marker>\n";
    out_ += std::string("<marker id=\"head-open\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"8\" "
                        "markerHeight=\"8\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10\" fill=\"none\" stroke=\"") +
            pal_.stroke + "\"/></marker>\n";
    out_ += "</defs>\n";
    out_ += std::string("<rect x=\"0\" y=\"0\" width=\"") + num(w) + "\" height=\"" + num(h) + "\" fill=\"" +
            pal_.background + "\"/>\n";
  }

  void raw(const std::string& s) { out_ += s; }

  void text(Point at, std::string_view content, const char* anchor = "middle") {
    out_ += "<text x=\"" + num(at.x) + "\" y=\"" + num(at.y) + "\" text-anchor=\"" + anchor +
            "\" dominant-baseline=\"central\" font-family=\"monospace\" font-size=\"" + num(cfg_.font_size) +
            "\" fill=\"" + pal_.text + "\">" + xml_escape(content) + "</text>\n";
  }

  std::string finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

  const Palette& pal() const { return pal_; }

 private:
  const RenderConfig& cfg_;
  Palette pal_;
  std::string out_;
};

std::string render_flowchart(const DiagramAst& ast, const FlowchartGraph& g, const Layout& lay,
                             const RenderConfig& cfg) {
  SvgWriter w(ast.diagram_id, lay.width, lay.height, cfg);
  const Palette& pal = w.pal();
  const std::string stroke = std::string("stroke=\"") + pal.stroke + "\" stroke-width=\"1.5\"";
  const std::string fill = std::string("fill=\"") + pal.fill + "\"";

  for (const auto& n : g.nodes) {
    const Box& b = lay.boxes.at(n.id);
    switch (n.shape) {
      case NodeShape::Terminal:
        w.raw("<rect class=\"terminal\" x=\"" + num(b.x) + "\" y=\"" + num(b.y) + "\" width=\"" + num(b.width) +
              "\" height=\"" + num(b.height) + "\" rx=\"" + num(b.height / 2) + "\" " + fill + " " + stroke + "/>\n");
        break;
      case NodeShape::Process:
        w.raw("<rect class=\"process\" x=\"" + num(b.x) + "\" y=\"" + num(b.y) + "\" width=\"" + num(b.width) +
              "\" height=\"" + num(b.height) + "\" " + fill + " " + stroke + "/>\n");
        break;
      case NodeShape::Decision:
        w.raw("<polygon class=\"decision\" points=\"" +
              points_attr({{b.cx(), b.y}, {b.right(), b.cy()}, {b.cx(), b.bottom()}, {b.x, b.cy()}}) + "\" " + fill +
              " " + stroke + "/>\n");
        break;
    }
    w.text({b.cx(), b.cy()}, n.label);
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    w.raw("<polyline class=\"edge\" points=\"" + points_attr(lay.edges[i]) + "\" fill=\"none\" " + stroke +
          " marker-end=\"url(#head-filled)\"/>\n");
    if (g.edges[i].label) w.text(edge_label_anchor(lay.edges[i], cfg.font_size), *g.edges[i].label);
  }
  return w.finish();
}

std::string render_sequence(const DiagramAst& ast, const SequenceDiagram& d, const Layout& lay,
                            const RenderConfig& cfg) {
  SvgWriter w(ast.diagram_id, lay.width, lay.height, cfg);
  const Palette& pal = w.pal();
  const std::string stroke = std::string("stroke=\"") + pal.stroke + "\" stroke-width=\"1.5\"";
  const double font = cfg.font_size;

  for (std::size_t i = 0; i < d.participants.size(); ++i) {
    const double x = lay.lifeline_x[i];
    w.raw("<line class=\"lifeline\" x1=\"" + num(x) + "\" y1=\"" + num(lay.lifeline_top) + "\" x2=\"" + num(x) +
          "\" y2=\"" + num(lay.lifeline_bottom) + "\" stroke=\"" + pal.lifeline + "\" stroke-width=\"1\"/>\n");
  }
  for (const auto& p : d.participants) {
    const Box& b = lay.boxes.at(p.id);
    w.raw("<rect class=\"participant\" x=\"" + num(b.x) + "\" y=\"" + num(b.y) + "\" width=\"" + num(b.width) +
          "\" height=\"" + num(b.height) + "\" fill=\"" + pal.fill + "\" " + stroke + "/>\n");
    w.text({b.cx(), b.cy()}, p.display_name);
  }
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    const auto& m = d.messages[i];
    const auto& path = lay.message_paths[i];
    const bool dashed = m.arrow == Arrow::Dashed;
    w.raw(std::string("<polyline class=\"message ") + (dashed ? "dashed" : "solid") + "\" points=\"" +
          points_attr(path) + "\" fill=\"none\" " + stroke + (dashed ? " stroke-dasharray=\"6 4\"" : "") +
          " marker-end=\"url(#" + (dashed ? "head-open" : "head-filled") + ")\"/>\n");
    if (m.is_self())
      w.text({path[1].x + font * 0.4, (path[1].y + path[2].y) / 2}, m.label, "start");
    else
      w.text({(path[0].x + path[1].x) / 2, path[0].y - font * 0.6}, m.label);
  }
  return w.finish();
}

}  // namespace

Layout layout(const DiagramAst& ast, const RenderConfig& cfg) {
  cfg.check();
  require_valid(ast);
  if (const auto* g = ast.flowchart()) return layout_flowchart(*g, graph_oracle(ast).start, cfg);
  return layout_sequence(*ast.sequence(), cfg);
}

std::string render(const DiagramAst& ast, const RenderConfig& cfg) {
  const Layout lay = layout(ast, cfg);
  if (const auto* g = ast.flowchart()) return render_flowchart(ast, *g, lay, cfg);
  return render_sequence(ast, *ast.sequence(), lay, cfg);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace diagcap::render
