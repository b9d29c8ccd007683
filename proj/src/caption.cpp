#include "diagcap/caption.hpp"

#include <charconv>
#include <map>
#include <set>
#include <unordered_map>

namespace diagcap::caption {

const CaptionStyle& ict_default() {
  static const CaptionStyle style{
      .id = "ict-default",
      .flowchart_title = "This flowchart describes the following procedure:",
      .step = "Step {k}: ",
      .start = "Start ({label})",
      .end = "End ({label})",
      .process = "{label}",
      .decision = "Check {label}.",
      .first_branch = " If {branch}, go to Step {j}",
      .other_branch = "if {branch}, go to Step {j}",
      .branch_separator = "; ",
      .jump = ", then go to Step {j}",
      .jump_more = " and Step {j}",
      .dead_end = ", then stop",
      .sentence_end = ".",
      .sequence_title = "This signal diagram describes the following message flow:",
      .message = "{from} sends '{label}' to {to}",
      .self_message = "{from} performs '{label}' internally",
      .dashed_suffix = " (dashed response)",
  };
  return style;
}

namespace {

/// Single-pass placeholder substitution; inserted values are never rescanned.
std::string fill(std::string_view tmpl, const std::map<std::string_view, std::string_view>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string join_lines(const std::string& title, const std::vector<std::string>& steps) {
  std::string out = title;
  for (const auto& s : steps) out += "\n" + s;
  return out;
}

}  // namespace

std::vector<std::string> step_order(const FlowchartGraph& graph) {
  std::unordered_map<std::string, std::vector<std::string>> succ;
  std::unordered_map<std::string, std::size_t> indeg;
  for (const auto& e : graph.edges) {
    succ[e.src].push_back(e.dst);
    ++indeg[e.dst];
  }
  std::string start;
  for (const auto& n : graph.nodes)
    if (n.shape == NodeShape::Terminal && indeg[n.id] == 0) {
      start = n.id;
      break;
    }
  if (start.empty()) return {};

  std::vector<std::string> order;
  std::set<std::string> visited{start};
  std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
  order.push_back(start);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& out = succ[node];
    if (next >= out.size()) {
      stack.pop_back();
      continue;
    }
    const std::string child = out[next++];
    if (visited.insert(child).second) {
      order.push_back(child);
      stack.emplace_back(child, 0);
    }
  }
  return order;
}

CaptionDoc caption(const DiagramAst& ast, const CaptionStyle& style) {
  require_valid(ast);
  CaptionDoc doc;
  doc.diagram_id = ast.diagram_id;

  if (const auto* g = ast.flowchart()) {
    doc.title_line = style.flowchart_title;
    const auto order = step_order(*g);
    std::unordered_map<std::string, int> step_of;
    for (std::size_t i = 0; i < order.size(); ++i) step_of[order[i]] = static_cast<int>(i + 1);

    std::unordered_map<std::string, std::vector<const FlowEdge*>> out;
    std::unordered_map<std::string, std::size_t> indeg;
    for (const auto& e : g->edges) {
      out[e.src].push_back(&e);
      ++indeg[e.dst];
    }

    for (std::size_t i = 0; i < order.size(); ++i) {
      const FlowNode& node = *g->find(order[i]);
      const std::string k = std::to_string(i + 1);
      const auto& edges = out[node.id];
      std::string line = fill(style.step, {{"k", k}});

      if (node.shape == NodeShape::Decision) {
        line += fill(style.decision, {{"label", node.label}});
        for (std::size_t b = 0; b < edges.size(); ++b) {
          const std::string j = std::to_string(step_of[edges[b]->dst]);
          const std::string& branch = *edges[b]->label;
          if (b == 0) {
            line += fill(style.first_branch, {{"branch", branch}, {"j", j}});
          } else {
            line += style.branch_separator;
            line += fill(style.other_branch, {{"branch", branch}, {"j", j}});
          }
        }
      } else {
        const bool terminal = node.shape == NodeShape::Terminal;
        if (terminal && indeg[node.id] == 0)
          line += fill(style.start, {{"label", node.label}});
        else if (terminal && edges.empty())
          line += fill(style.end, {{"label", node.label}});
        else
          line += fill(style.process, {{"label", node.label}});

        const bool falls_through = edges.size() == 1 && i + 1 < order.size() && edges[0]->dst == order[i + 1];
        if (edges.empty() && !terminal) {
          line += style.dead_end;
        } else if (!edges.empty() && !falls_through) {
          for (std::size_t b = 0; b < edges.size(); ++b) {
            const std::string j = std::to_string(step_of[edges[b]->dst]);
            line += fill(b == 0 ? style.jump : style.jump_more, {{"j", j}});
          }
        }
      }
      line += style.sentence_end;
      doc.steps.push_back(std::move(line));
    }
  } else {
    const auto& d = *ast.sequence();
    doc.title_line = style.sequence_title;
    for (const auto& m : d.messages) {
      const std::string k = std::to_string(m.seq_index + 1);
      const auto& from = d.find(m.from)->display_name;
      const auto& to = d.find(m.to)->display_name;
      std::string line = fill(style.step, {{"k", k}});
      line += fill(m.is_self() ? style.self_message : style.message,
                   {{"from", from}, {"to", to}, {"label", m.label}});
      if (m.arrow == Arrow::Dashed) line += style.dashed_suffix;
      line += style.sentence_end;
      doc.steps.push_back(std::move(line));
    }
  }
  doc.full_text = join_lines(doc.title_line, doc.steps);
  return doc;
}

namespace {

std::optional<int> leading_int(std::string_view s, std::size_t& consumed) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr == s.data()) return std::nullopt;
  consumed = static_cast<std::size_t>(ptr - s.data());
  return value;
}

std::vector<StepReference> references_in(std::string_view body) {
  constexpr std::string_view kGoTo = "go to Step ";
  constexpr std::string_view kAnd = " and Step ";
  std::vector<StepReference> refs;
  std::size_t pos = 0;
  while ((pos = body.find(kGoTo, pos)) != std::string_view::npos) {
    // Branch condition: text between the clause's " If "/"; if " and ", go to".
    std::optional<std::string> branch;
    std::size_t from = 0;
    if (auto first = body.rfind(" If ", pos); first != std::string_view::npos) from = first + 1;
    if (auto later = body.rfind("; if ", pos); later != std::string_view::npos && later + 2 > from) from = later + 2;
    auto head = body.substr(from, pos - from);
    if ((head.starts_with("If ") || head.starts_with("if ")) && head.ends_with(", "))
      branch = std::string(head.substr(3, head.size() - 5));

    std::size_t used = 0;
    pos += kGoTo.size();
    auto target = leading_int(body.substr(pos), used);
    if (!target) continue;
    refs.push_back({branch, *target});
    pos += used;
    while (body.substr(pos).starts_with(kAnd)) {
      auto more = leading_int(body.substr(pos + kAnd.size()), used);
      if (!more) break;
      refs.push_back({std::nullopt, *more});
      pos += kAnd.size() + used;
    }
  }
  return refs;
}

}  // namespace

CaptionSkeleton parse_caption(std::string_view text, const CaptionStyle& style) {
  CaptionSkeleton sk;
  const auto k_at = style.step.find("{k}");
  const std::string_view step_head =
      k_at == std::string::npos ? std::string_view(style.step) : std::string_view(style.step).substr(0, k_at);
  const std::string_view step_tail =
      k_at == std::string::npos ? std::string_view() : std::string_view(style.step).substr(k_at + 3);

  bool first = true;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty()) continue;

    if (first && line == style.flowchart_title) {
      sk.kind = DiagramKind::Flowchart;
    } else if (first && line == style.sequence_title) {
      sk.kind = DiagramKind::Sequence;
    } else if (line.starts_with(step_head)) {
      std::size_t used = 0;
      auto number = leading_int(line.substr(step_head.size()), used);
      auto rest = number ? line.substr(step_head.size() + used) : std::string_view();
      if (number && rest.starts_with(step_tail)) {
        StepSkeleton step;
        step.number = *number;
        step.body = std::string(rest.substr(step_tail.size()));
        step.references = references_in(step.body);
        sk.steps.push_back(std::move(step));
      } else {
        sk.unrecognized.emplace_back(line);
      }
    } else {
      sk.unrecognized.emplace_back(line);
    }
    first = false;
  }
  return sk;
}

}  // namespace diagcap::caption
