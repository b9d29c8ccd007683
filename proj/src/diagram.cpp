#include "diagcap/diagram.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace diagcap {

const FlowNode* FlowchartGraph::find(std::string_view id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Participant* SequenceDiagram::find(std::string_view id) const {
  for (const auto& p : participants)
    if (p.id == id) return &p;
  return nullptr;
}

int SequenceDiagram::column(std::string_view id) const {
  for (std::size_t i = 0; i < participants.size(); ++i)
    if (participants[i].id == id) return static_cast<int>(i);
  return -1;
}

bool structurally_equal(const DiagramAst& a, const DiagramAst& b) { return a.body == b.body; }

std::string Violation::to_string() const {
  std::string out = rule;
  if (!element.empty()) out += " [" + element + "]";
  out += ": " + message;
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) { return alpha(c) || digit(c) || c == '_'; });
}

std::optional<std::string> label_problem(std::string_view label) {
  if (label.empty()) return "empty label";
  for (char c : label) {
    if (c == '\n' || c == '\r') return "label contains a line break";
    if (c == '[' || c == ']' || c == '{' || c == '}' || c == '(' || c == ')' || c == '|')
      return std::string("label contains reserved character '") + c + "'";
  }
  auto space = [](char c) { return c == ' ' || c == '\t'; };
  if (space(label.front()) || space(label.back())) return "label has surrounding whitespace";
  return std::nullopt;
}

namespace {

void check_flowchart(const FlowchartGraph& g, std::vector<Violation>& out) {
  if (g.nodes.empty()) {
    out.push_back({"empty-graph", "", "flowchart has no nodes"});
    return;
  }

  std::unordered_set<std::string> seen;
  for (const auto& n : g.nodes) {
    if (!is_identifier(n.id))
      out.push_back({"bad-id", n.id, "node id must match [A-Za-z][A-Za-z0-9_]*"});
    if (!seen.insert(n.id).second) out.push_back({"duplicate-id", n.id, "node id declared twice"});
    if (auto p = label_problem(n.label)) out.push_back({"bad-label", n.id, *p});
  }

  std::unordered_map<std::string, std::size_t> indeg, outdeg;
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const std::string name = e.src + "->" + e.dst;
    const FlowNode* src = g.find(e.src);
    if (!src) out.push_back({"unknown-node", e.src, "edge " + name + " has unknown source"});
    if (!g.find(e.dst)) out.push_back({"unknown-node", e.dst, "edge " + name + " has unknown target"});
    if (e.label) {
      if (src && src->shape != NodeShape::Decision)
        out.push_back({"label-on-non-decision", name, "only Decision nodes may have labeled edges"});
      if (auto p = label_problem(*e.label)) out.push_back({"bad-label", name, *p});
    }
    if (!triples.emplace(e.src, e.dst, e.label.value_or("")).second)
      out.push_back({"duplicate-edge", name, "duplicate (src, dst, label) edge"});
    ++outdeg[e.src];
    ++indeg[e.dst];
  }

  std::vector<const FlowNode*> starts;
  bool has_end = false;
  for (const auto& n : g.nodes) {
    if (n.shape != NodeShape::Terminal) continue;
    if (indeg[n.id] == 0)
      starts.push_back(&n);
    else if (outdeg[n.id] == 0)
      has_end = true;
  }
  if (starts.empty())
    out.push_back({"no-start-terminal", "", "no Terminal node without incoming edges"});
  else if (starts.size() > 1)
    for (std::size_t i = 1; i < starts.size(); ++i)
      out.push_back({"multiple-start-terminals", starts[i]->id, "second Terminal node without incoming edges"});
  if (!has_end) out.push_back({"no-end-terminal", "", "no end terminal reachable"});

  for (const auto& n : g.nodes) {
    if (n.shape != NodeShape::Decision) continue;
    std::vector<const FlowEdge*> branches;
    for (const auto& e : g.edges)
      if (e.src == n.id) branches.push_back(&e);
    if (branches.size() < 2)
      out.push_back({"decision-branches", n.id, "Decision node needs at least 2 outgoing edges"});
    std::set<std::string> labels;
    for (const auto* e : branches) {
      if (!e->label)
        out.push_back({"unlabeled-branch", n.id, "branch to " + e->dst + " has no label"});
      else if (!labels.insert(*e->label).second)
        out.push_back({"duplicate-branch-label", n.id, "branch label '" + *e->label + "' repeated"});
    }
  }

  if (starts.size() == 1) {
    std::unordered_set<std::string> reached{starts.front()->id};
    std::deque<std::string> queue{starts.front()->id};
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      for (const auto& e : g.edges)
        if (e.src == cur && reached.insert(e.dst).second) queue.push_back(e.dst);
    }
    for (const auto& n : g.nodes)
      if (!reached.count(n.id))
        out.push_back({"unreachable-node", n.id, "node is not reachable from the start terminal"});
  }
}

void check_sequence(const SequenceDiagram& d, std::vector<Violation>& out) {
  std::unordered_set<std::string> seen;
  for (const auto& p : d.participants) {
    if (!is_identifier(p.id))
      out.push_back({"bad-id", p.id, "participant id must match [A-Za-z][A-Za-z0-9_]*"});
    if (!seen.insert(p.id).second) out.push_back({"duplicate-id", p.id, "participant declared twice"});
    if (auto pr = label_problem(p.display_name)) out.push_back({"bad-label", p.id, *pr});
  }
  if (d.participants.size() < 2)
    out.push_back({"too-few-participants", "", "sequence diagram needs at least 2 participants"});
  if (d.messages.empty()) out.push_back({"no-messages", "", "sequence diagram has no messages"});

  std::unordered_set<std::string> active;
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    const auto& m = d.messages[i];
    const std::string name = "message " + std::to_string(i);
    if (!seen.count(m.from)) out.push_back({"unknown-participant", m.from, name + " sender is not a participant"});
    if (m.to != m.from && !seen.count(m.to))
      out.push_back({"unknown-participant", m.to, name + " receiver is not a participant"});
    if (m.seq_index != i)
      out.push_back({"seq-index", std::to_string(m.seq_index), name + " has seq_index " +
                                                                  std::to_string(m.seq_index)});
    if (auto p = label_problem(m.label)) out.push_back({"bad-label", name, *p});
    active.insert(m.from);
    active.insert(m.to);
  }
  for (const auto& p : d.participants)
    if (!active.count(p.id))
      out.push_back({"idle-participant", p.id, "participant neither sends nor receives a message"});
}

}  // namespace

std::vector<Violation> validate(const DiagramAst& ast) {
  std::vector<Violation> out;
  if (const auto* g = ast.flowchart())
    check_flowchart(*g, out);
  else
    check_sequence(*ast.sequence(), out);
  return out;
}

void require_valid(const DiagramAst& ast) {
  auto v = validate(ast);
  if (v.empty()) return;
  std::string msg = "invalid diagram '" + ast.diagram_id + "':";
  for (const auto& x : v) msg += "\n  " + x.to_string();
  throw Error(msg);
}

std::size_t OracleFacts::message_count_at(const std::string& participant) const {
  auto it = messages_of.find(participant);
  return it == messages_of.end() ? 0 : it->second.size();
}

std::optional<std::string> OracleFacts::branch_target(const std::string& decision,
                                                      const std::string& label) const {
  auto it = branch_targets.find(decision);
  if (it == branch_targets.end()) return std::nullopt;
  auto jt = it->second.find(label);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

OracleFacts graph_oracle(const DiagramAst& ast) {
  require_valid(ast);
  OracleFacts f;
  if (const auto* g = ast.flowchart()) {
    for (const auto& n : g->nodes) {
      f.successors[n.id];
      f.predecessors[n.id];
    }
    for (const auto& e : g->edges) {
      f.successors[e.src].push_back(e.dst);
      f.predecessors[e.dst].push_back(e.src);
      if (e.label) f.branch_targets[e.src][*e.label] = e.dst;
    }
    for (const auto& n : g->nodes) {
      if (n.shape != NodeShape::Terminal) continue;
      if (f.predecessors[n.id].empty())
        f.start = n.id;
      else if (f.successors[n.id].empty())
        f.ends.push_back(n.id);
    }
  } else {
    const auto& d = *ast.sequence();
    for (const auto& p : d.participants) {
      f.sent[p.id] = 0;
      f.received[p.id] = 0;
      f.messages_of[p.id];
    }
    for (const auto& m : d.messages) {
      ++f.sent[m.from];
      ++f.received[m.to];
      f.messages_of[m.from].push_back(m.seq_index);
      if (!m.is_self()) f.messages_of[m.to].push_back(m.seq_index);
    }
  }
  return f;
}

std::string_view to_string(NodeShape s) {
  switch (s) {
    case NodeShape::Terminal: return "terminal";
    case NodeShape::Process: return "process";
    case NodeShape::Decision: return "decision";
  }
  return "?";
}

std::string_view to_string(DiagramKind k) {
  return k == DiagramKind::Flowchart ? "flowchart" : "sequence";
}

}  // namespace diagcap
