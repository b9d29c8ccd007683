#include "diagcap/mermaid.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string_view>
#include <unordered_map>

namespace diagcap::mermaid {

std::string Diagnostic::to_string() const {
  return std::to_string(line) + ":" + std::to_string(column) + ": " +
         (severity == Severity::Error ? "error: " : "warning: ") + message;
}

namespace {

constexpr std::array kFlowchartKeywords{"subgraph", "end",   "classDef", "class",
                                        "style",    "click", "linkStyle", "direction"};
constexpr std::array kSequenceKeywords{"Note",     "note",     "loop",  "alt",  "else",   "opt",
                                       "par",      "and",      "rect",  "critical", "break", "activate",
                                       "deactivate", "autonumber", "title", "box", "end", "actor",
                                       "create",   "destroy",  "link",  "links"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }
bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }
bool is_ident_char(char c) { return is_alpha(c) || (c >= '0' && c <= '9') || c == '_'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <std::size_t N>
bool contains(const std::array<const char*, N>& words, std::string_view w) {
  return std::any_of(words.begin(), words.end(), [&](const char* k) { return w == k; });
}

/// Cursor over one source line; positions are byte offsets into the line.
class LineCursor {
 public:
  explicit LineCursor(std::string_view line) : line_(line) {}

  void skip_space() {
    while (pos_ < line_.size() && is_space(line_[pos_])) ++pos_;
  }
  bool at_end() const { return pos_ >= line_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < line_.size() ? line_[pos_ + ahead] : '\0';
  }
  bool starts_with(std::string_view s) const { return line_.substr(pos_).starts_with(s); }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ = std::min(line_.size(), pos_ + n); }
  std::string_view rest() const { return line_.substr(pos_); }

  std::string_view identifier() {
    std::size_t start = pos_;
    if (!is_alpha(peek())) return {};
    while (pos_ < line_.size() && is_ident_char(line_[pos_])) ++pos_;
    return line_.substr(start, pos_ - start);
  }

  /// Reads up to (not including) `close`, consuming the terminator.
  std::optional<std::string_view> until(std::string_view close) {
    auto found = line_.find(close, pos_);
    if (found == std::string_view::npos) return std::nullopt;
    auto body = line_.substr(pos_, found - pos_);
    pos_ = found + close.size();
    return body;
  }

 private:
  std::string_view line_;
  std::size_t pos_ = 0;
};

struct NodeRef {
  std::string id;
  std::size_t id_pos = 0;
  std::optional<FlowNode> decl;
};

class Parser {
 public:
  Parser(const Source& src, std::string diagram_id) : src_(src), diagram_id_(std::move(diagram_id)) {}

  ParseResult run() {
    split_lines();
    ParseResult result;
    std::size_t i = 0;
    while (i < lines_.size() && is_blank_or_comment(lines_[i])) ++i;
    if (i == lines_.size()) {
      error(0, 0, "empty source: expected 'flowchart TD|LR' or 'sequenceDiagram' header");
      result.diagnostics = std::move(diags_);
      return result;
    }
    auto kind = parse_header(i);
    if (!kind) {
      result.diagnostics = std::move(diags_);
      return result;
    }
    for (std::size_t j = i + 1; j < lines_.size(); ++j) {
      if (is_blank_or_comment(lines_[j])) continue;
      if (*kind == DiagramKind::Flowchart)
        flowchart_statement(j);
      else
        sequence_statement(j);
    }
    if (has_error()) {
      result.diagnostics = std::move(diags_);
      return result;
    }

    DiagramAst ast;
    ast.diagram_id = diagram_id_;
    if (*kind == DiagramKind::Flowchart)
      ast.body = std::move(flow_);
    else
      ast.body = std::move(seq_);
    for (const auto& v : validate(ast)) {
      auto where = positions_.find(v.element);
      if (where != positions_.end())
        error(where->second.first, where->second.second, v.to_string());
      else
        error(header_line_, 0, v.to_string());
    }
    if (!has_error()) result.ast = std::move(ast);
    result.diagnostics = std::move(diags_);
    return result;
  }

 private:
  void split_lines() {
    std::string_view text = src_.text;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) {
        lines_.push_back(text.substr(start));
        break;
      }
      lines_.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }

  static bool is_blank_or_comment(std::string_view line) {
    auto t = trim(line);
    return t.empty() || t.starts_with("%%");
  }

  void diag(std::size_t line, std::size_t pos, std::string msg, Severity sev) {
    // Clamp to a byte that exists on the line.
    std::size_t len = line < lines_.size() ? lines_[line].size() : 0;
    std::size_t col = len == 0 ? 0 : std::min(pos, len - 1);
    diags_.push_back({static_cast<int>(line + 1), static_cast<int>(col + 1), std::move(msg), sev});
  }
  void error(std::size_t line, std::size_t pos, std::string msg) {
    diag(line, pos, std::move(msg), Severity::Error);
  }
  bool has_error() const {
    return std::any_of(diags_.begin(), diags_.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
  }

  std::optional<DiagramKind> parse_header(std::size_t li) {
    header_line_ = li;
    LineCursor cur(lines_[li]);
    cur.skip_space();
    std::size_t word_pos = cur.pos();
    auto word = cur.identifier();
    std::optional<DiagramKind> kind;
    if (word == "flowchart") {
      cur.skip_space();
      std::size_t dir_pos = cur.pos();
      auto dir = cur.identifier();
      if (dir == "TD") {
        flow_.direction = Direction::TopDown;
      } else if (dir == "LR") {
        flow_.direction = Direction::LeftRight;
      } else {
        error(li, dir_pos, "unsupported flowchart direction '" + std::string(dir) + "' (expected TD or LR)");
        return std::nullopt;
      }
      kind = DiagramKind::Flowchart;
    } else if (word == "sequenceDiagram") {
      kind = DiagramKind::Sequence;
    } else {
      std::string shown = word.empty() ? std::string(trim(lines_[li]).substr(0, 20)) : std::string(word);
      error(li, word_pos, "unknown header '" + shown + "' (expected 'flowchart TD|LR' or 'sequenceDiagram')");
      return std::nullopt;
    }
    cur.skip_space();
    if (!cur.at_end()) {
      error(li, cur.pos(), "unexpected text after header");
      return std::nullopt;
    }
    if (src_.kind_hint && *src_.kind_hint != *kind) {
      error(li, word_pos, std::string("expected a ") + std::string(to_string(*src_.kind_hint)) + " diagram");
      return std::nullopt;
    }
    return kind;
  }

  /// Consumes an optional trailing ';' and requires end of line.
  bool finish_statement(std::size_t li, LineCursor& cur, std::string_view what) {
    cur.skip_space();
    if (cur.peek() == ';') {
      diag(li, cur.pos(), "statement terminator ';' ignored", Severity::Warning);
      cur.advance(1);
      cur.skip_space();
    }
    if (cur.at_end()) return true;
    error(li, cur.pos(), "unexpected text after " + std::string(what));
    return false;
  }

  // -- flowchart ----------------------------------------------------------

  std::optional<NodeRef> node_ref(std::size_t li, LineCursor& cur) {
    cur.skip_space();
    NodeRef ref;
    ref.id_pos = cur.pos();
    auto id = cur.identifier();
    if (id.empty()) {
      error(li, cur.pos(), "expected node identifier");
      return std::nullopt;
    }
    ref.id = std::string(id);

    NodeShape shape;
    std::string_view close;
    if (cur.starts_with("([")) {
      shape = NodeShape::Terminal;
      close = "])";
      cur.advance(2);
    } else if (cur.peek() == '[') {
      shape = NodeShape::Process;
      close = "]";
      cur.advance(1);
    } else if (cur.peek() == '{') {
      shape = NodeShape::Decision;
      close = "}";
      cur.advance(1);
    } else if (cur.peek() == '(' || cur.peek() == '>') {
      error(li, cur.pos(), "unsupported node shape");
      return std::nullopt;
    } else {
      return ref;
    }
    std::size_t label_pos = cur.pos();
    auto body = cur.until(close);
    if (!body) {
      error(li, label_pos, "unterminated node label (missing '" + std::string(close) + "')");
      return std::nullopt;
    }
    auto label = trim(*body);
    if (auto problem = label_problem(label)) {
      error(li, label_pos, *problem);
      return std::nullopt;
    }
    ref.decl = FlowNode{ref.id, std::string(label), shape};
    return ref;
  }

  bool declare_node(std::size_t li, const NodeRef& ref) {
    if (flow_.find(ref.id)) {
      error(li, ref.id_pos, "duplicate node id '" + ref.id + "'");
      return false;
    }
    flow_.nodes.push_back(*ref.decl);
    positions_[ref.id] = {li, ref.id_pos};
    return true;
  }

  bool use_node(std::size_t li, const NodeRef& ref) {
    if (ref.decl) return declare_node(li, ref);
    if (!flow_.find(ref.id)) {
      error(li, ref.id_pos, "undeclared node '" + ref.id + "'");
      return false;
    }
    return true;
  }

  void flowchart_statement(std::size_t li) {
    LineCursor cur(lines_[li]);
    auto first = node_ref(li, cur);
    if (!first) return;
    cur.skip_space();

    if (cur.at_end() || cur.peek() == ';') {
      if (!first->decl) {
        if (contains(kFlowchartKeywords, first->id))
          error(li, first->id_pos, "unsupported Mermaid feature '" + first->id + "'");
        else
          error(li, cur.pos(), "expected node shape or '-->' after '" + first->id + "'");
        return;
      }
      if (finish_statement(li, cur, "node declaration")) declare_node(li, *first);
      return;
    }

    std::size_t arrow_pos = cur.pos();
    if (!cur.starts_with("-->") || cur.peek(3) == '>' || cur.peek(3) == '-') {
      if (!first->decl && contains(kFlowchartKeywords, first->id))
        error(li, first->id_pos, "unsupported Mermaid feature '" + first->id + "'");
      else if (cur.peek() == '-' || cur.peek() == '=' || cur.peek() == '.' || cur.peek() == '<')
        error(li, arrow_pos, "malformed arrow (expected '-->')");
      else
        error(li, arrow_pos, "expected '-->' or end of statement");
      return;
    }
    cur.advance(3);
    cur.skip_space();

    std::optional<std::string> edge_label;
    if (cur.peek() == '|') {
      cur.advance(1);
      std::size_t label_pos = cur.pos();
      auto body = cur.until("|");
      if (!body) {
        error(li, label_pos, "unterminated edge label (missing '|')");
        return;
      }
      auto label = trim(*body);
      if (auto problem = label_problem(label)) {
        error(li, label_pos, *problem);
        return;
      }
      edge_label = std::string(label);
    }

    auto second = node_ref(li, cur);
    if (!second) return;
    cur.skip_space();
    if (cur.starts_with("-->")) {
      error(li, cur.pos(), "chained edges are not supported; write one edge per line");
      return;
    }
    if (!finish_statement(li, cur, "edge")) return;
    if (!use_node(li, *first) || !use_node(li, *second)) return;

    FlowEdge edge{first->id, second->id, edge_label};
    std::string name = edge.src + "->" + edge.dst;
    positions_.emplace(name, std::pair{li, first->id_pos});
    flow_.edges.push_back(std::move(edge));
  }

  // -- sequence -----------------------------------------------------------

  void add_participant(std::size_t li, std::size_t pos, std::string id, std::string name) {
    positions_[id] = {li, pos};
    seq_.participants.push_back({std::move(id), std::move(name)});
  }

  void sequence_statement(std::size_t li) {
    LineCursor cur(lines_[li]);
    cur.skip_space();
    std::size_t first_pos = cur.pos();
    auto first = cur.identifier();
    if (first.empty()) {
      error(li, first_pos, "expected participant declaration or message");
      return;
    }

    if (first == "participant" && (is_space(cur.peek()) || cur.at_end())) {
      cur.skip_space();
      std::size_t id_pos = cur.pos();
      auto id = cur.identifier();
      if (id.empty()) {
        error(li, id_pos, "expected participant identifier");
        return;
      }
      std::string name(id);
      cur.skip_space();
      if (cur.starts_with("as") && (is_space(cur.peek(2)) || cur.peek(2) == '\0')) {
        cur.advance(2);
        cur.skip_space();
        std::size_t name_pos = cur.pos();
        auto display = trim(cur.rest());
        if (auto problem = label_problem(display)) {
          error(li, name_pos, *problem);
          return;
        }
        name = std::string(display);
        cur.advance(cur.rest().size());
      }
      if (!finish_statement(li, cur, "participant declaration")) return;
      if (seq_.find(id)) {
        bool implicit = declared_implicitly_.count(std::string(id)) > 0;
        error(li, id_pos, implicit ? "participant '" + std::string(id) + "' declared after first use"
                                   : "duplicate participant id '" + std::string(id) + "'");
        return;
      }
      add_participant(li, id_pos, std::string(id), std::move(name));
      return;
    }

    cur.skip_space();
    std::size_t arrow_pos = cur.pos();
    Arrow arrow;
    if (cur.starts_with("-->>")) {
      arrow = Arrow::Dashed;
      cur.advance(4);
    } else if (cur.starts_with("->>")) {
      arrow = Arrow::Solid;
      cur.advance(3);
    } else {
      if (contains(kSequenceKeywords, first) || first == "participant")
        error(li, first_pos, "unsupported Mermaid feature '" + std::string(first) + "'");
      else if (cur.peek() == '-' || cur.peek() == '<' || cur.peek() == '=')
        error(li, arrow_pos, "malformed arrow (expected '->>' or '-->>')");
      else
        error(li, arrow_pos, "expected message arrow '->>' or '-->>'");
      return;
    }
    if (cur.peek() == '+' || cur.peek() == '-') {
      error(li, cur.pos(), "activation shorthand is not supported");
      return;
    }
    cur.skip_space();
    std::size_t to_pos = cur.pos();
    auto to = cur.identifier();
    if (to.empty()) {
      error(li, to_pos, "expected receiving participant");
      return;
    }
    cur.skip_space();
    if (cur.peek() != ':') {
      error(li, cur.pos(), "expected ':' before message label");
      return;
    }
    cur.advance(1);
    std::size_t label_pos = cur.pos();
    auto label = trim(cur.rest());
    if (auto problem = label_problem(label)) {
      error(li, label_pos, *problem);
      return;
    }

    for (auto [pid, pos] : {std::pair{first, first_pos}, std::pair{to, to_pos}}) {
      if (!seq_.find(pid)) {
        declared_implicitly_.insert(std::string(pid));
        add_participant(li, pos, std::string(pid), std::string(pid));
      }
    }
    std::size_t index = seq_.messages.size();
    positions_.emplace("message " + std::to_string(index), std::pair{li, first_pos});
    seq_.messages.push_back({std::string(first), std::string(to), std::string(label), arrow, index});
  }

  const Source& src_;
  std::string diagram_id_;
  std::vector<std::string_view> lines_;
  std::vector<Diagnostic> diags_;
  std::size_t header_line_ = 0;
  FlowchartGraph flow_;
  SequenceDiagram seq_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> positions_;
  std::set<std::string> declared_implicitly_;
};

}  // namespace

ParseResult parse(const Source& src, std::string diagram_id) {
  return Parser(src, std::move(diagram_id)).run();
}

std::string serialize(const DiagramAst& ast) {
  require_valid(ast);
  std::string out;
  if (const auto* g = ast.flowchart()) {
    out += g->direction == Direction::TopDown ? "flowchart TD\n" : "flowchart LR\n";
    for (const auto& n : g->nodes) {
      out += "  " + n.id;
      switch (n.shape) {
        case NodeShape::Terminal: out += "([" + n.label + "])\n"; break;
        case NodeShape::Process: out += "[" + n.label + "]\n"; break;
        case NodeShape::Decision: out += "{" + n.label + "}\n"; break;
      }
    }
    for (const auto& e : g->edges) {
      out += "  " + e.src + " -->";
      if (e.label) out += "|" + *e.label + "|";
      out += " " + e.dst + "\n";
    }
  } else {
    const auto& d = *ast.sequence();
    out += "sequenceDiagram\n";
    for (const auto& p : d.participants) out += "  participant " + p.id + " as " + p.display_name + "\n";
    for (const auto& m : d.messages)
      out += "  " + m.from + (m.arrow == Arrow::Solid ? "->>" : "-->>") + m.to + ": " + m.label + "\n";
  }
  return out;
}

}  // namespace diagcap::mermaid
