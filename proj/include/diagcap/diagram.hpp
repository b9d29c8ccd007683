#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace diagcap {

/// Raised for contract violations (invalid ASTs, impossible configs, bad
/// inputs). Validation findings are returned as data, not thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeShape { Terminal, Process, Decision };

struct FlowNode {
  std::string id;
  std::string label;
  NodeShape shape = NodeShape::Process;

  bool operator==(const FlowNode&) const = default;
};

struct FlowEdge {
  std::string src;
  std::string dst;
  std::optional<std::string> label;  // branch condition; Decision sources only

  bool operator==(const FlowEdge&) const = default;
};

enum class Direction { TopDown, LeftRight };

struct FlowchartGraph {
  Direction direction = Direction::TopDown;
  std::vector<FlowNode> nodes;
  std::vector<FlowEdge> edges;

  const FlowNode* find(std::string_view id) const;

  bool operator==(const FlowchartGraph&) const = default;
};

struct Participant {
  std::string id;
  std::string display_name;

  bool operator==(const Participant&) const = default;
};

enum class Arrow { Solid, Dashed };

struct Message {
  std::string from;
  std::string to;
  std::string label;
  Arrow arrow = Arrow::Solid;
  std::size_t seq_index = 0;

  bool is_self() const { return from == to; }
  bool operator==(const Message&) const = default;
};

struct SequenceDiagram {
  std::vector<Participant> participants;
  std::vector<Message> messages;

  const Participant* find(std::string_view id) const;
  /// Declaration-order index of a participant, or -1.
  int column(std::string_view id) const;

  bool operator==(const SequenceDiagram&) const = default;
};

enum class DiagramKind { Flowchart, Sequence };

struct DiagramAst {
  std::string diagram_id;
  std::variant<FlowchartGraph, SequenceDiagram> body;

  DiagramKind kind() const {
    return std::holds_alternative<FlowchartGraph>(body) ? DiagramKind::Flowchart
                                                        : DiagramKind::Sequence;
  }
  const FlowchartGraph* flowchart() const { return std::get_if<FlowchartGraph>(&body); }
  const SequenceDiagram* sequence() const { return std::get_if<SequenceDiagram>(&body); }

  bool operator==(const DiagramAst&) const = default;
};

/// Equality of the diagram content, ignoring diagram_id.
bool structurally_equal(const DiagramAst& a, const DiagramAst& b);

struct Violation {
  std::string rule;     // short invariant name, e.g. "no-end-terminal"
  std::string element;  // offending element id (node, edge, participant, message)
  std::string message;  // human-readable description

  std::string to_string() const;
  bool operator==(const Violation&) const = default;
};

bool is_identifier(std::string_view s);

/// Label character rule shared by node, edge, participant, and message
/// labels: non-empty, single line, no bracket/pipe characters, no
/// surrounding whitespace. Returns the problem, or nullopt if acceptable.
std::optional<std::string> label_problem(std::string_view label);

/// Checks every structural invariant. Empty result means the AST is valid.
/// Order of findings is deterministic (declaration order of elements).
std::vector<Violation> validate(const DiagramAst& ast);

/// Throws Error listing the violations if the AST is invalid.
void require_valid(const DiagramAst& ast);

/// Ground-truth facts about a diagram, extracted by exhaustive traversal.
struct OracleFacts {
  // flowchart
  std::string start;
  std::vector<std::string> ends;
  std::map<std::string, std::vector<std::string>> successors;    // edge order, multiset
  std::map<std::string, std::vector<std::string>> predecessors;  // edge order, multiset
  std::map<std::string, std::map<std::string, std::string>> branch_targets;  // decision -> label -> dst
  // sequence
  std::map<std::string, std::size_t> sent;
  std::map<std::string, std::size_t> received;
  std::map<std::string, std::vector<std::size_t>> messages_of;  // seq indices touching participant

  /// Sent plus received; a self-message counts once.
  std::size_t message_count_at(const std::string& participant) const;
  std::optional<std::string> branch_target(const std::string& decision,
                                           const std::string& label) const;
};

OracleFacts graph_oracle(const DiagramAst& ast);

std::string_view to_string(NodeShape s);
std::string_view to_string(DiagramKind k);

}  // namespace diagcap
