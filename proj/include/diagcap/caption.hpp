#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diagcap/diagram.hpp"

namespace diagcap::caption {

/// Template set for one caption style. Placeholders in braces are
/// substituted verbatim: {k} step number, {j} target step, {label},
/// {branch}, {from}, {to}.
struct CaptionStyle {
  std::string id;
  // flowchart rules
  std::string flowchart_title;
  std::string step;           // "Step {k}: " prefix
  std::string start;          // start terminal body
  std::string end;            // end terminal body
  std::string process;        // process (and mid-chart terminal) body
  std::string decision;       // decision body, before the branch clauses
  std::string first_branch;   // first branch clause
  std::string other_branch;   // later branch clauses, appended with branch_separator
  std::string branch_separator;
  std::string jump;           // non-decision node whose successor is not the next step
  std::string jump_more;      // each further successor of such a node
  std::string dead_end;       // non-terminal node without successors
  std::string sentence_end;
  // sequence rules
  std::string sequence_title;
  std::string message;
  std::string self_message;
  std::string dashed_suffix;
};

/// The only built-in style, "ict-default".
const CaptionStyle& ict_default();

struct CaptionDoc {
  std::string diagram_id;
  std::string title_line;
  std::vector<std::string> steps;
  std::string full_text;  // title_line + "\n" + steps joined by "\n"
};

/// Node ids of a flowchart in step order: depth-first preorder from the
/// start terminal, successors visited in edge declaration order.
std::vector<std::string> step_order(const FlowchartGraph& graph);

/// Deterministic caption. Throws Error on an invalid AST.
CaptionDoc caption(const DiagramAst& ast, const CaptionStyle& style = ict_default());

struct StepReference {
  std::optional<std::string> branch;  // set for decision clauses
  int target = 0;
};

struct StepSkeleton {
  int number = 0;
  std::string body;  // text after the "Step k: " prefix
  std::vector<StepReference> references;
};

struct CaptionSkeleton {
  std::optional<DiagramKind> kind;  // from the title line, if recognized
  std::vector<StepSkeleton> steps;
  std::vector<std::string> unrecognized;
};

/// Best-effort structural parse of caption text; never throws.
CaptionSkeleton parse_caption(std::string_view text, const CaptionStyle& style = ict_default());

}  // namespace diagcap::caption
