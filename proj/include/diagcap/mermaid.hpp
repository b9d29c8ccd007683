#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diagcap/diagram.hpp"

namespace diagcap::mermaid {

struct Source {
  std::string text;
  std::optional<DiagramKind> kind_hint;
};

enum class Severity { Error, Warning };

struct Diagnostic {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  std::string message;
  Severity severity = Severity::Error;

  std::string to_string() const;
};

struct ParseResult {
  std::optional<DiagramAst> ast;
  std::vector<Diagnostic> diagnostics;  // warnings may accompany a successful parse

  bool ok() const { return ast.has_value(); }
};

/// Parses the supported Mermaid subset:
///
///   flowchart TD|LR
///     A([Terminal label])
///     B[Process label]
///     C{Decision label}
///     A --> B
///     C -->|Yes| D
///
///   sequenceDiagram
///     participant UE as User Equipment
///     UE->>eNB: Attach Request
///     eNB-->>UE: Attach Accept
///
/// Lines starting with %% are comments. Flowchart statements may end with ';'.
/// Flowchart edges may declare nodes inline (`A[x] --> B[y]`); sequence
/// participants are declared implicitly by first use. The returned AST
/// always passes validate().
ParseResult parse(const Source& src, std::string diagram_id = {});

/// Canonical text: header, then one two-space-indented statement per line,
/// nodes (or participants) before edges (or messages), LF endings.
/// Throws Error on an invalid AST.
std::string serialize(const DiagramAst& ast);

}  // namespace diagcap::mermaid
