#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "diagcap/caption.hpp"
#include "diagcap/mermaid.hpp"
#include "oracles.hpp"

using namespace diagcap;

namespace {

DiagramAst parse(const std::string& text) {
  auto r = mermaid::parse({text, std::nullopt}, "c");
  REQUIRE(r.ok());
  return *r.ast;
}

/// Own preorder DFS from the start terminal, successors in edge order.
std::vector<std::string> dfs_order(const FlowchartGraph& g) {
  std::map<std::string, int> indeg;
  for (const auto& e : g.edges) ++indeg[e.dst];
  std::string start;
  for (const auto& n : g.nodes)
    if (n.shape == NodeShape::Terminal && indeg[n.id] == 0) start = n.id;
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (!seen.insert(id).second) return;
    out.push_back(id);
    for (const auto& e : g.edges)
      if (e.src == id) visit(e.dst);
  };
  visit(start);
  return out;
}

/// Structure with node ids replaced by step positions, so that two graphs
/// compare equal exactly when they describe the same chart.
std::string canonical(const DiagramAst& ast) {
  if (!ast.flowchart()) return mermaid::serialize(ast);
  const auto& g = *ast.flowchart();
  const auto order = dfs_order(g);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::string out;
  for (const auto& id : order) {
    const auto* n = g.find(id);
    out += std::to_string(static_cast<int>(n->shape)) + "|" + n->label + "|";
    for (const auto& e : g.edges)
      if (e.src == id) out += std::to_string(pos[e.dst]) + ":" + e.label.value_or("") + ",";
    out += "\n";
  }
  return out;
}

void check_cross_references(const DiagramAst& ast) {
  const auto& g = *ast.flowchart();
  const auto doc = caption::caption(ast);
  const auto sk = caption::parse_caption(doc.full_text);
  const auto order = dfs_order(g);
  REQUIRE(order == caption::step_order(g));
  REQUIRE(sk.steps.size() == order.size());
  std::map<std::string, int> step_of;
  for (std::size_t i = 0; i < order.size(); ++i) step_of[order[i]] = static_cast<int>(i + 1);

  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& step = sk.steps[i];
    CHECK(step.number == static_cast<int>(i + 1));
    const auto* node = g.find(order[i]);
    std::vector<const FlowEdge*> out;
    for (const auto& e : g.edges)
      if (e.src == node->id) out.push_back(&e);

    for (const auto& r : step.references) {
      REQUIRE(r.target >= 1);
      REQUIRE(r.target <= static_cast<int>(order.size()));
    }
    if (node->shape == NodeShape::Decision) {
      REQUIRE(step.references.size() == out.size());
      for (std::size_t b = 0; b < out.size(); ++b) {
        CHECK(step.references[b].branch == out[b]->label);
        CHECK(order[step.references[b].target - 1] == out[b]->dst);
      }
    } else if (out.size() == 1 && i + 1 < order.size() && out[0]->dst == order[i + 1]) {
      CHECK(step.references.empty());
    } else {
      REQUIRE(step.references.size() == out.size());
      for (std::size_t b = 0; b < out.size(); ++b) CHECK(order[step.references[b].target - 1] == out[b]->dst);
    }
  }
}

}  // namespace

TEST_CASE("three-step chain") {
  const auto ast = parse("flowchart TD\nS([Start]) --> A[Do X]\nA --> E([Done])\n");
  const auto doc = caption::caption(ast);
  REQUIRE(doc.steps.size() == 3);
  CHECK(doc.steps[0] == "Step 1: Start (Start).");
  CHECK(doc.steps[1] == "Step 2: Do X.");
  CHECK(doc.steps[2] == "Step 3: End (Done).");
  CHECK(doc.title_line == "This flowchart describes the following procedure:");
  CHECK(doc.full_text == doc.title_line + "\n" + doc.steps[0] + "\n" + doc.steps[1] + "\n" + doc.steps[2]);
  CHECK(doc.diagram_id == "c");
}

TEST_CASE("merge line into step 2") {
  const auto ast = parse(
      "flowchart TD\n"
      "S([Begin]) --> A[Send probe]\n"
      "A --> C{Reply received?}\n"
      "C -->|Yes| E([Done])\n"
      "C -->|No| A\n");
  const auto doc = caption::caption(ast);
  REQUIRE(doc.steps.size() == 4);
  CHECK(doc.steps[2] == "Step 3: Check Reply received?. If Yes, go to Step 4; if No, go to Step 2.");
  CHECK(doc.full_text.find("go to Step 2") != std::string::npos);
  check_cross_references(ast);
}

TEST_CASE("jumps name every successor that is not the next step") {
  const auto ast = parse(
      "flowchart TD\n"
      "S([Begin]) --> C{Link up?}\n"
      "C -->|Yes| A[Send data]\n"
      "C -->|No| B[Reset port]\n"
      "A --> E([Done])\n"
      "B --> E\n");
  const auto doc = caption::caption(ast);
  REQUIRE(doc.steps.size() == 5);
  CHECK(doc.steps[1] == "Step 2: Check Link up?. If Yes, go to Step 3; if No, go to Step 5.");
  CHECK(doc.steps[2] == "Step 3: Send data.");
  CHECK(doc.steps[3] == "Step 4: End (Done).");
  CHECK(doc.steps[4] == "Step 5: Reset port, then go to Step 4.");
}

TEST_CASE("sequence captions") {
  const auto ast = parse(
      "sequenceDiagram\n"
      "UE->>eNB: Attach Request\n"
      "eNB-->>UE: Attach Accept\n"
      "eNB->>eNB: Admission control\n");
  const auto doc = caption::caption(ast);
  CHECK(doc.title_line == "This signal diagram describes the following message flow:");
  REQUIRE(doc.steps.size() == 3);
  CHECK(doc.steps[0] == "Step 1: UE sends 'Attach Request' to eNB.");
  CHECK(doc.steps[1] == "Step 2: eNB sends 'Attach Accept' to UE (dashed response).");
  CHECK(doc.steps[2] == "Step 3: eNB performs 'Admission control' internally.");

  const auto named = parse("sequenceDiagram\nparticipant UE as User Equipment\nparticipant MME\nUE->>MME: Attach\n");
  CHECK(caption::caption(named).steps[0] == "Step 1: User Equipment sends 'Attach' to MME.");
}

TEST_CASE("caption rejects invalid ASTs") {
  FlowchartGraph g;
  CHECK_THROWS_AS(caption::caption({"x", g}), Error);
}

TEST_CASE("parse_caption basics") {
  CHECK(caption::parse_caption("").steps.empty());
  CHECK_FALSE(caption::parse_caption("").kind);

  const auto ast = oracle::sample_diagram(3, 0);
  const auto doc = caption::caption(ast);
  const auto sk = caption::parse_caption(doc.full_text);
  CHECK(sk.kind == DiagramKind::Flowchart);
  CHECK(sk.unrecognized.empty());
  CHECK(sk.steps.size() == ast.flowchart()->nodes.size());

  auto lines = doc.steps;
  lines.erase(lines.begin() + 1);
  std::string cut = doc.title_line;
  for (const auto& l : lines) cut += "\n" + l;
  CHECK(caption::parse_caption(cut).steps.size() == doc.steps.size() - 1);

  const auto noisy = caption::parse_caption("hello\nStep 1: Do it.\nStep x: nope\n");
  CHECK(noisy.steps.size() == 1);
  CHECK(noisy.unrecognized.size() == 2);
}

TEST_CASE("faithfulness and cross-reference soundness over generated diagrams") {
  for (std::size_t i = 0; i < 400; ++i) {
    const auto ast = oracle::sample_diagram(41, i);
    const auto doc = caption::caption(ast);
    for (const auto& label : oracle::ast_labels(ast)) CHECK_MESSAGE(doc.full_text.find(label) != std::string::npos, label);
    std::string joined = doc.title_line;
    for (const auto& s : doc.steps) joined += "\n" + s;
    CHECK(joined == doc.full_text);
    if (ast.flowchart()) {
      check_cross_references(ast);
    } else {
      const auto sk = caption::parse_caption(doc.full_text);
      CHECK(sk.steps.size() == ast.sequence()->messages.size());
      CHECK(sk.kind == DiagramKind::Sequence);
    }
  }
}

TEST_CASE("caption is injective on structure (mutation)") {
  Rng rng(1234);
  int compared = 0;
  for (std::size_t i = 0; i < 240; ++i) {
    const auto ast = oracle::sample_diagram(51, i);
    const auto text = caption::caption(ast).full_text;
    for (int m = 0; m < 6; ++m) {
      DiagramAst mut = ast;
      if (auto* g = std::get_if<FlowchartGraph>(&mut.body)) {
        switch (rng.index(4)) {
          case 0: g->nodes[rng.index(g->nodes.size())].label += " now"; break;
          case 1: {
            auto& e = g->edges[rng.index(g->edges.size())];
            e.dst = g->nodes[rng.index(g->nodes.size())].id;
            break;
          }
          case 2: {
            // swap the branch order of a decision
            std::vector<std::size_t> idx;
            const auto& src = g->edges[rng.index(g->edges.size())].src;
            for (std::size_t k = 0; k < g->edges.size(); ++k)
              if (g->edges[k].src == src) idx.push_back(k);
            if (idx.size() >= 2) std::swap(g->edges[idx[0]], g->edges[idx[1]]);
            break;
          }
          default: {
            auto& e = g->edges[rng.index(g->edges.size())];
            if (e.label) *e.label += "!";
          }
        }
      } else {
        auto& d = std::get<SequenceDiagram>(mut.body);
        switch (rng.index(4)) {
          case 0: d.messages[rng.index(d.messages.size())].label += " ack"; break;
          case 1: {
            auto& msg = d.messages[rng.index(d.messages.size())];
            msg.arrow = msg.arrow == Arrow::Solid ? Arrow::Dashed : Arrow::Solid;
            break;
          }
          case 2: {
            if (d.messages.size() < 2) break;
            const auto a = rng.index(d.messages.size() - 1);
            std::swap(d.messages[a], d.messages[a + 1]);
            std::swap(d.messages[a].seq_index, d.messages[a + 1].seq_index);
            break;
          }
          default: {
            auto& msg = d.messages[rng.index(d.messages.size())];
            msg.to = d.participants[rng.index(d.participants.size())].id;
          }
        }
      }
      if (!validate(mut).empty() || canonical(mut) == canonical(ast)) continue;
      ++compared;
      CHECK_MESSAGE(caption::caption(mut).full_text != text, mermaid::serialize(mut));
    }
  }
  CHECK(compared >= 200);
  MESSAGE(compared << " structurally different mutants compared");
}
