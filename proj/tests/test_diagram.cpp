#include <doctest.h>

#include <algorithm>

#include "diagcap/diagram.hpp"
#include "oracles.hpp"

using namespace diagcap;

namespace {

DiagramAst linear() {
  FlowchartGraph g;
  g.nodes = {{"S", "Start", NodeShape::Terminal}, {"A", "Do X", NodeShape::Process}, {"E", "End", NodeShape::Terminal}};
  g.edges = {{"S", "A", {}}, {"A", "E", {}}};
  return {"lin", g};
}

DiagramAst with_decision() {
  FlowchartGraph g;
  g.nodes = {{"S", "Start", NodeShape::Terminal},
             {"A", "Attach", NodeShape::Process},
             {"C", "Accepted?", NodeShape::Decision},
             {"E", "End", NodeShape::Terminal}};
  g.edges = {{"S", "A", {}}, {"A", "C", {}}, {"C", "E", "Yes"}, {"C", "A", "No"}};
  return {"dec", g};
}

DiagramAst three_messages() {
  SequenceDiagram d;
  d.participants = {{"UE", "UE"}, {"eNB", "eNB"}, {"MME", "MME"}};
  d.messages = {{"UE", "eNB", "Attach Request", Arrow::Solid, 0},
                {"eNB", "MME", "Initial UE Message", Arrow::Solid, 1},
                {"MME", "UE", "Attach Accept", Arrow::Dashed, 2}};
  return {"seq", d};
}

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST_CASE("one-node flowchart has no end terminal") {
  FlowchartGraph g;
  g.nodes = {{"S", "Start", NodeShape::Terminal}};
  const auto v = validate({"one", g});
  REQUIRE(has_rule(v, "no-end-terminal"));
  auto it = std::find_if(v.begin(), v.end(), [](auto& x) { return x.rule == "no-end-terminal"; });
  CHECK(it->message == "no end terminal reachable");
}

TEST_CASE("minimal well-formed flowcharts validate") {
  CHECK(validate(linear()).empty());
  CHECK(validate(with_decision()).empty());
  CHECK(validate(three_messages()).empty());
}

TEST_CASE("unknown participant is reported once, by id") {
  auto ast = three_messages();
  std::get<SequenceDiagram>(ast.body).messages[0].to = "X";
  const auto v = validate(ast);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "unknown-participant");
  CHECK(v[0].element == "X");
}

TEST_CASE("each flowchart invariant is enforced") {
  SUBCASE("label on a process edge") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).edges[0].label = "Yes";
    CHECK(has_rule(validate(ast), "label-on-non-decision"));
  }
  SUBCASE("duplicate node id") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).nodes[1].id = "S";
    CHECK(has_rule(validate(ast), "duplicate-id"));
  }
  SUBCASE("empty label") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).nodes[1].label = "";
    CHECK(has_rule(validate(ast), "bad-label"));
  }
  SUBCASE("bracket in label") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).nodes[1].label = "Do [X]";
    CHECK(has_rule(validate(ast), "bad-label"));
  }
  SUBCASE("decision with one branch") {
    auto ast = with_decision();
    auto& g = std::get<FlowchartGraph>(ast.body);
    g.edges.pop_back();
    CHECK(has_rule(validate(ast), "decision-branches"));
  }
  SUBCASE("unlabeled branch") {
    auto ast = with_decision();
    std::get<FlowchartGraph>(ast.body).edges[3].label.reset();
    CHECK(has_rule(validate(ast), "unlabeled-branch"));
  }
  SUBCASE("repeated branch label") {
    auto ast = with_decision();
    std::get<FlowchartGraph>(ast.body).edges[3].label = "Yes";
    CHECK(has_rule(validate(ast), "duplicate-branch-label"));
  }
  SUBCASE("two starts") {
    auto ast = linear();
    auto& g = std::get<FlowchartGraph>(ast.body);
    g.nodes.push_back({"T", "Begin", NodeShape::Terminal});
    g.edges.push_back({"T", "A", {}});
    CHECK(has_rule(validate(ast), "multiple-start-terminals"));
  }
  SUBCASE("unreachable island") {
    auto ast = linear();
    auto& g = std::get<FlowchartGraph>(ast.body);
    g.nodes.push_back({"B", "Orphan", NodeShape::Process});
    g.nodes.push_back({"B2", "Orphan two", NodeShape::Process});
    g.edges.push_back({"B", "B2", {}});
    g.edges.push_back({"B2", "B", {}});
    CHECK(has_rule(validate(ast), "unreachable-node"));
  }
  SUBCASE("edge to undeclared node") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).edges.push_back({"A", "Z", {}});
    CHECK(has_rule(validate(ast), "unknown-node"));
  }
  SUBCASE("duplicate edge") {
    auto ast = linear();
    std::get<FlowchartGraph>(ast.body).edges.push_back({"A", "E", {}});
    CHECK(has_rule(validate(ast), "duplicate-edge"));
  }
}

TEST_CASE("sequence invariants") {
  SUBCASE("single participant") {
    SequenceDiagram d;
    d.participants = {{"UE", "UE"}};
    d.messages = {{"UE", "UE", "Self check", Arrow::Solid, 0}};
    CHECK(has_rule(validate({"s", d}), "too-few-participants"));
  }
  SUBCASE("no messages") {
    auto ast = three_messages();
    std::get<SequenceDiagram>(ast.body).messages.clear();
    CHECK(has_rule(validate(ast), "no-messages"));
  }
  SUBCASE("idle participant") {
    auto ast = three_messages();
    std::get<SequenceDiagram>(ast.body).participants.push_back({"HSS", "HSS"});
    const auto v = validate(ast);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "idle-participant");
    CHECK(v[0].element == "HSS");
  }
  SUBCASE("seq index out of order") {
    auto ast = three_messages();
    std::get<SequenceDiagram>(ast.body).messages[2].seq_index = 7;
    CHECK(has_rule(validate(ast), "seq-index"));
  }
}

TEST_CASE("require_valid throws with the rule names") {
  FlowchartGraph g;
  DiagramAst ast{"empty", g};
  CHECK_THROWS_AS(require_valid(ast), Error);
  try {
    require_valid(ast);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("empty-graph") != std::string::npos);
  }
  CHECK_NOTHROW(require_valid(linear()));
}

TEST_CASE("validate is pure and deterministic") {
  auto broken = with_decision();
  auto& g = std::get<FlowchartGraph>(broken.body);
  g.edges[3].label.reset();
  g.nodes.push_back({"Q", "", NodeShape::Process});
  const auto a = validate(broken);
  const auto b = validate(broken);
  CHECK(a == b);
  CHECK(a.size() >= 3);
}

TEST_CASE("oracle examples") {
  const auto lin = graph_oracle(linear());
  CHECK(lin.start == "S");
  CHECK(lin.ends == std::vector<std::string>{"E"});
  CHECK(lin.successors.at("A") == std::vector<std::string>{"E"});
  CHECK(lin.predecessors.at("A") == std::vector<std::string>{"S"});

  const auto dec = graph_oracle(with_decision());
  CHECK(dec.branch_target("C", "Yes") == std::optional<std::string>("E"));
  CHECK(dec.branch_target("C", "No") == std::optional<std::string>("A"));
  CHECK_FALSE(dec.branch_target("C", "Maybe"));

  const auto seq = graph_oracle(three_messages());
  CHECK(seq.message_count_at("UE") == 2);
  CHECK(seq.message_count_at("eNB") == 2);
  CHECK(seq.sent.at("MME") == 1);
  CHECK(seq.received.at("UE") == 1);

  FlowchartGraph bad;
  CHECK_THROWS_AS(graph_oracle({"bad", bad}), Error);
}

TEST_CASE("self-message counts once at its participant") {
  auto ast = three_messages();
  auto& d = std::get<SequenceDiagram>(ast.body);
  d.messages.push_back({"eNB", "eNB", "Admission control", Arrow::Solid, 3});
  const auto f = graph_oracle(ast);
  CHECK(f.message_count_at("eNB") == 3);
}

TEST_CASE("oracle successor map is exactly the edge list (generated diagrams)") {
  for (std::size_t i = 0; i < 300; ++i) {
    const auto ast = oracle::sample_diagram(11, i);
    REQUIRE(validate(ast).empty());
    const auto f = graph_oracle(ast);
    if (const auto* g = ast.flowchart()) {
      std::multiset<std::pair<std::string, std::string>> from_edges, from_oracle, from_preds;
      for (const auto& e : g->edges) from_edges.insert({e.src, e.dst});
      for (const auto& [src, dsts] : f.successors)
        for (const auto& d : dsts) from_oracle.insert({src, d});
      for (const auto& [dst, srcs] : f.predecessors)
        for (const auto& s : srcs) from_preds.insert({s, dst});
      CHECK(from_edges == from_oracle);
      CHECK(from_edges == from_preds);
    } else {
      const auto& d = *ast.sequence();
      std::size_t sent = 0;
      for (const auto& [p, k] : f.sent) sent += k;
      CHECK(sent == d.messages.size());
      for (const auto& p : d.participants) {
        std::size_t brute = 0;
        for (const auto& m : d.messages) brute += (m.from == p.id || m.to == p.id);
        CHECK(f.message_count_at(p.id) == brute);
      }
    }
  }
}
