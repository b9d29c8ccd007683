#include <doctest.h>

#include <algorithm>
#include <set>

#include "diagcap/mermaid.hpp"
#include "diagcap/synth.hpp"
#include "oracles.hpp"

using namespace diagcap;
using synth::GenConfig;

namespace {

GenConfig flow(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.kind = DiagramKind::Flowchart;
  return c;
}

GenConfig seq(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.kind = DiagramKind::Sequence;
  return c;
}

std::string error_of(const GenConfig& cfg) {
  try {
    synth::generate(cfg);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("same seed twice gives byte-identical Mermaid") {
  for (std::uint64_t s : {0ull, 1ull, 42ull, 0xdeadbeefull}) {
    CHECK(mermaid::serialize(synth::generate(flow(s))) == mermaid::serialize(synth::generate(flow(s))));
    CHECK(mermaid::serialize(synth::generate(seq(s))) == mermaid::serialize(synth::generate(seq(s))));
  }
  CHECK(mermaid::serialize(synth::generate(flow(1))) != mermaid::serialize(synth::generate(flow(2))));
}

TEST_CASE("probabilities off give a plain chain") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto cfg = flow(s);
    cfg.decision_probability = 0;
    cfg.merge_probability = 0;
    const auto ast = synth::generate(cfg);
    const auto& g = *ast.flowchart();
    CHECK(std::none_of(g.nodes.begin(), g.nodes.end(), [](auto& n) { return n.shape == NodeShape::Decision; }));
    CHECK(g.edges.size() + 1 == g.nodes.size());
    std::map<std::string, int> out, in;
    for (const auto& e : g.edges) {
      ++out[e.src];
      ++in[e.dst];
    }
    for (const auto& n : g.nodes) {
      CHECK(out[n.id] <= 1);
      CHECK(in[n.id] <= 1);
    }
    CHECK(g.nodes.size() >= 5);
    CHECK(g.nodes.size() <= 12);
  }
}

TEST_CASE("skip-over probability one: every message skips a lifeline or is a self-message") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto cfg = seq(s);
    cfg.skip_over_probability = 1.0;
    cfg.participant_count_range = {3, 5};
    const auto ast = synth::generate(cfg);
    const auto& d = *ast.sequence();
    for (const auto& m : d.messages) {
      const int gap = std::abs(d.column(m.from) - d.column(m.to));
      CHECK_MESSAGE((gap >= 2 || m.is_self()), mermaid::serialize(ast));
    }
  }
}

TEST_CASE("merge probability above one half yields merge lines") {
  int merged = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto cfg = flow(split_seed(7, s));
    cfg.merge_probability = 0.6;
    const auto ast = synth::generate(cfg);
    std::map<std::string, int> in;
    for (const auto& e : ast.flowchart()->edges) ++in[e.dst];
    for (const auto& n : ast.flowchart()->nodes)
      if (n.shape != NodeShape::Terminal && in[n.id] >= 2) {
        ++merged;
        break;
      }
  }
  CHECK(merged >= 1);
  MESSAGE(merged << " of 200 flowcharts contain a merge into a step");
}

TEST_CASE("every generated diagram validates, every label comes from the vocabulary") {
  const auto& v = synth::default_vocabulary();
  std::set<std::string> phrases;
  for (const auto* list : {&v.start_terminals, &v.end_terminals, &v.actions, &v.conditions, &v.participant_names,
                           &v.message_labels})
    phrases.insert(list->begin(), list->end());
  std::set<std::string> branches;
  for (const auto& [a, b] : v.branch_labels) branches.insert({a, b});

  for (std::size_t i = 0; i < 600; ++i) {
    const auto ast = oracle::sample_diagram(31, i);
    REQUIRE(validate(ast).empty());
    if (const auto* g = ast.flowchart()) {
      for (const auto& n : g->nodes) CHECK_MESSAGE(phrases.count(n.label), n.label);
      for (const auto& e : g->edges)
        if (e.label) CHECK_MESSAGE(branches.count(*e.label), *e.label);
    } else {
      for (const auto& p : ast.sequence()->participants) CHECK_MESSAGE(phrases.count(p.display_name), p.display_name);
      for (const auto& m : ast.sequence()->messages) CHECK_MESSAGE(phrases.count(m.label), m.label);
    }
  }
}

TEST_CASE("every step can reach an end terminal") {
  for (std::uint64_t s = 0; s < 500; ++s) {
    auto cfg = flow(split_seed(9, s));
    cfg.merge_probability = s % 2 ? 0.9 : 0.3;
    cfg.decision_probability = 0.5;
    const auto ast = synth::generate(cfg);
    const auto& g = *ast.flowchart();
    std::set<std::string> live;
    for (const auto& n : g.nodes)
      if (std::none_of(g.edges.begin(), g.edges.end(), [&](auto& e) { return e.src == n.id; })) live.insert(n.id);
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& e : g.edges)
        if (live.count(e.dst) && live.insert(e.src).second) grew = true;
    }
    CHECK_MESSAGE(live.size() == g.nodes.size(), mermaid::serialize(ast));
  }
}

TEST_CASE("start and end terminals differ") {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto ast = synth::generate(flow(s));
    const auto f = graph_oracle(ast);
    const auto* start = ast.flowchart()->find(f.start);
    for (const auto& e : f.ends) CHECK(ast.flowchart()->find(e)->label != start->label);
  }
}

TEST_CASE("impossible configs are rejected before generation") {
  auto small = flow(0);
  small.node_count_range = {2, 2};
  CHECK(error_of(small).find("node_count_range") != std::string::npos);

  auto lonely = seq(0);
  lonely.participant_count_range = {1, 3};
  CHECK(error_of(lonely).find("participant_count_range") != std::string::npos);

  auto empty = seq(0);
  empty.message_count_range = {5, 4};
  CHECK(error_of(empty).find("message_count_range") != std::string::npos);

  auto prob = flow(0);
  prob.merge_probability = 1.5;
  CHECK(error_of(prob).find("merge_probability") != std::string::npos);

  auto crowd = seq(0);
  crowd.participant_count_range = {2, 500};
  CHECK(error_of(crowd).find("participant_count_range") != std::string::npos);

  auto vocab = flow(0);
  vocab.label_vocabulary = "nope";
  CHECK(error_of(vocab).find("nope") != std::string::npos);
}

TEST_CASE("corpus generation") {
  const auto& v = synth::default_vocabulary();
  GenConfig tmpl;
  tmpl.seed = 123;

  SUBCASE("empty corpus") {
    const auto c = synth::generate_corpus(tmpl, v, 0, 0);
    CHECK(c.diagrams.empty());
    CHECK(c.entries.empty());
  }
  SUBCASE("counts, ids, seeds") {
    const auto c = synth::generate_corpus(tmpl, v, 5, 5, "x");
    REQUIRE(c.diagrams.size() == 10);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < 10; ++i) {
      ids.insert(c.diagrams[i].diagram_id);
      CHECK(c.entries[i].seed == split_seed(123, i));
      CHECK(c.entries[i].diagram_id == c.diagrams[i].diagram_id);
      CHECK(c.diagrams[i].kind() == (i < 5 ? DiagramKind::Flowchart : DiagramKind::Sequence));
    }
    CHECK(ids.size() == 10);
    CHECK(c.diagrams[0].diagram_id == "x-fc-00001");
    CHECK(c.diagrams[5].diagram_id == "x-sd-00001");

    // diagram i depends only on (template, i)
    auto one = tmpl;
    one.seed = split_seed(123, 7);
    one.kind = DiagramKind::Sequence;
    CHECK(structurally_equal(synth::generate(one, v), c.diagrams[7]));
  }
  SUBCASE("rerun is byte-identical") {
    const auto a = synth::generate_corpus(tmpl, v, 5, 5);
    const auto b = synth::generate_corpus(tmpl, v, 5, 5);
    for (std::size_t i = 0; i < 10; ++i) CHECK(mermaid::serialize(a.diagrams[i]) == mermaid::serialize(b.diagrams[i]));
  }
}

TEST_CASE("vocabulary files") {
  const std::string text =
      "# comment\n"
      "[id]\ntiny\n"
      "[start_terminals]\nBegin\n"
      "[end_terminals]\nDone\n"
      "[actions]\nPing host\nReset port\n"
      "[conditions]\nLink up?\n"
      "[branch_labels]\nUp / Down\n"
      "[participant_names]\nHost\nSwitch\nRouter\n"
      "[message_labels]\nHello\nAck\n";
  const auto v = synth::parse_vocabulary(text);
  CHECK(v.id == "tiny");
  CHECK(v.branch_labels == std::vector<std::pair<std::string, std::string>>{{"Up", "Down"}});
  CHECK(v.actions.size() == 2);

  auto cfg = flow(3);
  cfg.node_count_range = {6, 9};
  cfg.decision_probability = 0.5;
  cfg.participant_count_range = {2, 3};
  const auto ast = synth::generate(cfg, v);
  for (const auto& n : ast.flowchart()->nodes)
    CHECK((n.label == "Begin" || n.label == "Done" || n.label == "Ping host" || n.label == "Reset port" ||
           n.label == "Link up?"));

  CHECK_THROWS_AS(synth::parse_vocabulary("[id]\nx\n[bogus]\ny\n"), Error);
  CHECK_THROWS_AS(synth::parse_vocabulary("[id]\nx\n[actions]\nbad [label]\n"), Error);
  CHECK_THROWS_AS(synth::parse_vocabulary(
                      "[id]\nx\n[start_terminals]\nSame\n[end_terminals]\nSame\n[actions]\na\n[conditions]\nc\n"
                      "[branch_labels]\nY / N\n[participant_names]\nA\nB\n[message_labels]\nm\n"),
                  Error);
}

TEST_CASE("generator config from key-value text") {
  const auto kv = KeyValues::parse(
      "generator.node_count = 4..6\n"
      "generator.decision_probability = 0.5\n"
      "generator.participant_count = 3\n",
      "test.cfg");
  const auto cfg = synth::read_gen_config(kv, "generator.");
  CHECK(cfg.node_count_range == IntRange{4, 6});
  CHECK(cfg.decision_probability == 0.5);
  CHECK(cfg.participant_count_range == IntRange{3, 3});
  CHECK_NOTHROW(kv.reject_unused());

  const auto bad = KeyValues::parse("merge_probability = 2\n", "bad.cfg");
  try {
    synth::read_gen_config(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("merge_probability") != std::string::npos);
  }
}
