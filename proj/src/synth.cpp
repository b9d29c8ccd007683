#include "diagcap/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "diagcap/random.hpp"

namespace diagcap::synth {

// -- vocabulary ---------------------------------------------------------------

void LabelVocabulary::check() const {
  auto require = [&](const std::vector<std::string>& list, const char* name) {
    if (list.empty()) throw Error("vocabulary '" + id + "': section '" + name + "' is empty");
    for (const auto& phrase : list)
      if (auto p = label_problem(phrase))
        throw Error("vocabulary '" + id + "': phrase '" + phrase + "' in '" + name + "': " + *p);
  };
  if (id.empty()) throw Error("vocabulary has no id");
  require(start_terminals, "start_terminals");
  require(end_terminals, "end_terminals");
  for (const auto& s : start_terminals)
    if (std::all_of(end_terminals.begin(), end_terminals.end(), [&](const std::string& e) { return e == s; }))
      throw Error("vocabulary '" + id + "': every end terminal equals start terminal '" + s + "'");
  require(actions, "actions");
  require(conditions, "conditions");
  require(participant_names, "participant_names");
  require(message_labels, "message_labels");
  if (branch_labels.empty()) throw Error("vocabulary '" + id + "': section 'branch_labels' is empty");
  for (const auto& [a, b] : branch_labels) {
    if (label_problem(a) || label_problem(b) || a == b)
      throw Error("vocabulary '" + id + "': bad branch label pair '" + a + " / " + b + "'");
  }
  for (const auto& name : participant_names) {
    bool has_ident = std::any_of(name.begin(), name.end(), [](unsigned char c) { return std::isalpha(c); });
    if (!has_ident) throw Error("vocabulary '" + id + "': participant name '" + name + "' has no letters");
  }
}

const LabelVocabulary& default_vocabulary() {
  static const LabelVocabulary vocab = [] {
    LabelVocabulary v;
    v.id = "ict-default";
    v.start_terminals = {"Start",
                         "Begin attach procedure",
                         "UE powered on",
                         "Alarm raised",
                         "Handover triggered",
                         "Service request received"};
    v.end_terminals = {"End",
                       "Procedure complete",
                       "Session established",
                       "Connection released",
                       "Registration complete",
                       "Abort procedure",
                       "Handover complete",
                       "Service rejected",
                       "Fault cleared",
                       "Escalate to second line"};
    v.actions = {"Send RRC Connection Request",  "Allocate radio resources",
                 "Authenticate subscriber",      "Update location in HSS",
                 "Create default bearer",        "Establish GTP tunnel",
                 "Release RRC connection",       "Send Attach Accept",
                 "Start timer T3410",            "Retransmit request",
                 "Log failure cause",            "Select serving MME",
                 "Derive security keys",         "Send Security Mode Command",
                 "Configure measurement report", "Forward NAS message",
                 "Page the UE",                  "Update bearer context",
                 "Assign IP address",            "Apply QoS policy",
                 "Query PCRF for policy",        "Store UE context",
                 "Increment retry counter",      "Notify operator",
                 "Reset the baseband board",     "Check alarm log",
                 "Restart the service",          "Reload configuration",
                 "Collect diagnostic logs",      "Verify fiber connection",
                 "Switch to backup link",        "Report to network management",
                 "Trigger handover",             "Send Handover Command",
                 "Perform cell reselection",     "Release bearer resources",
                 "Send Detach Request",          "Reject the request",
                 "Wait for response",            "Run loopback test"};
    v.conditions = {"Authentication successful?", "Timer expired?",         "Resources available?",
                    "UE registered?",             "Signal quality sufficient?", "Retry limit reached?",
                    "Bearer established?",        "Alarm cleared?",         "Link status up?",
                    "Configuration valid?",       "Response received?",     "Security mode accepted?",
                    "Handover target found?",     "Subscriber allowed?",    "Policy granted?",
                    "Paging answered?",           "IP address assigned?",   "Service restored?",
                    "Cell load high?",            "Certificate valid?"};
    v.branch_labels = {{"Yes", "No"}, {"Success", "Failure"}, {"Pass", "Fail"}, {"True", "False"}, {"OK", "NOK"}};
    v.participant_names = {"UE",  "eNB", "MME", "SGW", "PGW", "HSS", "PCRF", "gNB",
                           "AMF", "SMF", "UPF", "AUSF", "UDM", "NRF", "PCF", "IMS"};
    v.message_labels = {"Attach Request",
                        "Attach Accept",
                        "Attach Complete",
                        "Authentication Request",
                        "Authentication Response",
                        "Security Mode Command",
                        "Security Mode Complete",
                        "Create Session Request",
                        "Create Session Response",
                        "Update Location Request",
                        "Update Location Answer",
                        "Initial Context Setup Request",
                        "Initial Context Setup Response",
                        "RRC Connection Request",
                        "RRC Connection Setup",
                        "RRC Connection Setup Complete",
                        "Modify Bearer Request",
                        "Modify Bearer Response",
                        "Identity Request",
                        "Identity Response",
                        "Service Request",
                        "Paging",
                        "Handover Required",
                        "Handover Command",
                        "Handover Notify",
                        "Detach Request",
                        "Detach Accept",
                        "UE Context Release Command",
                        "UE Context Release Complete",
                        "Registration Request",
                        "Registration Accept",
                        "PDU Session Establishment Request",
                        "PDU Session Establishment Accept",
                        "Measurement Report",
                        "Path Switch Request",
                        "Path Switch Request Ack",
                        "Downlink Data Notification",
                        "Release Access Bearers Request",
                        "Credit Control Request",
                        "Credit Control Answer"};
    v.check();
    return v;
  }();
  return vocab;
}

LabelVocabulary parse_vocabulary(std::string_view text, const std::string& origin) {
  LabelVocabulary v;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  };
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto line = trim(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    ++line_no;
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    if (!line.empty() && line.front() != '#') {
      if (line.front() == '[') {
        if (line.back() != ']') throw Error(where() + "malformed section header");
        section = std::string(line.substr(1, line.size() - 2));
      } else if (section == "id") {
        v.id = std::string(line);
      } else if (section == "start_terminals") {
        v.start_terminals.emplace_back(line);
      } else if (section == "end_terminals") {
        v.end_terminals.emplace_back(line);
      } else if (section == "actions") {
        v.actions.emplace_back(line);
      } else if (section == "conditions") {
        v.conditions.emplace_back(line);
      } else if (section == "participant_names") {
        v.participant_names.emplace_back(line);
      } else if (section == "message_labels") {
        v.message_labels.emplace_back(line);
      } else if (section == "branch_labels") {
        auto slash = line.find('/');
        if (slash == std::string_view::npos) throw Error(where() + "branch labels must be written 'A / B'");
        v.branch_labels.emplace_back(std::string(trim(line.substr(0, slash))),
                                     std::string(trim(line.substr(slash + 1))));
      } else if (section.empty()) {
        throw Error(where() + "phrase outside of any section");
      } else {
        throw Error(where() + "unknown section '" + section + "'");
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  v.check();
  return v;
}

LabelVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read vocabulary file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_vocabulary(buf.str(), path.string());
}

// -- config -------------------------------------------------------------------

void GenConfig::check(const LabelVocabulary& vocab) const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error("impossible generator config: " + field + " " + why);
  };
  auto fraction = [&](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0)) fail(field, "must lie in [0, 1]");
  };
  fraction(decision_probability, "decision_probability");
  fraction(merge_probability, "merge_probability");
  fraction(skip_over_probability, "skip_over_probability");
  if (node_count_range.empty()) fail("node_count_range", "is empty");
  if (node_count_range.max < 3) fail("node_count_range", "max must be at least 3 (start, step, end)");
  if (node_count_range.min < 3) fail("node_count_range", "min must be at least 3 (start, step, end)");
  if (participant_count_range.empty()) fail("participant_count_range", "is empty");
  if (participant_count_range.min < 2) fail("participant_count_range", "min must be at least 2");
  if (message_count_range.empty()) fail("message_count_range", "is empty");
  if (message_count_range.min < 1) fail("message_count_range", "min must be at least 1");
  if (message_count_range.max * 2 < participant_count_range.min)
    fail("message_count_range", "is too small to involve every participant");
  if (static_cast<std::int64_t>(vocab.participant_names.size()) < participant_count_range.max)
    fail("participant_count_range", "exceeds the vocabulary's participant names");
}

GenConfig read_gen_config(const KeyValues& kv, const std::string& prefix, GenConfig cfg) {
  cfg.seed = kv.get_u64(prefix + "seed", cfg.seed);
  if (auto kind = kv.get(prefix + "kind")) {
    if (*kind == "flowchart")
      cfg.kind = DiagramKind::Flowchart;
    else if (*kind == "sequence")
      cfg.kind = DiagramKind::Sequence;
    else
      throw Error(kv.origin() + ": bad value for key '" + prefix + "kind': expected flowchart or sequence");
  }
  cfg.node_count_range = kv.get_range(prefix + "node_count", cfg.node_count_range);
  cfg.decision_probability = kv.get_fraction(prefix + "decision_probability", cfg.decision_probability);
  cfg.merge_probability = kv.get_fraction(prefix + "merge_probability", cfg.merge_probability);
  cfg.participant_count_range = kv.get_range(prefix + "participant_count", cfg.participant_count_range);
  cfg.message_count_range = kv.get_range(prefix + "message_count", cfg.message_count_range);
  cfg.skip_over_probability = kv.get_fraction(prefix + "skip_over_probability", cfg.skip_over_probability);
  cfg.label_vocabulary = kv.get_string(prefix + "label_vocabulary", cfg.label_vocabulary);
  return cfg;
}

// -- generation ---------------------------------------------------------------

namespace {

/// Draws phrases without replacement, reshuffling once a list is exhausted.
class PhrasePool {
 public:
  PhrasePool(const std::vector<std::string>& phrases, Rng& rng) : source_(phrases), rng_(rng) {}

  std::string draw() {
    if (pending_.empty()) {
      pending_ = source_;
      rng_.shuffle(pending_);
    }
    std::string out = std::move(pending_.back());
    pending_.pop_back();
    return out;
  }

 private:
  const std::vector<std::string>& source_;
  Rng& rng_;
  std::vector<std::string> pending_;
};

struct Exit {
  std::size_t src;
  std::optional<std::string> label;
  bool last_branch = false;  // final branch of a decision; may loop back
};

class FlowchartBuilder {
 public:
  FlowchartBuilder(const GenConfig& cfg, const LabelVocabulary& vocab, Rng& rng)
      : cfg_(cfg),
        vocab_(vocab),
        rng_(rng),
        start_terminals_(vocab.start_terminals, rng),
        end_terminals_(vocab.end_terminals, rng),
        actions_(vocab.actions, rng),
        conditions_(vocab.conditions, rng) {}

  FlowchartGraph build() {
    const auto total = rng_.between(cfg_.node_count_range.min, cfg_.node_count_range.max);
    std::int64_t budget = total - 2;  // body nodes between start and end

    add_node("S", start_terminals_.draw(), NodeShape::Terminal);
    std::vector<Exit> stack{{0, std::nullopt, false}};
    while (!stack.empty()) {
      Exit exit = std::move(stack.back());
      stack.pop_back();

      // A lone open exit may only merge once an end exists, or the chart
      // could close without one.
      if ((!stack.empty() || end_) && rng_.bernoulli(cfg_.merge_probability)) {
        auto candidates = merge_candidates(exit);
        if (!candidates.empty()) {
          connect(exit, candidates[rng_.index(candidates.size())]);
          continue;
        }
      }
      if (budget <= 0) {
        connect(exit, end_node());
        continue;
      }
      const bool decision = budget >= 2 && rng_.bernoulli(cfg_.decision_probability);
      const std::string id = "N" + std::to_string(++body_counter_);
      std::size_t node = decision ? add_node(id, conditions_.draw(), NodeShape::Decision)
                                  : add_node(id, actions_.draw(), NodeShape::Process);
      --budget;
      connect(exit, node);
      if (decision) {
        const auto& pair = vocab_.branch_labels[rng_.index(vocab_.branch_labels.size())];
        stack.push_back({node, pair.second, true});
        stack.push_back({node, pair.first, false});
      } else {
        stack.push_back({node, std::nullopt, false});
      }
    }
    return std::move(graph_);
  }

 private:
  std::size_t add_node(std::string id, std::string label, NodeShape shape) {
    graph_.nodes.push_back({std::move(id), std::move(label), shape});
    targets_.emplace_back();
    return graph_.nodes.size() - 1;
  }

  std::size_t end_node() {
    if (!end_) {
      std::string label = end_terminals_.draw();
      while (label == graph_.nodes.front().label) label = end_terminals_.draw();
      end_ = add_node("E", std::move(label), NodeShape::Terminal);
    }
    return *end_;
  }

  void connect(const Exit& exit, std::size_t dst) {
    graph_.edges.push_back({graph_.nodes[exit.src].id, graph_.nodes[dst].id, exit.label});
    targets_[exit.src].push_back(dst);
  }

  bool reaches(std::size_t from, std::size_t goal) const {
    std::vector<bool> seen(graph_.nodes.size(), false);
    std::deque<std::size_t> queue{from};
    seen[from] = true;
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      if (cur == goal) return true;
      for (auto next : targets_[cur])
        if (!seen[next]) {
          seen[next] = true;
          queue.push_back(next);
        }
    }
    return false;
  }

  /// Existing nodes an exit may jump to. Ordinary exits only jump forward
  /// (never to a node that can already reach the source); the last branch of
  /// a decision may also loop back, since its sibling branch makes progress.
  std::vector<std::size_t> merge_candidates(const Exit& exit) const {
    std::vector<std::size_t> out;
    const auto& taken = targets_[exit.src];
    for (std::size_t n = 1; n < graph_.nodes.size(); ++n) {
      if (n == exit.src) continue;
      if (std::find(taken.begin(), taken.end(), n) != taken.end()) continue;
      if (!exit.last_branch && reaches(n, exit.src)) continue;
      out.push_back(n);
    }
    return out;
  }

  const GenConfig& cfg_;
  const LabelVocabulary& vocab_;
  Rng& rng_;
  PhrasePool start_terminals_, end_terminals_, actions_, conditions_;
  FlowchartGraph graph_;
  std::vector<std::vector<std::size_t>> targets_;
  std::optional<std::size_t> end_;
  int body_counter_ = 0;
};

std::string participant_id(const std::string& name, const std::set<std::string>& taken) {
  std::string id;
  for (unsigned char c : name) id += std::isalnum(c) ? static_cast<char>(c) : '_';
  while (!id.empty() && !std::isalpha(static_cast<unsigned char>(id.front()))) id.erase(id.begin());
  if (id.empty()) id = "P";
  std::string candidate = id;
  for (int k = 2; taken.count(candidate); ++k) candidate = id + "_" + std::to_string(k);
  return candidate;
}

SequenceDiagram build_sequence(const GenConfig& cfg, const LabelVocabulary& vocab, Rng& rng) {
  const auto p = static_cast<std::size_t>(rng.between(cfg.participant_count_range.min, cfg.participant_count_range.max));
  const auto m = static_cast<std::size_t>(rng.between(cfg.message_count_range.min, cfg.message_count_range.max));

  SequenceDiagram d;
  auto names = vocab.participant_names;
  rng.shuffle(names);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < p; ++i) {
    auto id = participant_id(names[i], ids);
    ids.insert(id);
    d.participants.push_back({id, names[i]});
  }

  PhrasePool labels(vocab.message_labels, rng);
  std::vector<bool> touched(p, false);
  auto untouched = [&] {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < p; ++i)
      if (!touched[i]) out.push_back(i);
    return out;
  };
  auto distance = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };

  std::optional<std::pair<std::size_t, std::size_t>> prev;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t remaining = m - k;
    const auto idle = untouched();
    // Each remaining message can introduce at most two idle participants.
    const bool force_from = !idle.empty() && idle.size() > 2 * (remaining - 1);
    const bool force_to = idle.size() > 2 * (remaining - 1) + 1;

    std::size_t from;
    if (force_from)
      from = idle.front();
    else if (prev && rng.bernoulli(0.5))
      from = prev->second;
    else
      from = rng.index(p);

    const bool skip = p >= 3 && rng.bernoulli(cfg.skip_over_probability);
    std::vector<std::size_t> options;
    for (std::size_t c = 0; c < p; ++c) {
      if (skip ? distance(c, from) >= 2 : distance(c, from) == 1) options.push_back(c);
    }
    if (force_to) {
      std::vector<std::size_t> idle_options;
      for (auto c : options)
        if (!touched[c]) idle_options.push_back(c);
      if (!idle_options.empty()) options = std::move(idle_options);
    }
    std::size_t to = options.empty() ? from : options[rng.index(options.size())];

    const bool reply = prev && prev->first == to && prev->second == from && from != to;
    d.messages.push_back({d.participants[from].id, d.participants[to].id, labels.draw(),
                          reply ? Arrow::Dashed : Arrow::Solid, k});
    touched[from] = touched[to] = true;
    prev = std::pair{from, to};
  }
  return d;
}

bool every_node_reaches_end(const FlowchartGraph& g) {
  std::unordered_map<std::string, std::vector<std::string>> preds;
  for (const auto& e : g.edges) preds[e.dst].push_back(e.src);
  std::set<std::string> seen;
  std::deque<std::string> queue;
  for (const auto& n : g.nodes) {
    bool has_out = std::any_of(g.edges.begin(), g.edges.end(), [&](const FlowEdge& e) { return e.src == n.id; });
    if (n.shape == NodeShape::Terminal && !has_out) {
      seen.insert(n.id);
      queue.push_back(n.id);
    }
  }
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (const auto& p : preds[cur])
      if (seen.insert(p).second) queue.push_back(p);
  }
  return seen.size() == g.nodes.size();
}

bool acceptable(const DiagramAst& ast, const GenConfig& cfg) {
  if (!validate(ast).empty()) return false;
  if (const auto* g = ast.flowchart()) {
    auto n = static_cast<std::int64_t>(g->nodes.size());
    return n >= cfg.node_count_range.min && n <= cfg.node_count_range.max && every_node_reaches_end(*g);
  }
  return true;
}

}  // namespace

DiagramAst generate(const GenConfig& cfg, const LabelVocabulary& vocab, std::string diagram_id) {
  cfg.check(vocab);
  Rng rng(cfg.seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    DiagramAst ast;
    ast.diagram_id = diagram_id;
    if (cfg.kind == DiagramKind::Flowchart)
      ast.body = FlowchartBuilder(cfg, vocab, rng).build();
    else
      ast.body = build_sequence(cfg, vocab, rng);
    if (acceptable(ast, cfg)) return ast;
  }
  throw Error("generator config (seed " + std::to_string(cfg.seed) + ", kind " + std::string(to_string(cfg.kind)) +
              ", vocabulary " + vocab.id + ") produced no valid diagram in " + std::to_string(kMaxAttempts) +
              " attempts");
}

DiagramAst generate(const GenConfig& cfg, std::string diagram_id) {
  if (cfg.label_vocabulary != default_vocabulary().id)
    throw Error("unknown built-in vocabulary '" + cfg.label_vocabulary + "'");
  return generate(cfg, default_vocabulary(), std::move(diagram_id));
}

Corpus generate_corpus(const GenConfig& cfg, const LabelVocabulary& vocab, std::size_t count_flowcharts,
                       std::size_t count_sequences, const std::string& id_prefix) {
  cfg.check(vocab);
  Corpus corpus;
  const std::size_t total = count_flowcharts + count_sequences;
  corpus.diagrams.reserve(total);
  corpus.entries.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const bool flow = i < count_flowcharts;
    const std::size_t ordinal = flow ? i + 1 : i - count_flowcharts + 1;
    char number[32];
    std::snprintf(number, sizeof number, "%05zu", ordinal);
    const std::string id = id_prefix + (flow ? "-fc-" : "-sd-") + number;
    GenConfig item = cfg;
    item.seed = split_seed(cfg.seed, i);
    item.kind = flow ? DiagramKind::Flowchart : DiagramKind::Sequence;
    corpus.diagrams.push_back(generate(item, vocab, id));
    corpus.entries.push_back({id, item.kind, item.seed});
  }
  return corpus;
}

}  // namespace diagcap::synth
