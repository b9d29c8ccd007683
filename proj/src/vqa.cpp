#include "diagcap/vqa.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <unordered_map>

#include "diagcap/random.hpp"

namespace diagcap::vqa {

namespace {

constexpr std::array kAllFamilies{Family::NextStepOnBranch,   Family::DirectSuccessors, Family::MessageCountAtNode,
                                  Family::MessageReceiver,    Family::MessageOrder,     Family::NodeCount};

/// A question before distractor sampling and option shuffling.
struct Candidate {
  Family family;
  Kind kind;
  std::string stem;
  std::vector<std::string> correct;
  std::vector<std::string> pool;  // distractor texts, distinct from `correct`
};

std::size_t option_count(Kind k) { return k == Kind::Single ? kSingleOptions : kMultiOptions; }

bool feasible(const Candidate& c) {
  const std::size_t n = option_count(c.kind);
  if (c.kind == Kind::Single && c.correct.size() != 1) return false;
  if (c.kind == Kind::Multi && (c.correct.size() < 2 || c.correct.size() > 4 || c.correct.size() >= n)) return false;
  return c.pool.size() >= n - c.correct.size();
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

/// Labels occurring exactly once among `labels`.
template <typename Range>
std::unordered_map<std::string, int> label_counts(const Range& labels) {
  std::unordered_map<std::string, int> counts;
  for (const auto& l : labels) ++counts[l];
  return counts;
}

std::vector<std::string> numeric_pool(std::size_t correct) {
  std::vector<std::string> out;
  const long c = static_cast<long>(correct);
  for (long v : {c - 1, c + 1, c - 2, c + 2, c + 3, c + 4})
    if (v >= 0) out.push_back(std::to_string(v));
  return out;
}

void flowchart_candidates(const FlowchartGraph& g, const OracleFacts& facts, std::vector<Candidate>& out) {
  std::unordered_map<std::string, const FlowNode*> by_id;
  std::vector<std::string> labels;
  for (const auto& n : g.nodes) {
    by_id[n.id] = &n;
    labels.push_back(n.label);
  }
  const auto counts = label_counts(labels);
  auto unique = [&](const std::string& id) { return counts.at(by_id.at(id)->label) == 1; };
  auto others = [&](std::initializer_list<std::string> exclude_ids, const std::vector<std::string>& exclude_labels) {
    std::vector<std::string> pool;
    for (const auto& n : g.nodes) {
      if (counts.at(n.label) != 1) continue;
      if (std::find(exclude_ids.begin(), exclude_ids.end(), n.id) != exclude_ids.end()) continue;
      if (std::find(exclude_labels.begin(), exclude_labels.end(), n.label) != exclude_labels.end()) continue;
      pool.push_back(n.label);
    }
    return pool;
  };

  for (const auto& n : g.nodes) {
    if (n.shape != NodeShape::Decision || !unique(n.id)) continue;
    auto bt = facts.branch_targets.find(n.id);
    if (bt == facts.branch_targets.end()) continue;
    // Iterate branches in edge order for determinism.
    for (const auto& e : g.edges) {
      if (e.src != n.id || !e.label) continue;
      const std::string& target = bt->second.at(*e.label);
      if (!unique(target)) continue;
      const std::string& answer = by_id.at(target)->label;
      Candidate c{Family::NextStepOnBranch, Kind::Single,
                  "Following the flowchart, what is the next step when " + quoted(n.label) + " evaluates " +
                      *e.label + "?",
                  {answer},
                  others({n.id, target}, {})};
      if (c.stem.find(answer) == std::string::npos) out.push_back(std::move(c));
    }
  }

  for (const auto& n : g.nodes) {
    if (!unique(n.id)) continue;
    std::vector<std::string> succ_ids;
    for (const auto& s : facts.successors.at(n.id))
      if (std::find(succ_ids.begin(), succ_ids.end(), s) == succ_ids.end()) succ_ids.push_back(s);
    if (succ_ids.empty() || !std::all_of(succ_ids.begin(), succ_ids.end(), unique)) continue;
    std::vector<std::string> answers;
    for (const auto& s : succ_ids) answers.push_back(by_id.at(s)->label);
    if (std::any_of(answers.begin(), answers.end(), [&](const std::string& a) { return a == n.label; })) continue;
    Candidate c;
    c.family = Family::DirectSuccessors;
    c.correct = answers;
    c.pool = others({n.id}, answers);
    if (answers.size() == 1) {
      c.kind = Kind::Single;
      c.stem = "Which step comes directly after " + quoted(n.label) + " in the flowchart?";
    } else {
      c.kind = Kind::Multi;
      c.stem = "Which of the following are direct successors of " + quoted(n.label) + "?";
    }
    bool leaks = std::any_of(answers.begin(), answers.end(),
                             [&](const std::string& a) { return c.stem.find(a) != std::string::npos; });
    if (!leaks) out.push_back(std::move(c));
  }

  const auto processes = static_cast<std::size_t>(std::count_if(
      g.nodes.begin(), g.nodes.end(), [](const FlowNode& n) { return n.shape == NodeShape::Process; }));
  out.push_back({Family::NodeCount, Kind::Single, "How many process steps does this flowchart contain?",
                 {std::to_string(processes)}, numeric_pool(processes)});
}

void sequence_candidates(const SequenceDiagram& d, const OracleFacts& facts, std::vector<Candidate>& out) {
  std::vector<std::string> names, message_labels;
  for (const auto& p : d.participants) names.push_back(p.display_name);
  for (const auto& m : d.messages) message_labels.push_back(m.label);
  const auto name_counts = label_counts(names);
  const auto label_counts_ = label_counts(message_labels);
  auto name_of = [&](const std::string& id) -> const std::string& { return d.find(id)->display_name; };
  auto unique_name = [&](const std::string& id) { return name_counts.at(name_of(id)) == 1; };
  auto unique_label = [&](const std::string& l) { return label_counts_.at(l) == 1; };

  for (const auto& p : d.participants) {
    if (!unique_name(p.id)) continue;
    const std::size_t count = facts.message_count_at(p.id);
    out.push_back({Family::MessageCountAtNode, Kind::Single,
                   "How many signaling messages does " + p.display_name + " send or receive?",
                   {std::to_string(count)}, numeric_pool(count)});
  }

  for (const auto& m : d.messages) {
    if (!unique_label(m.label) || !unique_name(m.to)) continue;
    const std::string& answer = name_of(m.to);
    std::vector<std::string> pool;
    for (const auto& p : d.participants)
      if (p.id != m.to && unique_name(p.id)) pool.push_back(p.display_name);
    Candidate c{Family::MessageReceiver, Kind::Single, "Which node receives the message " + quoted(m.label) + "?",
                {answer}, pool};
    if (c.stem.find(answer) == std::string::npos) out.push_back(std::move(c));
  }

  for (const auto& p : d.participants) {
    if (!unique_name(p.id)) continue;
    std::vector<std::string> received, pool;
    for (std::size_t idx : facts.messages_of.at(p.id)) {
      const auto& m = d.messages[idx];
      if (m.to == p.id && unique_label(m.label)) received.push_back(m.label);
    }
    for (const auto& m : d.messages)
      if (m.to != p.id && unique_label(m.label)) pool.push_back(m.label);
    Candidate c{Family::MessageReceiver, Kind::Multi,
                "Which of the following messages are received by " + p.display_name + "?", received, pool};
    bool leaks = std::any_of(received.begin(), received.end(),
                             [&](const std::string& a) { return c.stem.find(a) != std::string::npos; });
    if (!leaks) out.push_back(std::move(c));
  }

  for (std::size_t i = 0; i + 1 < d.messages.size(); ++i) {
    const auto& cur = d.messages[i];
    const auto& next = d.messages[i + 1];
    if (!unique_label(cur.label) || !unique_label(next.label)) continue;
    std::vector<std::string> pool;
    for (std::size_t j = 0; j < d.messages.size(); ++j)
      if (j != i && j != i + 1 && unique_label(d.messages[j].label)) pool.push_back(d.messages[j].label);
    Candidate c{Family::MessageOrder, Kind::Single,
                "Which message is sent immediately after " + quoted(cur.label) + "?", {next.label}, pool};
    if (c.stem.find(next.label) == std::string::npos) out.push_back(std::move(c));
  }

  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    const auto& cur = d.messages[i];
    if (!unique_label(cur.label)) continue;
    std::vector<std::string> later, earlier;
    for (std::size_t j = 0; j < d.messages.size(); ++j) {
      if (j == i || !unique_label(d.messages[j].label)) continue;
      (j > i ? later : earlier).push_back(d.messages[j].label);
    }
    Candidate c{Family::MessageOrder, Kind::Multi,
                "Which of the following messages are sent after " + quoted(cur.label) + "?", later, earlier};
    bool leaks = std::any_of(later.begin(), later.end(),
                             [&](const std::string& a) { return c.stem.find(a) != std::string::npos; });
    if (!leaks) out.push_back(std::move(c));
  }
}

std::vector<Candidate> all_candidates(const DiagramAst& ast) {
  const OracleFacts facts = graph_oracle(ast);
  std::vector<Candidate> raw;
  if (const auto* g = ast.flowchart())
    flowchart_candidates(*g, facts, raw);
  else
    sequence_candidates(*ast.sequence(), facts, raw);
  std::vector<Candidate> out;
  for (auto& c : raw)
    if (feasible(c)) out.push_back(std::move(c));
  return out;
}

/// Candidates of one kind, interleaved across families (family order, then
/// a seeded shuffle within each family).
std::vector<Candidate> interleave(std::vector<Candidate> cands, Kind kind, std::span<const Family> families, Rng& rng) {
  std::vector<std::vector<Candidate>> per_family;
  for (Family f : kAllFamilies) {
    if (!families.empty() && std::find(families.begin(), families.end(), f) == families.end()) continue;
    std::vector<Candidate> group;
    for (auto& c : cands)
      if (c.family == f && c.kind == kind) group.push_back(c);
    rng.shuffle(group);
    if (!group.empty()) per_family.push_back(std::move(group));
  }
  std::vector<Candidate> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& group : per_family)
      if (round < group.size()) {
        out.push_back(std::move(group[round]));
        any = true;
      }
    if (!any) break;
  }
  return out;
}

QaItem materialize(const Candidate& c, const std::string& diagram_id, std::size_t ordinal, Rng& rng) {
  const std::size_t n = option_count(c.kind);
  auto pool = c.pool;
  rng.shuffle(pool);
  std::vector<std::pair<std::string, bool>> texts;
  for (const auto& t : c.correct) texts.emplace_back(t, true);
  for (std::size_t i = 0; texts.size() < n; ++i) texts.emplace_back(pool[i], false);
  rng.shuffle(texts);

  QaItem item;
  char id[16];
  std::snprintf(id, sizeof id, "-q%02zu", ordinal);
  item.item_id = diagram_id + id;
  item.diagram_id = diagram_id;
  item.kind = c.kind;
  item.family = c.family;
  item.stem = c.stem;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    item.options.push_back({letter, texts[i].first});
    if (texts[i].second) item.correct.insert(letter);
  }
  if (auto problem = item_problem(item); !problem.empty())
    throw Error("internal: generated item " + item.item_id + " is malformed: " + problem);
  return item;
}

std::string missing_structure(Family f, Kind k) {
  switch (f) {
    case Family::NextStepOnBranch:
      return k == Kind::Multi ? "no multiple-choice form" : "a Decision node whose condition and target labels are unique";
    case Family::DirectSuccessors:
      return k == Kind::Multi ? "a node with 2-4 distinct successors and at least 5 distinct step labels"
                              : "a node with exactly one successor and at least 4 distinct step labels";
    case Family::MessageCountAtNode:
      return k == Kind::Multi ? "no multiple-choice form" : "a sequence diagram participant";
    case Family::MessageReceiver:
      return k == Kind::Multi ? "a participant receiving 2-4 distinct messages and at least 5 distinct message labels"
                              : "a sequence diagram with at least 4 participants";
    case Family::MessageOrder:
      return k == Kind::Multi ? "a message followed by 2-4 later messages and at least 5 distinct message labels"
                              : "a sequence diagram with at least 5 distinct message labels";
    case Family::NodeCount:
      return k == Kind::Multi ? "no multiple-choice form" : "a flowchart";
  }
  return "?";
}

std::string shortfall(std::span<const Candidate> cands, Kind kind, std::span<const Family> families,
                      std::size_t wanted, std::size_t have) {
  std::string msg = "requested " + std::to_string(wanted) + " " + std::string(to_string(kind)) +
                    "-choice questions but only " + std::to_string(have) + " are available";
  for (Family f : kAllFamilies) {
    if (!families.empty() && std::find(families.begin(), families.end(), f) == families.end()) continue;
    auto n = std::count_if(cands.begin(), cands.end(),
                           [&](const Candidate& c) { return c.family == f && c.kind == kind; });
    msg += "; " + std::string(to_string(f)) + ": " + std::to_string(n);
    if (n == 0) msg += " (requires " + missing_structure(f, kind) + ")";
  }
  return msg;
}

}  // namespace

std::string_view to_string(Kind k) { return k == Kind::Single ? "single" : "multi"; }

std::string_view to_string(Family f) {
  switch (f) {
    case Family::NextStepOnBranch: return "NextStepOnBranch";
    case Family::DirectSuccessors: return "DirectSuccessors";
    case Family::MessageCountAtNode: return "MessageCountAtNode";
    case Family::MessageReceiver: return "MessageReceiver";
    case Family::MessageOrder: return "MessageOrder";
    case Family::NodeCount: return "NodeCount";
  }
  return "?";
}

Family family_from_string(std::string_view s) {
  for (Family f : kAllFamilies)
    if (to_string(f) == s) return f;
  throw Error("unknown question family '" + std::string(s) + "'");
}

Kind kind_from_string(std::string_view s) {
  if (s == "single") return Kind::Single;
  if (s == "multi") return Kind::Multi;
  throw Error("unknown question kind '" + std::string(s) + "'");
}

std::string item_problem(const QaItem& item) {
  const std::size_t n = item.options.size();
  if (n < 4 || n > 5) return "expected 4 or 5 options";
  std::set<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    if (item.options[i].letter != static_cast<char>('A' + i)) return "option letters must run A, B, C, ...";
    if (!texts.insert(item.options[i].text).second) return "duplicate option text";
  }
  for (char c : item.correct)
    if (c < 'A' || c >= static_cast<char>('A' + n)) return "correct letter outside the options";
  if (item.kind == Kind::Single && item.correct.size() != 1) return "single-choice item needs exactly 1 correct letter";
  if (item.kind == Kind::Multi &&
      (item.correct.size() < 2 || item.correct.size() > 4 || item.correct.size() >= n))
    return "multiple-choice item needs 2-4 correct letters and at least one wrong option";
  return {};
}

std::vector<QaItem> make_questions(const DiagramAst& ast, std::uint64_t seed, std::size_t n_single,
                                   std::size_t n_multi, std::span<const Family> families) {
  const auto cands = all_candidates(ast);
  Rng rng(seed);
  auto singles = interleave(cands, Kind::Single, families, rng);
  auto multis = interleave(cands, Kind::Multi, families, rng);
  if (singles.size() < n_single)
    throw Error("diagram '" + ast.diagram_id + "': " + shortfall(cands, Kind::Single, families, n_single, singles.size()));
  if (multis.size() < n_multi)
    throw Error("diagram '" + ast.diagram_id + "': " + shortfall(cands, Kind::Multi, families, n_multi, multis.size()));

  std::vector<QaItem> items;
  std::size_t ordinal = 0;
  for (std::size_t i = 0; i < n_single; ++i) items.push_back(materialize(singles[i], ast.diagram_id, ++ordinal, rng));
  for (std::size_t i = 0; i < n_multi; ++i) items.push_back(materialize(multis[i], ast.diagram_id, ++ordinal, rng));
  return items;
}

EvalSet build_eval_set(std::span<const DiagramAst> corpus, std::uint64_t seed, std::size_t n_single,
                       std::size_t n_multi) {
  struct Pool {
    std::vector<Candidate> all, singles, multis;
    std::size_t next_single = 0, next_multi = 0, ordinal = 0;
    Rng rng{0};
  };
  std::vector<Pool> pools(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& p = pools[i];
    p.rng = Rng(split_seed(seed, i));
    p.all = all_candidates(corpus[i]);
    p.singles = interleave(p.all, Kind::Single, {}, p.rng);
    p.multis = interleave(p.all, Kind::Multi, {}, p.rng);
  }

  EvalSet set;
  auto draw = [&](Kind kind, std::size_t wanted) {
    std::size_t taken = 0;
    while (taken < wanted) {
      bool progress = false;
      for (std::size_t i = 0; i < corpus.size() && taken < wanted; ++i) {
        auto& p = pools[i];
        auto& list = kind == Kind::Single ? p.singles : p.multis;
        auto& next = kind == Kind::Single ? p.next_single : p.next_multi;
        if (next >= list.size()) continue;
        set.items.push_back(materialize(list[next++], corpus[i].diagram_id, ++p.ordinal, p.rng));
        ++taken;
        progress = true;
      }
      if (!progress) {
        std::vector<Candidate> everything;
        for (const auto& p : pools) everything.insert(everything.end(), p.all.begin(), p.all.end());
        throw Error("insufficient corpus for the evaluation set: " +
                    shortfall(everything, kind, {}, wanted, taken));
      }
    }
  };
  draw(Kind::Single, n_single);
  draw(Kind::Multi, n_multi);
  set.key = make_key(set.items);
  return set;
}

AnswerKey make_key(std::span<const QaItem> items) {
  AnswerKey key;
  for (const auto& item : items) {
    if (!key.answers.emplace(item.item_id, item.correct).second)
      throw Error("duplicate question id '" + item.item_id + "'");
    (item.kind == Kind::Single ? key.single_total : key.multi_total)++;
  }
  return key;
}

std::string prompt_for(const QaItem& item) {
  std::string out = item.stem + "\n";
  for (const auto& o : item.options) out += std::string(1, o.letter) + ". " + o.text + "\n";
  out += item.kind == Kind::Single ? "This question has exactly one correct option. Reply with its letter."
                                   : "This question has several correct options. Reply with all of their letters.";
  return out;
}

std::string answer_text(const std::set<char>& letters) {
  std::string out = "Answer: ";
  bool first = true;
  for (char c : letters) {
    if (!first) out += ", ";
    out += c;
    first = false;
  }
  return out;
}

nlohmann::ordered_json question_to_json(const QaItem& item) {
  nlohmann::ordered_json j;
  j["item_id"] = item.item_id;
  j["diagram_id"] = item.diagram_id;
  j["kind"] = to_string(item.kind);
  j["family"] = to_string(item.family);
  j["stem"] = item.stem;
  auto options = nlohmann::ordered_json::array();
  for (const auto& o : item.options) options.push_back({{"letter", std::string(1, o.letter)}, {"text", o.text}});
  j["options"] = std::move(options);
  return j;
}

QaItem question_from_json(const nlohmann::json& j) {
  QaItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.diagram_id = j.at("diagram_id").get<std::string>();
  item.kind = kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("family")) item.family = family_from_string(j.at("family").get<std::string>());
  item.stem = j.at("stem").get<std::string>();
  for (const auto& o : j.at("options")) {
    auto letter = o.at("letter").get<std::string>();
    if (letter.size() != 1) throw Error("question " + item.item_id + ": bad option letter '" + letter + "'");
    item.options.push_back({letter[0], o.at("text").get<std::string>()});
  }
  return item;
}

nlohmann::ordered_json key_to_json(const AnswerKey& key) {
  nlohmann::ordered_json j;
  j["single_total"] = key.single_total;
  j["multi_total"] = key.multi_total;
  nlohmann::ordered_json answers = nlohmann::ordered_json::object();
  for (const auto& [id, letters] : key.answers) {
    auto arr = nlohmann::ordered_json::array();
    for (char c : letters) arr.push_back(std::string(1, c));
    answers[id] = std::move(arr);
  }
  j["answers"] = std::move(answers);
  return j;
}

AnswerKey key_from_json(const nlohmann::json& j) {
  AnswerKey key;
  key.single_total = j.at("single_total").get<std::size_t>();
  key.multi_total = j.at("multi_total").get<std::size_t>();
  for (const auto& [id, arr] : j.at("answers").items()) {
    std::set<char> letters;
    for (const auto& l : arr) {
      auto s = l.get<std::string>();
      if (s.size() != 1) throw Error("answer key entry " + id + ": bad letter '" + s + "'");
      letters.insert(s[0]);
    }
    key.answers[id] = std::move(letters);
  }
  return key;
}

}  // namespace diagcap::vqa
