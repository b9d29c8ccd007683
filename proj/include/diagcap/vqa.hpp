#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diagcap/diagram.hpp"

namespace diagcap::vqa {

enum class Kind { Single, Multi };

enum class Family {
  NextStepOnBranch,
  DirectSuccessors,
  MessageCountAtNode,
  MessageReceiver,
  MessageOrder,
  NodeCount,
};

inline constexpr std::size_t kSingleOptions = 4;
inline constexpr std::size_t kMultiOptions = 5;

struct Option {
  char letter = 'A';
  std::string text;

  bool operator==(const Option&) const = default;
};

struct QaItem {
  std::string item_id;
  std::string diagram_id;
  Kind kind = Kind::Single;
  Family family = Family::NodeCount;
  std::string stem;
  std::vector<Option> options;
  std::set<char> correct;

  bool operator==(const QaItem&) const = default;
};

struct AnswerKey {
  std::map<std::string, std::set<char>> answers;
  std::size_t single_total = 0;  // A_s,t
  std::size_t multi_total = 0;   // A_m,t
};

std::string_view to_string(Kind k);
std::string_view to_string(Family f);
Family family_from_string(std::string_view s);
Kind kind_from_string(std::string_view s);

/// Checks option count, letters, distinctness, and correct-set size.
/// Returns a description of the first problem, or an empty string.
std::string item_problem(const QaItem& item);

/// Generates questions whose keys are read off graph_oracle(). Deterministic
/// in (ast, seed). `families` restricts the templates used (empty = all).
/// Throws Error naming the family and the missing structure when the
/// request cannot be met.
std::vector<QaItem> make_questions(const DiagramAst& ast, std::uint64_t seed, std::size_t n_single,
                                   std::size_t n_multi, std::span<const Family> families = {});

struct EvalSet {
  std::vector<QaItem> items;
  AnswerKey key;
};

/// Draws questions round-robin across diagrams (singles, then multis).
/// Throws Error with the per-family shortfall if the corpus cannot supply
/// the totals.
EvalSet build_eval_set(std::span<const DiagramAst> corpus, std::uint64_t seed, std::size_t n_single = 200,
                       std::size_t n_multi = 100);

AnswerKey make_key(std::span<const QaItem> items);

/// Question stem, lettered options, and the answering instruction.
std::string prompt_for(const QaItem& item);

/// "Answer: B" or "Answer: B, D".
std::string answer_text(const std::set<char>& letters);

// Questions file lines never carry the key.
nlohmann::ordered_json question_to_json(const QaItem& item);
QaItem question_from_json(const nlohmann::json& j);
nlohmann::ordered_json key_to_json(const AnswerKey& key);
AnswerKey key_from_json(const nlohmann::json& j);

}  // namespace diagcap::vqa
