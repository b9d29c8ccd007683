#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "diagcap/config.hpp"
#include "diagcap/diagram.hpp"

namespace diagcap::synth {

struct LabelVocabulary {
  std::string id;
  std::vector<std::string> start_terminals;
  std::vector<std::string> end_terminals;
  std::vector<std::string> actions;
  std::vector<std::string> conditions;
  std::vector<std::pair<std::string, std::string>> branch_labels;
  std::vector<std::string> participant_names;
  std::vector<std::string> message_labels;

  /// Throws Error if a list is empty or a phrase breaks the label rule.
  void check() const;
};

/// Built-in telecom-flavored vocabulary, id "ict-default".
const LabelVocabulary& default_vocabulary();

/// Plain-text vocabulary: one `[section]` header per field followed by one
/// phrase per line. Sections: id, start_terminals, end_terminals, actions,
/// conditions, branch_labels (written `Yes / No`), participant_names,
/// message_labels.
LabelVocabulary parse_vocabulary(std::string_view text, const std::string& origin = "<vocabulary>");
LabelVocabulary load_vocabulary(const std::filesystem::path& path);

struct GenConfig {
  std::uint64_t seed = 0;
  DiagramKind kind = DiagramKind::Flowchart;
  IntRange node_count_range{5, 12};
  double decision_probability = 0.3;
  double merge_probability = 0.2;  // chance an exit targets an existing node
  IntRange participant_count_range{2, 5};
  IntRange message_count_range{3, 9};
  double skip_over_probability = 0.2;  // chance a message skips over a lifeline
  std::string label_vocabulary = "ict-default";

  /// Throws Error naming the offending field for impossible configurations.
  void check(const LabelVocabulary& vocab) const;
};

/// Reads GenConfig fields from `kv`, each key prefixed by `prefix`
/// (`seed`, `kind`, `node_count`, `decision_probability`,
/// `merge_probability`, `participant_count`, `message_count`,
/// `skip_over_probability`, `label_vocabulary`). Ranges are `lo..hi`.
GenConfig read_gen_config(const KeyValues& kv, const std::string& prefix = "", GenConfig base = {});

/// Retry cap of the rejection loop in generate().
inline constexpr int kMaxAttempts = 100;

/// Deterministic in (cfg, vocab). The result always passes validate().
DiagramAst generate(const GenConfig& cfg, const LabelVocabulary& vocab, std::string diagram_id = "d0");
/// Resolves cfg.label_vocabulary among built-in vocabularies.
DiagramAst generate(const GenConfig& cfg, std::string diagram_id = "d0");

struct CorpusEntry {
  std::string diagram_id;
  DiagramKind kind;
  std::uint64_t seed;
};

struct Corpus {
  std::vector<DiagramAst> diagrams;
  std::vector<CorpusEntry> entries;
};

/// Flowcharts first, then sequence diagrams. Diagram i (over that order) is
/// generated with seed split_seed(cfg.seed, i) and gets the id
/// `<prefix>-fc-NNNNN` or `<prefix>-sd-NNNNN` (1-based per kind).
Corpus generate_corpus(const GenConfig& cfg, const LabelVocabulary& vocab, std::size_t count_flowcharts,
                       std::size_t count_sequences, const std::string& id_prefix = "d");

}  // namespace diagcap::synth
