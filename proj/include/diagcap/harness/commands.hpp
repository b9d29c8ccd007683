#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "diagcap/harness/runner.hpp"

namespace diagcap::harness {

struct LoadedResponses {
  Task task = Task::Vqa;
  std::map<std::string, ResponseLine> lines;
};

/// Accepts a run directory, a run.json, or a responses JSON-lines file. The
/// task is read from run.json or inferred from the line keys.
LoadedResponses load_responses(const fs::path& path);

struct ScoreReport {
  Task task = Task::Vqa;
  nlohmann::ordered_json json;  // no timestamps: rescoring is byte-stable
  std::string table;
  std::vector<std::string> warnings;
};

/// Scores responses against the corpus references or answer key. Failed
/// responses count as empty text. Throws Error listing mismatched ids.
ScoreReport score_responses(const fs::path& corpus, const LoadedResponses& responses);

struct CorpusCheck {
  std::size_t diagrams = 0;
  std::vector<std::string> problems;
};

/// Parses and validates every Mermaid file of a corpus and checks that each
/// one is already in canonical form.
CorpusCheck validate_corpus(const fs::path& corpus);

}  // namespace diagcap::harness
