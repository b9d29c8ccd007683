#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "diagcap/harness/endpoint.hpp"

namespace diagcap::harness {

namespace fs = std::filesystem;

enum class Task { Caption, Vqa };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

struct QueryItem {
  std::string id;     // diagram_id (Caption) or item_id (Vqa)
  std::string prompt;
  std::string image;  // relative to the corpus directory
};

/// Caption: the evaluation diagrams with the parsing prompt. Vqa: every
/// question with its options. Sorted by id.
std::vector<QueryItem> load_query_items(const fs::path& corpus, Task task);

struct ResponseLine {
  std::string id;
  bool ok = false;
  std::string text;
  std::string error;  // last failure, if !ok
  int attempts = 0;

  bool operator==(const ResponseLine&) const = default;
};

/// Caption lines carry {diagram_id, caption_text}, Vqa lines {item_id,
/// response_text}; both add status and attempts.
nlohmann::ordered_json response_to_json(Task task, const ResponseLine& r);
ResponseLine response_from_json(const nlohmann::json& j);

/// Reads a responses file (either key style); later lines for an id replace
/// earlier ones. A truncated final line is ignored.
std::map<std::string, ResponseLine> read_responses(const fs::path& file);

struct RunOptions {
  std::string run_id = "run";
  Task task = Task::Vqa;
  bool resume = false;
  std::size_t limit = 0;  // query at most this many pending items (0 = all)
  int max_in_flight = 4;
  int retries = 3;
  double backoff_initial_seconds = 0.5;
  std::string model_name = "default";
};

struct RunRecord {
  std::string run_id;
  std::string corpus_id;
  std::string model_name;
  Task task = Task::Vqa;
  std::string started_at;
  std::string finished_at;
  std::size_t total_items = 0;
  std::vector<ResponseLine> responses;  // sorted by id

  std::size_t completed() const;
  std::size_t failed() const;
  nlohmann::ordered_json to_json() const;
};

/// Queries every pending item with at most opts.max_in_flight calls
/// outstanding, appending each outcome to <run_dir>/responses.jsonl as soon
/// as it is known, then writes <run_dir>/run.json. Without opts.resume an
/// existing responses file is an error; with it, items already answered are
/// skipped and failed ones are retried.
RunRecord run_query(const fs::path& corpus, const fs::path& run_dir, ModelEndpoint& endpoint, const RunOptions& opts);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace diagcap::harness
