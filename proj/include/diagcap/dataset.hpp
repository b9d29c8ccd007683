#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diagcap/config.hpp"
#include "diagcap/render.hpp"
#include "diagcap/synth.hpp"

namespace diagcap::dataset {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "diagcap 0.1.0";

/// Instruction paired with every caption record (stages 1 and 2), and sent
/// with each image by the caption query task.
inline constexpr std::string_view kParsingPrompt =
    "Describe this diagram as numbered steps. For a flowchart, state each step and where every branch "
    "leads; for a signal diagram, state each message with its sender and receiver, in order.";

enum class Stage { PreSft, PostSft, InstructionSft };

std::string_view to_string(Stage s);
/// "stage1.jsonl", "stage2.jsonl", "stage3.jsonl".
std::string stage_file(Stage s);

struct SftRecord {
  std::string record_id;
  Stage stage = Stage::PreSft;
  std::string image_path;  // relative to the corpus directory
  std::string prompt;
  std::string target;
};

struct StageFragment {
  Stage stage = Stage::PreSft;
  std::string file;
  std::size_t records = 0;
  std::string checksum;  // FNV-1a 64 of the file bytes
};

/// Writes `<out_dir>/<stage_file(stage)>`, one JSON object per line, sorted by
/// record_id. Throws Error if a record belongs to another stage or its image
/// does not exist under out_dir.
StageFragment export_stage(Stage stage, std::vector<SftRecord> records, const fs::path& out_dir);

/// "fnv1a64:" followed by 16 lowercase hex digits.
std::string fnv1a64(std::string_view bytes);

struct KindCounts {
  std::size_t flowcharts = 0;
  std::size_t sequences = 0;

  std::size_t total() const { return flowcharts + sequences; }
};

struct CorpusConfig {
  std::string corpus_id = "desk";
  std::uint64_t seed = 0;
  KindCounts stage1{25, 25};
  KindCounts stage2{10, 10};
  std::size_t stage3_records = 30;
  KindCounts eval{50, 50};
  std::size_t eval_single = 200;
  std::size_t eval_multi = 100;
  synth::GenConfig generator;  // seed and kind are assigned per diagram
  std::string vocabulary_file;  // empty: built-in vocabulary named by generator.label_vocabulary
  render::RenderConfig render;

  /// Throws Error naming a bad or unknown key.
  static CorpusConfig from_keys(const KeyValues& kv);
  static CorpusConfig load(const fs::path& path);
  /// Stage sizes of the reference training set: 7233 (3200 + 4033), 2274 (1100 + 1174), 1573.
  static CorpusConfig full_scale();
};

struct StageSummary {
  Stage stage = Stage::PreSft;
  std::string file;
  std::size_t records = 0;
  KindCounts diagrams;
  std::string provenance;
  std::string checksum;
};

struct CorpusManifest {
  std::string corpus_id;
  std::uint64_t base_seed = 0;
  std::string tool_version;
  std::string vocabulary;
  std::vector<StageSummary> stages;
  KindCounts eval_diagrams;
  std::size_t eval_single = 0;
  std::size_t eval_multi = 0;
  std::string record_id_checksum;

  nlohmann::ordered_json to_json() const;
  static CorpusManifest from_json(const nlohmann::json& j);
};

/// `<root>/<corpus_id>`.
fs::path corpus_dir(const fs::path& root, const std::string& corpus_id);

/// Generates, renders, captions, and exports all three stages plus the
/// evaluation split into corpus_dir(root, cfg.corpus_id); writes manifest.json.
/// The corpus directory is replaced if it exists.
CorpusManifest build_all(const CorpusConfig& cfg, const fs::path& root);

/// Reads an entire file; throws Error if it cannot be opened.
std::string read_file(const fs::path& path);
/// Writes (truncating) a file; throws Error on failure.
void write_file(const fs::path& path, std::string_view content);

}  // namespace diagcap::dataset
