#include "diagcap/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "diagcap/caption.hpp"
#include "diagcap/mermaid.hpp"
#include "diagcap/random.hpp"
#include "diagcap/vqa.hpp"

namespace diagcap::dataset {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::PreSft: return "PreSft";
    case Stage::PostSft: return "PostSft";
    case Stage::InstructionSft: return "InstructionSft";
  }
  return "?";
}

std::string stage_file(Stage s) {
  switch (s) {
    case Stage::PreSft: return "stage1.jsonl";
    case Stage::PostSft: return "stage2.jsonl";
    case Stage::InstructionSft: return "stage3.jsonl";
  }
  return "?";
}

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path.string());
}

StageFragment export_stage(Stage stage, std::vector<SftRecord> records, const fs::path& out_dir) {
  std::sort(records.begin(), records.end(),
            [](const SftRecord& a, const SftRecord& b) { return a.record_id < b.record_id; });
  std::string body;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.stage != stage)
      throw Error("record " + r.record_id + " belongs to " + std::string(to_string(r.stage)) + ", not " +
                  std::string(to_string(stage)));
    if (i > 0 && records[i - 1].record_id == r.record_id) throw Error("duplicate record id " + r.record_id);
    if (!fs::is_regular_file(out_dir / r.image_path))
      throw Error("record " + r.record_id + ": image " + r.image_path + " not found");
    nlohmann::ordered_json j;
    j["record_id"] = r.record_id;
    j["image"] = r.image_path;
    j["prompt"] = r.prompt;
    j["target"] = r.target;
    body += j.dump() + "\n";
  }
  StageFragment frag{stage, stage_file(stage), records.size(), fnv1a64(body)};
  write_file(out_dir / frag.file, body);
  return frag;
}

namespace {

void set_counts(const KeyValues& kv, const std::string& prefix, KindCounts& c) {
  c.flowcharts = static_cast<std::size_t>(kv.get_u64(prefix + ".flowcharts", c.flowcharts));
  c.sequences = static_cast<std::size_t>(kv.get_u64(prefix + ".sequences", c.sequences));
}

}  // namespace

CorpusConfig CorpusConfig::from_keys(const KeyValues& kv) {
  CorpusConfig cfg;
  cfg.corpus_id = kv.get_string("corpus_id", cfg.corpus_id);
  if (!is_identifier(cfg.corpus_id)) throw Error(kv.origin() + ": corpus_id must be an identifier");
  cfg.seed = kv.get_u64("seed", cfg.seed);
  set_counts(kv, "stage1", cfg.stage1);
  set_counts(kv, "stage2", cfg.stage2);
  cfg.stage3_records = static_cast<std::size_t>(kv.get_u64("stage3.records", cfg.stage3_records));
  set_counts(kv, "eval", cfg.eval);
  cfg.eval_single = static_cast<std::size_t>(kv.get_u64("eval.single", cfg.eval_single));
  cfg.eval_multi = static_cast<std::size_t>(kv.get_u64("eval.multi", cfg.eval_multi));
  for (const char* fixed : {"generator.seed", "generator.kind"})
    if (kv.has(fixed)) throw Error(kv.origin() + ": key '" + fixed + "' is assigned per diagram; use 'seed'");
  cfg.generator = synth::read_gen_config(kv, "generator.", cfg.generator);
  cfg.vocabulary_file = kv.get_string("vocabulary_file", cfg.vocabulary_file);
  auto positive = [&](const char* key, double& field) {
    field = kv.get_double(key, field);
    if (!(field > 0)) throw Error(kv.origin() + ": key '" + key + "' must be positive");
  };
  positive("render.canvas_padding", cfg.render.canvas_padding);
  positive("render.node_gap_x", cfg.render.node_gap_x);
  positive("render.node_gap_y", cfg.render.node_gap_y);
  positive("render.font_size", cfg.render.font_size);
  const std::string theme = kv.get_string("render.theme", "light");
  if (theme == "light")
    cfg.render.theme = render::Theme::Light;
  else if (theme == "dark")
    cfg.render.theme = render::Theme::Dark;
  else
    throw Error(kv.origin() + ": render.theme must be 'light' or 'dark'");
  try {
    cfg.render.check();
  } catch (const Error& e) {
    throw Error(kv.origin() + ": " + e.what());
  }
  kv.reject_unused();
  return cfg;
}

CorpusConfig CorpusConfig::load(const fs::path& path) {
  CorpusConfig cfg = from_keys(KeyValues::load(path));
  if (!cfg.vocabulary_file.empty() && fs::path(cfg.vocabulary_file).is_relative())
    cfg.vocabulary_file = (path.parent_path() / cfg.vocabulary_file).string();
  return cfg;
}

CorpusConfig CorpusConfig::full_scale() {
  CorpusConfig cfg;
  cfg.corpus_id = "full";
  cfg.stage1 = {3200, 4033};
  cfg.stage2 = {1100, 1174};
  cfg.stage3_records = 1573;
  return cfg;
}

nlohmann::ordered_json CorpusManifest::to_json() const {
  nlohmann::ordered_json j;
  j["corpus_id"] = corpus_id;
  j["base_seed"] = base_seed;
  j["tool_version"] = tool_version;
  j["vocabulary"] = vocabulary;
  auto stages_json = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json sj;
    sj["stage"] = to_string(s.stage);
    sj["file"] = s.file;
    sj["records"] = s.records;
    sj["flowcharts"] = s.diagrams.flowcharts;
    sj["sequences"] = s.diagrams.sequences;
    sj["provenance"] = s.provenance;
    sj["checksum"] = s.checksum;
    stages_json.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages_json);
  j["eval"] = {{"flowcharts", eval_diagrams.flowcharts},
               {"sequences", eval_diagrams.sequences},
               {"single", eval_single},
               {"multi", eval_multi}};
  j["record_id_checksum"] = record_id_checksum;
  return j;
}

CorpusManifest CorpusManifest::from_json(const nlohmann::json& j) {
  CorpusManifest m;
  m.corpus_id = j.at("corpus_id").get<std::string>();
  m.base_seed = j.at("base_seed").get<std::uint64_t>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.vocabulary = j.at("vocabulary").get<std::string>();
  for (const auto& sj : j.at("stages")) {
    StageSummary s;
    const auto name = sj.at("stage").get<std::string>();
    if (name == "PreSft")
      s.stage = Stage::PreSft;
    else if (name == "PostSft")
      s.stage = Stage::PostSft;
    else if (name == "InstructionSft")
      s.stage = Stage::InstructionSft;
    else
      throw Error("manifest: unknown stage '" + name + "'");
    s.file = sj.at("file").get<std::string>();
    s.records = sj.at("records").get<std::size_t>();
    s.diagrams = {sj.at("flowcharts").get<std::size_t>(), sj.at("sequences").get<std::size_t>()};
    s.provenance = sj.at("provenance").get<std::string>();
    s.checksum = sj.at("checksum").get<std::string>();
    m.stages.push_back(std::move(s));
  }
  const auto& e = j.at("eval");
  m.eval_diagrams = {e.at("flowcharts").get<std::size_t>(), e.at("sequences").get<std::size_t>()};
  m.eval_single = e.at("single").get<std::size_t>();
  m.eval_multi = e.at("multi").get<std::size_t>();
  m.record_id_checksum = j.at("record_id_checksum").get<std::string>();
  return m;
}

fs::path corpus_dir(const fs::path& root, const std::string& corpus_id) { return root / corpus_id; }

namespace {

/// Writes the Mermaid source, SVG, and caption of one diagram; returns the caption.
class DiagramWriter {
 public:
  DiagramWriter(const fs::path& dir, const render::RenderConfig& rc) : dir_(dir), rc_(rc) {
    for (const char* sub : {"mermaid", "images", "captions"}) fs::create_directories(dir_ / sub);
  }

  std::string emit(const DiagramAst& ast) {
    const auto& id = ast.diagram_id;
    write_file(dir_ / "mermaid" / (id + ".mmd"), mermaid::serialize(ast));
    write_file(dir_ / "images" / (id + ".svg"), render::render(ast, rc_));
    std::string text = caption::caption(ast).full_text;
    write_file(dir_ / "captions" / (id + ".txt"), text + "\n");
    return text;
  }

  static std::string image_of(const std::string& id) { return "images/" + id + ".svg"; }

 private:
  fs::path dir_;
  const render::RenderConfig& rc_;
};

std::string ordinal_id(const std::string& prefix, DiagramKind kind, std::size_t ordinal) {
  char number[32];
  std::snprintf(number, sizeof number, "%05zu", ordinal);
  return prefix + (kind == DiagramKind::Flowchart ? "-fc-" : "-sd-") + number;
}

KindCounts count_kinds(const std::vector<DiagramAst>& ds) {
  KindCounts c;
  for (const auto& d : ds) (d.kind() == DiagramKind::Flowchart ? c.flowcharts : c.sequences)++;
  return c;
}

}  // namespace

CorpusManifest build_all(const CorpusConfig& cfg, const fs::path& root) {
  const synth::LabelVocabulary vocab = cfg.vocabulary_file.empty() ? synth::LabelVocabulary{} : synth::load_vocabulary(cfg.vocabulary_file);
  const synth::LabelVocabulary& v = cfg.vocabulary_file.empty() ? synth::default_vocabulary() : vocab;
  if (cfg.vocabulary_file.empty() && cfg.generator.label_vocabulary != v.id)
    throw Error("unknown built-in vocabulary '" + cfg.generator.label_vocabulary + "'");
  cfg.generator.check(v);
  cfg.render.check();

  const fs::path dir = corpus_dir(root, cfg.corpus_id);
  fs::remove_all(dir);
  fs::create_directories(dir);
  DiagramWriter writer(dir, cfg.render);

  auto stage_gen = [&](std::uint64_t stream) {
    synth::GenConfig g = cfg.generator;
    g.seed = split_seed(cfg.seed, stream);
    return g;
  };

  CorpusManifest manifest;
  manifest.corpus_id = cfg.corpus_id;
  manifest.base_seed = cfg.seed;
  manifest.tool_version = kToolVersion;
  manifest.vocabulary = v.id;
  std::vector<std::string> all_ids;

  // Stages 1 and 2: caption pairs. Stage 2 stands in for expert annotations
  // and uses its own seed stream.
  std::set<std::uint64_t> stage1_seeds;
  for (Stage stage : {Stage::PreSft, Stage::PostSft}) {
    const bool pre = stage == Stage::PreSft;
    const KindCounts& counts = pre ? cfg.stage1 : cfg.stage2;
    const auto corpus =
        synth::generate_corpus(stage_gen(pre ? 1 : 2), v, counts.flowcharts, counts.sequences, pre ? "s1" : "s2");
    for (const auto& e : corpus.entries) {
      if (pre)
        stage1_seeds.insert(e.seed);
      else if (stage1_seeds.count(e.seed))
        throw Error("stage 2 seed collides with stage 1 (diagram " + e.diagram_id + ")");
    }
    std::vector<SftRecord> records;
    for (const auto& ast : corpus.diagrams) {
      const std::string text = writer.emit(ast);
      records.push_back({ast.diagram_id, stage, DiagramWriter::image_of(ast.diagram_id), std::string(kParsingPrompt), text});
    }
    const auto frag = export_stage(stage, records, dir);
    for (const auto& r : records) all_ids.push_back(r.record_id);
    manifest.stages.push_back(
        {stage, frag.file, frag.records, count_kinds(corpus.diagrams), pre ? "synthetic" : "synthetic-surrogate",
         frag.checksum});
  }

  // Stage 3: one question per diagram; every third record is multiple-choice,
  // diagram kinds alternate.
  {
    const std::uint64_t stream = split_seed(cfg.seed, 3);
    std::vector<SftRecord> records;
    std::vector<DiagramAst> diagrams;
    std::size_t fc = 0, sd = 0;
    for (std::size_t i = 0; i < cfg.stage3_records; ++i) {
      const bool multi = i % 3 == 2;
      synth::GenConfig g = cfg.generator;
      g.kind = i % 2 == 0 ? DiagramKind::Flowchart : DiagramKind::Sequence;
      const std::string id = ordinal_id("s3", g.kind, g.kind == DiagramKind::Flowchart ? ++fc : ++sd);
      std::optional<DiagramAst> ast;
      std::vector<vqa::QaItem> items;
      for (int attempt = 0; attempt < synth::kMaxAttempts && !ast; ++attempt) {
        g.seed = split_seed(split_seed(stream, i), static_cast<std::uint64_t>(attempt));
        DiagramAst candidate = synth::generate(g, v, id);
        try {
          items = vqa::make_questions(candidate, split_seed(g.seed, 0), multi ? 0 : 1, multi ? 1 : 0);
          ast = std::move(candidate);
        } catch (const Error&) {
          // Diagram lacks the structure for this question kind; draw another.
        }
      }
      if (!ast)
        throw Error("stage 3 record " + std::to_string(i + 1) + ": no generated diagram supports a " +
                    (multi ? "multiple" : "single") + "-choice question within " +
                    std::to_string(synth::kMaxAttempts) + " attempts");
      writer.emit(*ast);
      const auto& item = items.front();
      records.push_back({item.item_id, Stage::InstructionSft, DiagramWriter::image_of(ast->diagram_id),
                         vqa::prompt_for(item), vqa::answer_text(item.correct)});
      diagrams.push_back(std::move(*ast));
    }
    const auto frag = export_stage(Stage::InstructionSft, records, dir);
    for (const auto& r : records) all_ids.push_back(r.record_id);
    manifest.stages.push_back(
        {Stage::InstructionSft, frag.file, frag.records, count_kinds(diagrams), "synthetic", frag.checksum});
  }

  // Evaluation split: questions, answer key, and caption references.
  {
    const auto corpus = synth::generate_corpus(stage_gen(4), v, cfg.eval.flowcharts, cfg.eval.sequences, "ev");
    std::string captions;
    for (const auto& ast : corpus.diagrams) {
      const std::string text = writer.emit(ast);
      nlohmann::ordered_json j;
      j["diagram_id"] = ast.diagram_id;
      j["image"] = DiagramWriter::image_of(ast.diagram_id);
      j["reference"] = text;
      captions += j.dump() + "\n";
    }
    write_file(dir / "eval_captions.jsonl", captions);

    auto set = vqa::build_eval_set(corpus.diagrams, split_seed(cfg.seed, 5), cfg.eval_single, cfg.eval_multi);
    std::sort(set.items.begin(), set.items.end(),
              [](const vqa::QaItem& a, const vqa::QaItem& b) { return a.item_id < b.item_id; });
    std::string questions;
    for (const auto& item : set.items) questions += vqa::question_to_json(item).dump() + "\n";
    write_file(dir / "questions.jsonl", questions);
    write_file(dir / "answer_key.json", vqa::key_to_json(set.key).dump(2) + "\n");
    manifest.eval_diagrams = count_kinds(corpus.diagrams);
    manifest.eval_single = set.key.single_total;
    manifest.eval_multi = set.key.multi_total;
  }

  std::string joined;
  for (std::size_t i = 0; i < all_ids.size(); ++i) {
    if (i) joined += "\n";
    joined += all_ids[i];
  }
  manifest.record_id_checksum = fnv1a64(joined);
  write_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace diagcap::dataset
