#include "diagcap/harness/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "diagcap/dataset.hpp"
#include "diagcap/mermaid.hpp"
#include "diagcap/metrics.hpp"
#include "diagcap/vqa.hpp"

namespace diagcap::harness {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::vector<nlohmann::json> json_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

std::string corpus_id_of(const fs::path& corpus) {
  return nlohmann::json::parse(dataset::read_file(corpus / "manifest.json")).at("corpus_id").get<std::string>();
}

ScoreReport score_captions(const fs::path& corpus, const LoadedResponses& responses) {
  std::map<std::string, std::vector<std::string>> refs;
  for (const auto& j : json_lines(corpus / "eval_captions.jsonl"))
    refs[j.at("diagram_id").get<std::string>()] = {j.at("reference").get<std::string>()};
  std::map<std::string, std::string> cands;
  for (const auto& [id, r] : responses.lines) cands[id] = r.ok ? r.text : std::string();
  const auto scores = metrics::score_corpus(cands, refs);

  ScoreReport rep;
  rep.task = Task::Caption;
  auto& j = rep.json;
  j["task"] = "caption";
  j["corpus_id"] = corpus_id_of(corpus);
  j["items"] = scores.items.size();
  j["failed"] = std::count_if(responses.lines.begin(), responses.lines.end(), [](auto& kv) { return !kv.second.ok; });
  j["bleu"] = scores.mean.bleu;
  j["meteor"] = scores.mean.meteor;
  j["cider"] = scores.mean.cider;
  auto per_item = nlohmann::ordered_json::array();
  for (const auto& [id, s] : scores.items)
    per_item.push_back({{"diagram_id", id}, {"bleu", s.bleu}, {"meteor", s.meteor}, {"cider", s.cider}});
  j["per_item"] = std::move(per_item);

  rep.table = pad("metric", 10) + "value\n";
  rep.table += pad("items", 10) + std::to_string(scores.items.size()) + "\n";
  rep.table += pad("BLEU", 10) + fixed(scores.mean.bleu, 4) + "\n";
  rep.table += pad("METEOR", 10) + fixed(scores.mean.meteor, 4) + "\n";
  rep.table += pad("CIDEr", 10) + fixed(scores.mean.cider, 4) + "\n";
  return rep;
}

ScoreReport score_vqa(const fs::path& corpus, const LoadedResponses& responses) {
  std::vector<vqa::QaItem> items;
  for (const auto& j : json_lines(corpus / "questions.jsonl")) items.push_back(vqa::question_from_json(j));
  const auto key = vqa::key_from_json(nlohmann::json::parse(dataset::read_file(corpus / "answer_key.json")));
  std::string unknown;
  for (const auto& [id, r] : responses.lines)
    if (!key.answers.count(id)) unknown += " " + id;
  if (!unknown.empty()) throw Error("responses for items not in the answer key:" + unknown);
  std::map<std::string, std::string> texts;
  for (const auto& [id, r] : responses.lines)
    if (r.ok) texts[id] = r.text;
  const auto scored = metrics::score_answers(texts, key, items);
  const auto& a = scored.report;

  ScoreReport rep;
  rep.task = Task::Vqa;
  rep.warnings = scored.warnings;
  auto& j = rep.json;
  j["task"] = "vqa";
  j["corpus_id"] = corpus_id_of(corpus);
  j["a_s_r"] = a.a_s_r;
  j["a_s_t"] = a.a_s_t;
  j["a_m_r"] = a.a_m_r;
  j["a_m_t"] = a.a_m_t;
  j["prec_s"] = metrics::round1(a.prec_s);
  j["prec_m"] = metrics::round1(a.prec_m);
  j["prec_a"] = metrics::round1(a.prec_a);
  j["prec_unrounded"] = {{"prec_s", a.prec_s}, {"prec_m", a.prec_m}, {"prec_a", a.prec_a}};
  j["random_guess_prec_a"] = metrics::round1(metrics::random_guess_prec_a(a.a_s_t, a.a_m_t));
  j["missing_or_failed"] = key.answers.size() - texts.size() + scored.warnings.size();
  j["warnings"] = scored.warnings;

  auto row = [](const std::string& name, std::size_t r, std::size_t t, double p) {
    return pad(name, 8) + pad(std::to_string(r), 9) + pad(std::to_string(t), 7) + fixed(metrics::round1(p), 1) + "%\n";
  };
  rep.table = pad("", 8) + pad("correct", 9) + pad("total", 7) + "precision\n";
  rep.table += row("single", a.a_s_r, a.a_s_t, a.prec_s);
  rep.table += row("multi", a.a_m_r, a.a_m_t, a.prec_m);
  rep.table += row("all", a.a_s_r + a.a_m_r, a.a_s_t + a.a_m_t, a.prec_a);
  return rep;
}

}  // namespace

LoadedResponses load_responses(const fs::path& path) {
  LoadedResponses out;
  fs::path file = path;
  std::optional<Task> task;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "run.json"))
      task = task_from_string(nlohmann::json::parse(dataset::read_file(path / "run.json")).at("task").get<std::string>());
    file = path / "responses.jsonl";
  } else if (path.filename() == "run.json") {
    const auto j = nlohmann::json::parse(dataset::read_file(path));
    out.task = task_from_string(j.at("task").get<std::string>());
    for (const auto& r : j.at("responses")) {
      auto line = response_from_json(r);
      out.lines[line.id] = std::move(line);
    }
    return out;
  }
  out.lines = read_responses(file);
  if (!task) {
    // Infer from the first line's keys.
    const auto lines = json_lines(file);
    task = !lines.empty() && lines.front().contains("diagram_id") ? Task::Caption : Task::Vqa;
  }
  out.task = *task;
  return out;
}

ScoreReport score_responses(const fs::path& corpus, const LoadedResponses& responses) {
  return responses.task == Task::Caption ? score_captions(corpus, responses) : score_vqa(corpus, responses);
}

CorpusCheck validate_corpus(const fs::path& corpus) {
  CorpusCheck check;
  const fs::path dir = corpus / "mermaid";
  if (!fs::is_directory(dir)) throw Error("no mermaid/ directory in " + corpus.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".mmd") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    ++check.diagrams;
    const std::string text = dataset::read_file(f);
    const auto result = mermaid::parse({text, std::nullopt}, f.stem().string());
    for (const auto& d : result.diagnostics)
      if (d.severity == mermaid::Severity::Error) check.problems.push_back(f.filename().string() + ":" + d.to_string());
    if (result.ast && mermaid::serialize(*result.ast) != text)
      check.problems.push_back(f.filename().string() + ": not in canonical form");
  }
  return check;
}

}  // namespace diagcap::harness
