// diagcap: build corpora, query model endpoints, score runs, validate corpora.
//
//   diagcap build --config desk.cfg --out corpus/
//   diagcap query --corpus corpus/desk --endpoint http://127.0.0.1:8080 --task vqa
//   diagcap score corpus/desk/runs/run --corpus corpus/desk
//   diagcap validate --corpus corpus/desk
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "diagcap/dataset.hpp"
#include "diagcap/harness/commands.hpp"
#include "diagcap/harness/endpoint.hpp"
#include "diagcap/harness/runner.hpp"

namespace fs = std::filesystem;
using namespace diagcap;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct BuildArgs {
  std::string config;
  std::string out = "corpus";
  std::optional<std::uint64_t> seed;
  bool full_scale = false;
};

struct QueryArgs {
  std::string corpus;
  std::string endpoint;
  std::string task = "vqa";
  std::string run_id = "run";
  std::string out;
  std::optional<std::string> model;
  std::size_t limit = 0;
  bool resume = false;
};

struct ScoreArgs {
  std::string responses;
  std::string corpus;
  std::string out;
};

int cmd_build(const BuildArgs& a) {
  dataset::CorpusConfig cfg = a.full_scale ? dataset::CorpusConfig::full_scale() : dataset::CorpusConfig{};
  if (!a.config.empty()) {
    if (a.full_scale) throw CLI::ValidationError("--full-scale and --config are exclusive");
    cfg = dataset::CorpusConfig::load(a.config);
  }
  if (a.seed) cfg.seed = *a.seed;
  const auto m = dataset::build_all(cfg, a.out);
  std::cout << "corpus " << m.corpus_id << " written to " << dataset::corpus_dir(a.out, m.corpus_id).string() << "\n";
  for (const auto& s : m.stages)
    std::cout << "  " << s.file << ": " << s.records << " records (" << s.diagrams.flowcharts << " flowcharts, "
              << s.diagrams.sequences << " signal diagrams, " << s.provenance << ")\n";
  std::cout << "  eval: " << m.eval_single << " single + " << m.eval_multi << " multi questions over "
            << m.eval_diagrams.total() << " diagrams\n";
  std::cout << "  record ids " << m.record_id_checksum << "\n";
  return kOk;
}

int cmd_query(const QueryArgs& a) {
  auto ep = harness::EndpointConfig::resolve(a.endpoint);
  if (a.model) ep.model_name = *a.model;
  harness::HttpEndpoint endpoint(ep);
  harness::RunOptions opts;
  opts.run_id = a.run_id;
  opts.task = harness::task_from_string(a.task);
  opts.resume = a.resume;
  opts.limit = a.limit;
  opts.max_in_flight = ep.max_in_flight;
  opts.retries = ep.retries;
  opts.backoff_initial_seconds = ep.backoff_initial_seconds;
  opts.model_name = ep.model_name;
  const fs::path runs_root = a.out.empty() ? fs::path(a.corpus) / "runs" : fs::path(a.out);
  const fs::path run_dir = runs_root / a.run_id;
  const auto record = harness::run_query(a.corpus, run_dir, endpoint, opts);
  std::cout << "run " << record.run_id << ": " << record.completed() << " answered, " << record.failed()
            << " failed, " << record.total_items - record.responses.size() << " not queried\n";
  std::cout << "responses in " << (run_dir / "responses.jsonl").string() << "\n";
  if (!record.responses.empty() && record.completed() == 0) {
    std::cerr << "error: every queried item failed";
    for (const auto& r : record.responses)
      if (!r.error.empty()) {
        std::cerr << " (last error: " << r.error << ")";
        break;
      }
    std::cerr << "\n";
    return kFailure;
  }
  return kOk;
}

int cmd_score(const ScoreArgs& a) {
  const auto responses = harness::load_responses(a.responses);
  const auto report = harness::score_responses(a.corpus, responses);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  fs::path out = a.out;
  if (out.empty()) out = (fs::is_directory(a.responses) ? fs::path(a.responses) : fs::path(a.responses).parent_path()) / "report.json";
  dataset::write_file(out, report.json.dump(2) + "\n");
  std::cout << report.table;
  std::cout << "report written to " << out.string() << "\n";
  return kOk;
}

int cmd_validate(const std::string& corpus) {
  const auto check = harness::validate_corpus(corpus);
  for (const auto& p : check.problems) std::cerr << p << "\n";
  std::cout << check.diagrams << " diagrams checked, " << check.problems.size() << " problems\n";
  return check.problems.empty() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic diagram caption and question corpora, model querying, and scoring"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Generate a corpus (diagrams, images, captions, SFT files, eval set)");
  b->add_option("--config", build.config, "Corpus config file (key = value)")->check(CLI::ExistingFile);
  b->add_option("--out", build.out, "Output root; the corpus goes to <out>/<corpus_id>")->capture_default_str();
  b->add_option("--seed", build.seed, "Override the base seed");
  b->add_flag("--full-scale", build.full_scale, "Use the full training-set sizes instead of a config file");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Send corpus items to a chat completion endpoint");
  q->add_option("--corpus", query.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  q->add_option("--endpoint", query.endpoint, "Endpoint URL or endpoint config file")->required();
  q->add_option("--task", query.task, "caption or vqa")->check(CLI::IsMember({"caption", "vqa"}))->capture_default_str();
  q->add_option("--run-id", query.run_id, "Run name")->capture_default_str();
  q->add_option("--out", query.out, "Runs root (default <corpus>/runs)");
  q->add_option("--model", query.model, "Model name sent with each request");
  q->add_option("--limit", query.limit, "Query at most N pending items");
  q->add_flag("--resume", query.resume, "Continue an interrupted run, skipping answered items");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score a run or responses file");
  s->add_option("responses", score.responses, "Run directory, run.json, or responses .jsonl")->required()->check(CLI::ExistingPath);
  s->add_option("--corpus", score.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--out", score.out, "Report path (default: report.json beside the responses)");

  std::string validate_corpus;
  auto* v = app.add_subcommand("validate", "Parse and validate every diagram of a corpus");
  v->add_option("--corpus", validate_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*b) return cmd_build(build);
    if (*q) return cmd_query(query);
    if (*s) return cmd_score(score);
    if (*v) return cmd_validate(validate_corpus);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
