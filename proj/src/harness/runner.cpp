#include "diagcap/harness/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "diagcap/dataset.hpp"
#include "diagcap/vqa.hpp"

namespace diagcap::harness {

std::string_view to_string(Task t) { return t == Task::Caption ? "caption" : "vqa"; }

Task task_from_string(std::string_view s) {
  if (s == "caption") return Task::Caption;
  if (s == "vqa") return Task::Vqa;
  throw Error("unknown task '" + std::string(s) + "' (expected caption or vqa)");
}

namespace {

template <typename Fn>
void for_each_json_line(const fs::path& file, Fn&& fn) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      if (in.peek() == EOF) return;  // torn write at the end of an interrupted run
      throw Error(file.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    fn(j);
  }
}

}  // namespace

std::vector<QueryItem> load_query_items(const fs::path& corpus, Task task) {
  std::vector<QueryItem> items;
  if (task == Task::Caption) {
    for_each_json_line(corpus / "eval_captions.jsonl", [&](const nlohmann::json& j) {
      items.push_back({j.at("diagram_id").get<std::string>(), std::string(dataset::kParsingPrompt),
                       j.at("image").get<std::string>()});
    });
  } else {
    for_each_json_line(corpus / "questions.jsonl", [&](const nlohmann::json& j) {
      const auto item = vqa::question_from_json(j);
      items.push_back({item.item_id, vqa::prompt_for(item), "images/" + item.diagram_id + ".svg"});
    });
  }
  std::sort(items.begin(), items.end(), [](const QueryItem& a, const QueryItem& b) { return a.id < b.id; });
  return items;
}

nlohmann::ordered_json response_to_json(Task task, const ResponseLine& r) {
  nlohmann::ordered_json j;
  j[task == Task::Caption ? "diagram_id" : "item_id"] = r.id;
  j[task == Task::Caption ? "caption_text" : "response_text"] = r.text;
  j["status"] = r.ok ? "ok" : "failed";
  j["attempts"] = r.attempts;
  if (!r.ok) j["error"] = r.error;
  return j;
}

ResponseLine response_from_json(const nlohmann::json& j) {
  ResponseLine r;
  if (j.contains("item_id")) {
    r.id = j.at("item_id").get<std::string>();
    r.text = j.value("response_text", "");
  } else if (j.contains("diagram_id")) {
    r.id = j.at("diagram_id").get<std::string>();
    r.text = j.value("caption_text", "");
  } else {
    throw Error("response line has neither item_id nor diagram_id");
  }
  r.ok = j.value("status", "ok") == "ok";
  r.attempts = j.value("attempts", 0);
  r.error = j.value("error", "");
  return r;
}

std::map<std::string, ResponseLine> read_responses(const fs::path& file) {
  std::map<std::string, ResponseLine> out;
  for_each_json_line(file, [&](const nlohmann::json& j) {
    auto r = response_from_json(j);
    out[r.id] = std::move(r);
  });
  return out;
}

std::size_t RunRecord::completed() const {
  return static_cast<std::size_t>(std::count_if(responses.begin(), responses.end(), [](auto& r) { return r.ok; }));
}

std::size_t RunRecord::failed() const { return responses.size() - completed(); }

nlohmann::ordered_json RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["corpus_id"] = corpus_id;
  j["model_name"] = model_name;
  j["task"] = to_string(task);
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["total_items"] = total_items;
  j["completed"] = completed();
  j["failed"] = failed();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : responses) arr.push_back(response_to_json(task, r));
  j["responses"] = std::move(arr);
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunRecord run_query(const fs::path& corpus, const fs::path& run_dir, ModelEndpoint& endpoint, const RunOptions& opts) {
  if (opts.max_in_flight < 1) throw Error("max_in_flight must be at least 1");
  RunRecord record;
  record.run_id = opts.run_id;
  record.model_name = opts.model_name;
  record.task = opts.task;
  record.started_at = utc_timestamp();
  record.corpus_id =
      nlohmann::json::parse(dataset::read_file(corpus / "manifest.json")).at("corpus_id").get<std::string>();

  const auto items = load_query_items(corpus, opts.task);
  record.total_items = items.size();
  fs::create_directories(run_dir);
  const fs::path responses_file = run_dir / "responses.jsonl";

  std::map<std::string, ResponseLine> done;
  if (fs::exists(responses_file)) {
    if (!opts.resume)
      throw Error("run directory " + run_dir.string() + " already has responses; pass --resume to continue it");
    done = read_responses(responses_file);
  }

  std::vector<const QueryItem*> pending;
  for (const auto& item : items) {
    auto it = done.find(item.id);
    if (it == done.end() || !it->second.ok) pending.push_back(&item);
  }
  if (opts.limit > 0 && pending.size() > opts.limit) pending.resize(opts.limit);

  std::ofstream out(responses_file, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot write " + responses_file.string());
  std::mutex write_mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const QueryItem& item = *pending[k];
      ResponseLine r{item.id, false, "", "", 0};
      std::string svg;
      bool have_image = true;
      try {
        svg = dataset::read_file(corpus / item.image);
      } catch (const Error& e) {
        r.error = e.what();
        have_image = false;
      }
      for (int attempt = 1; have_image && attempt <= opts.retries + 1; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(backoff_delay(opts.backoff_initial_seconds, attempt - 1));
        r.attempts = attempt;
        try {
          r.text = endpoint.complete(item.prompt, svg);
          r.ok = true;
          r.error.clear();
          break;
        } catch (const std::exception& e) {
          r.error = e.what();
        }
      }
      const std::string line = response_to_json(opts.task, r).dump() + "\n";
      std::lock_guard lock(write_mu);
      out << line;
      out.flush();
      done[r.id] = std::move(r);
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(opts.max_in_flight), pending.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  out.close();

  for (const auto& item : items)
    if (auto it = done.find(item.id); it != done.end()) record.responses.push_back(it->second);
  record.finished_at = utc_timestamp();
  dataset::write_file(run_dir / "run.json", record.to_json().dump(2) + "\n");
  return record;
}

}  // namespace diagcap::harness
