#include "diagcap/harness/mock.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <httplib.h>

#include "diagcap/dataset.hpp"
#include "diagcap/random.hpp"
#include "diagcap/vqa.hpp"

namespace diagcap::harness {

MockMode mock_mode_from_string(std::string_view s) {
  if (s == "truth") return MockMode::Truth;
  if (s == "constant") return MockMode::Constant;
  if (s == "gibberish") return MockMode::Gibberish;
  throw Error("unknown mock mode '" + std::string(s) + "' (expected truth, constant or gibberish)");
}

namespace {

/// Value of the root element's id attribute, or empty.
std::string svg_root_id(const std::string& svg) {
  const auto open = svg.find("<svg");
  if (open == std::string::npos) return {};
  const auto close = svg.find('>', open);
  const auto attr = svg.find(" id=\"", open);
  if (attr == std::string::npos || attr > close) return {};
  const auto start = attr + 5;
  const auto end = svg.find('"', start);
  return end == std::string::npos ? std::string() : svg.substr(start, end - start);
}

std::uint64_t fnv(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Diagram ids become file names; keep the lookup inside captions/.
bool safe_file_stem(const std::string& s) {
  if (s.empty() || s.front() == '.') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

}  // namespace

MockServer::MockServer(MockOptions opts) : opts_(std::move(opts)) {
  if (opts_.mode == MockMode::Truth) load_truth();
}

MockServer::~MockServer() { stop(); }

void MockServer::load_truth() {
  if (opts_.corpus.empty()) throw Error("mock: truth mode needs a corpus directory");
  const auto key = vqa::key_from_json(nlohmann::json::parse(dataset::read_file(opts_.corpus / "answer_key.json")));
  std::ifstream in(opts_.corpus / "questions.jsonl");
  if (!in) throw Error("mock: cannot read questions.jsonl in " + opts_.corpus.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto item = vqa::question_from_json(nlohmann::json::parse(line));
    auto it = key.answers.find(item.item_id);
    if (it == key.answers.end()) throw Error("mock: no key entry for " + item.item_id);
    vqa_answers_[vqa::prompt_for(item)] = vqa::answer_text(it->second);
  }
}

std::string MockServer::reply(const ChatParts& parts) const {
  switch (opts_.mode) {
    case MockMode::Constant: return opts_.constant_text;
    case MockMode::Gibberish: {
      Rng rng(opts_.seed ^ fnv(parts.prompt) ^ (fnv(parts.svg) << 1));
      std::string out;
      const auto words = rng.between(12, 40);
      for (std::int64_t w = 0; w < words; ++w) {
        if (w) out += ' ';
        const auto len = rng.between(3, 9);
        for (std::int64_t k = 0; k < len; ++k) out += static_cast<char>('a' + rng.index(26));
      }
      return out;
    }
    case MockMode::Truth: break;
  }
  if (parts.prompt == dataset::kParsingPrompt) {
    const std::string id = svg_root_id(parts.svg);
    if (!safe_file_stem(id)) return {};
    try {
      std::string text = dataset::read_file(opts_.corpus / "captions" / (id + ".txt"));
      while (!text.empty() && text.back() == '\n') text.pop_back();
      return text;
    } catch (const Error&) {
      return {};
    }
  }
  auto it = vqa_answers_.find(parts.prompt);
  return it == vqa_answers_.end() ? std::string() : it->second;
}

void MockServer::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  server_->Post(R"(.*/v1/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    const int now = ++in_flight_;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    const std::size_t n = ++requests_;
    if (opts_.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opts_.delay_ms));

    if (n <= static_cast<std::size_t>(std::max(0, opts_.fail_first))) {
      res.status = 503;
      res.set_content(R"({"error":{"message":"mock: scheduled failure"}})", "application/json");
    } else {
      try {
        const auto parts = parse_chat_request(nlohmann::json::parse(req.body));
        nlohmann::json body = {
            {"object", "chat.completion"},
            {"choices", nlohmann::json::array({{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", reply(parts)}}},
                                                {"finish_reason", "stop"}}})}};
        res.set_content(body.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
      }
    }
    --in_flight_;
  });
}

int MockServer::start(const std::string& host, int port) {
  install_routes();
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error("mock: cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::run(const std::string& host, int port, const std::function<void(int)>& on_bound) {
  install_routes();
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error("mock: cannot bind " + host + ":" + std::to_string(port));
  if (on_bound) on_bound(port_);
  server_->listen_after_bind();
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace diagcap::harness
