#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "diagcap/harness/endpoint.hpp"

namespace httplib {
class Server;
}

namespace diagcap::harness {

enum class MockMode {
  Truth,      // ground-truth caption or answer from the corpus
  Constant,   // the same text for every request
  Gibberish,  // seeded random lowercase words, never a standalone letter
};

MockMode mock_mode_from_string(std::string_view s);

struct MockOptions {
  MockMode mode = MockMode::Truth;
  std::filesystem::path corpus;  // required for Truth
  std::string constant_text = "A";
  std::uint64_t seed = 0;
  int fail_first = 0;  // answer the first N requests with HTTP 503
  int delay_ms = 0;    // per-request service time
};

/// Local OpenAI-compatible chat completion server for tests and dry runs.
/// Counts requests and records the peak number served concurrently.
class MockServer {
 public:
  explicit MockServer(MockOptions opts);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 = any free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop() is called;
  /// `on_bound` receives the bound port before serving starts.
  void run(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t requests() const { return requests_.load(); }
  int peak_in_flight() const { return peak_.load(); }

  /// Reply text for one request; exposed for tests.
  std::string reply(const ChatParts& parts) const;

 private:
  void install_routes();
  void load_truth();

  MockOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::string host_ = "127.0.0.1";
  std::atomic<std::size_t> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::map<std::string, std::string> vqa_answers_;  // prompt -> "Answer: ..."
};

}  // namespace diagcap::harness
