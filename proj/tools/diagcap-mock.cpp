// diagcap-mock: local chat completion server answering from a corpus.
//
//   diagcap-mock --corpus corpus/desk --mode truth --port 8080

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "diagcap/harness/mock.hpp"

using namespace diagcap;

namespace {
harness::MockServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock OpenAI-compatible chat completion endpoint"};
  harness::MockOptions opts;
  std::string mode = "truth", corpus, host = "127.0.0.1";
  int port = 8080;
  app.add_option("--corpus", corpus, "Corpus directory (truth mode)");
  app.add_option("--mode", mode, "truth, constant or gibberish")
      ->check(CLI::IsMember({"truth", "constant", "gibberish"}))
      ->capture_default_str();
  app.add_option("--text", opts.constant_text, "Reply in constant mode")->capture_default_str();
  app.add_option("--seed", opts.seed, "Seed for gibberish mode");
  app.add_option("--fail-first", opts.fail_first, "Answer the first N requests with HTTP 503");
  app.add_option("--delay-ms", opts.delay_ms, "Per-request delay");
  app.add_option("--host", host)->capture_default_str();
  app.add_option("--port", port, "0 picks a free port")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    opts.mode = harness::mock_mode_from_string(mode);
    opts.corpus = corpus;
    harness::MockServer server(opts);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.run(host, port, [&](int bound) {
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
    });
    std::cout << server.requests() << " requests served, peak " << server.peak_in_flight() << " concurrent\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
