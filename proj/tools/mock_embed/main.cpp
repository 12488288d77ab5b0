// Local OpenAI-compatible embeddings server for trying the remote provider
// without network access.
#include <CLI11.hpp>
#include <csignal>
#include <iostream>
#include <thread>

#include "mock_server.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
  CLI::App app{"reclink mock embeddings server"};
  int port = 8089;
  std::size_t dim = 16;
  bool malformed = false;
  std::string key;
  app.add_option("--port", port, "TCP port on 127.0.0.1 (0 = any)");
  app.add_option("--dim", dim, "Embedding dimension")->check(CLI::Range(2, 4096));
  app.add_flag("--malformed", malformed, "Answer every request with a malformed body");
  app.add_option("--require-key", key, "Only accept this bearer token");
  CLI11_PARSE(app, argc, argv);

  reclink::mock::MockOptions options;
  options.dim = dim;
  options.mode = malformed ? reclink::mock::Mode::kMalformedBody : reclink::mock::Mode::kOk;
  options.required_key = key;
  reclink::mock::MockEmbeddingServer server(options);
  try {
    server.start(port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "serving " << server.endpoint() << "/embeddings\n";
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}
