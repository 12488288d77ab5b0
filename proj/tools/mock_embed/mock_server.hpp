#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace reclink::mock {

enum class Mode {
  kOk,
  kMalformedBody,   // 200 with a body that is not the embeddings schema
  kHttpError,       // 500
  kDimensionDrift,  // second and later requests use a different dimension
};

struct MockOptions {
  std::size_t dim = 16;
  Mode mode = Mode::kOk;
  // Return data items in reverse order so clients must honour "index".
  bool reverse_order = true;
  // Multiply each vector by (1 + position) so clients must re-normalize.
  bool unnormalized = true;
  std::string required_key;  // empty: accept any bearer token
};

using EmbedFn = std::function<std::vector<double>(const std::string&, std::size_t dim)>;

// Deterministic text -> vector map: hashed character trigrams.
std::vector<double> hashed_trigram_embedding(const std::string& text, std::size_t dim);

struct RecordedRequest {
  std::string authorization;
  std::string request_id;
  std::string model;
  std::vector<std::string> inputs;
};

// Serves POST {base}/embeddings on 127.0.0.1 in a background thread.
class MockEmbeddingServer {
 public:
  explicit MockEmbeddingServer(MockOptions options = {}, EmbedFn embed = hashed_trigram_embedding,
                               std::string base_path = "/v1");
  ~MockEmbeddingServer();
  MockEmbeddingServer(const MockEmbeddingServer&) = delete;
  MockEmbeddingServer& operator=(const MockEmbeddingServer&) = delete;

  // Binds to `port` (0: any free port) and starts serving.
  void start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;  // http://127.0.0.1:<port><base>

  void set_mode(Mode mode);
  std::vector<RecordedRequest> requests() const;

 private:
  MockOptions options_;
  EmbedFn embed_;
  std::string base_path_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::vector<RecordedRequest> requests_;
};

}  // namespace reclink::mock
