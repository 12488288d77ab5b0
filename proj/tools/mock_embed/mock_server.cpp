#include "mock_server.hpp"

#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "reclink/encoder.hpp"
#include "reclink/textprep.hpp"

namespace reclink::mock {

std::vector<double> hashed_trigram_embedding(const std::string& text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  const auto cps = decode_utf8(text);
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    const auto gram = encode_utf8(std::u32string_view(cps).substr(i, 3));
    const auto h = ngram_hash(gram, 42);
    v[h % dim] += (h >> 63) ? 1.0 : -1.0;
  }
  // Short texts still get a deterministic non-zero vector.
  v[ngram_hash(text, 7) % dim] += 0.5;
  return v;
}

MockEmbeddingServer::MockEmbeddingServer(MockOptions options, EmbedFn embed,
                                         std::string base_path)
    : options_(std::move(options)), embed_(std::move(embed)), base_path_(std::move(base_path)) {}

MockEmbeddingServer::~MockEmbeddingServer() { stop(); }

std::string MockEmbeddingServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + base_path_;
}

void MockEmbeddingServer::set_mode(Mode mode) {
  std::lock_guard lock(mutex_);
  options_.mode = mode;
}

std::vector<RecordedRequest> MockEmbeddingServer::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

void MockEmbeddingServer::start(int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post(base_path_ + "/embeddings", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
    RecordedRequest rec;
    rec.authorization = req.get_header_value("Authorization");
    rec.request_id = req.get_header_value("X-Request-Id");
    MockOptions opts;
    std::size_t request_index = 0;
    {
      std::lock_guard lock(mutex_);
      opts = options_;
      request_index = requests_.size();
    }
    if (!opts.required_key.empty() && rec.authorization != "Bearer " + opts.required_key) {
      res.status = 401;
      res.set_content(R"({"error":"unauthorized"})", "application/json");
      return;
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
      rec.model = body.at("model").get<std::string>();
      rec.inputs = body.at("input").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(rec);
    }

    switch (opts.mode) {
      case Mode::kMalformedBody:
        res.set_content(R"({"data": [{"index": 0, "embedding": "not-a-vector"}]})",
                        "application/json");
        return;
      case Mode::kHttpError:
        res.status = 500;
        res.set_content(R"({"error":"mock failure"})", "application/json");
        return;
      default:
        break;
    }
    const std::size_t dim =
        opts.mode == Mode::kDimensionDrift && request_index > 0 ? opts.dim + 1 : opts.dim;
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
      auto v = embed_(rec.inputs[i], dim);
      if (opts.unnormalized) {
        for (auto& x : v) x *= static_cast<double>(i + 1);
      }
      data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", v}});
    }
    if (opts.reverse_order) {
      nlohmann::json reversed = nlohmann::json::array();
      for (auto it = data.rbegin(); it != data.rend(); ++it) reversed.push_back(*it);
      data = std::move(reversed);
    }
    nlohmann::json out{{"object", "list"}, {"data", data}, {"model", rec.model}};
    res.set_content(out.dump(), "application/json");
  });

  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    if (!server_->bind_to_port("127.0.0.1", port)) port_ = -1;
    else port_ = port;
  }
  if (port_ <= 0) throw std::runtime_error("mock server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockEmbeddingServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace reclink::mock
