#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "reclink/encoder.hpp"
#include "reclink/error.hpp"

namespace reclink {

namespace remote {

std::string build_request_body(std::string_view model,
                               std::span<const SerializedRecord> texts) {
  nlohmann::json input = nlohmann::json::array();
  for (const auto& t : texts) input.push_back(t.text);
  nlohmann::ordered_json body{{"model", model}, {"input", std::move(input)}};
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<std::vector<double>> parse_response_body(std::string_view body,
                                                     std::size_t expected) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError(std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw ProviderError("response has no \"data\" array");
  }
  const auto& data = doc["data"];
  if (data.size() != expected) {
    throw ProviderError("response has " + std::to_string(data.size()) +
                        " embeddings for " + std::to_string(expected) + " inputs");
  }
  std::vector<std::vector<double>> rows(expected);
  std::vector<bool> seen(expected, false);
  std::size_t dim = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw ProviderError("data[" + std::to_string(i) + "] has no embedding array");
    }
    // Responses without "index" are taken in order.
    std::size_t index = i;
    if (item.contains("index")) {
      if (!item["index"].is_number_integer()) {
        throw ProviderError("data[" + std::to_string(i) + "].index is not an integer");
      }
      const auto raw = item["index"].get<std::int64_t>();
      if (raw < 0 || static_cast<std::size_t>(raw) >= expected) {
        throw ProviderError("data[" + std::to_string(i) + "].index out of range");
      }
      index = static_cast<std::size_t>(raw);
    }
    if (seen[index]) throw ProviderError("duplicate index " + std::to_string(index));
    seen[index] = true;

    const auto& emb = item["embedding"];
    if (emb.empty()) throw ProviderError("empty embedding at index " + std::to_string(index));
    if (dim == 0) dim = emb.size();
    if (emb.size() != dim) {
      throw ProviderError("embedding dimension mismatch within response (" +
                          std::to_string(emb.size()) + " vs " + std::to_string(dim) + ")");
    }
    auto& row = rows[index];
    row.reserve(dim);
    for (const auto& v : emb) {
      if (!v.is_number()) throw ProviderError("non-numeric embedding value");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ProviderError("non-finite embedding value");
      row.push_back(x);
    }
  }
  return rows;
}

Endpoint split_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw UserError("endpoint '" + std::string(url) + "' must start with http:// or https://");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw UserError("unsupported endpoint scheme '" + std::string(scheme) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    ep.base_path = std::string(url.substr(path_start));
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  }
  if (ep.origin.size() <= scheme_end + 3) throw UserError("endpoint has no host");
  return ep;
}

}  // namespace remote

RemoteProvider::RemoteProvider(RemoteProviderSpec spec, std::string api_key)
    : spec_(std::move(spec)), api_key_(std::move(api_key)) {
  if (spec_.batch_size == 0) throw UserError("remote batch size must be >= 1");
  remote::split_endpoint(spec_.endpoint);
}

std::string RemoteProvider::describe() const {
  return "remote(" + spec_.model + "@" + spec_.endpoint + ")";
}

EmbeddingMatrix RemoteProvider::embed(std::span<const SerializedRecord> texts) {
  const auto ep = remote::split_endpoint(spec_.endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(spec_.timeout_seconds, 0);
  client.set_read_timeout(spec_.timeout_seconds, 0);
  client.set_write_timeout(spec_.timeout_seconds, 0);
  const std::string path = ep.base_path + "/embeddings";

  std::vector<std::vector<double>> all;
  all.reserve(texts.size());
  std::size_t dim = 0;
  for (std::size_t start = 0, batch = 0; start < texts.size();
       start += spec_.batch_size, ++batch) {
    const auto count = std::min(spec_.batch_size, texts.size() - start);
    const auto chunk = texts.subspan(start, count);
    const std::string request_id = "reclink-" + std::to_string(batch);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_},
                             {"X-Request-Id", request_id}};
    const auto ctx = [&](const std::string& what) {
      return ProviderError("embeddings request " + request_id + " to " + spec_.endpoint +
                           " failed: " + what);
    };

    auto res = client.Post(path, headers, remote::build_request_body(spec_.model, chunk),
                           "application/json");
    if (!res) throw ctx(httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ctx("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    std::vector<std::vector<double>> rows;
    try {
      rows = remote::parse_response_body(res->body, count);
    } catch (const ProviderError& e) {
      throw ctx(e.what());
    }
    if (dim == 0) dim = rows.front().size();
    if (rows.front().size() != dim) {
      throw ctx("dimension " + std::to_string(rows.front().size()) +
                " differs from earlier batches (" + std::to_string(dim) + ")");
    }
    for (auto& r : rows) all.push_back(std::move(r));
  }

  if (dim == 0) return EmbeddingMatrix(0, 0);
  if (dim < 2) throw ProviderError("remote embeddings must have dimension >= 2");
  EmbeddingMatrix out(texts.size(), dim);
  for (std::size_t i = 0; i < texts.size(); ++i) out.set_row(i, texts[i].row_id, all[i]);
  return out;
}

}  // namespace reclink
