#include "reclink/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "reclink/error.hpp"

namespace reclink {

namespace {

constexpr std::string_view kModelMagic = "RECLINK-ENCODER";

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_le64(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t get_le64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

}  // namespace

std::size_t EmbeddingMatrix::num_valid() const {
  std::size_t n = 0;
  for (auto v : valid_) n += v;
  return n;
}

bool EmbeddingMatrix::set_row(std::size_t i, RowId id, std::span<const double> values) {
  row_ids_[i] = id;
  auto out = vectors_.row(i);
  double sq = 0.0;
  bool finite = true;
  for (double v : values) {
    finite = finite && std::isfinite(v);
    sq += v * v;
  }
  if (!finite || !(sq > 0.0) || !std::isfinite(sq)) {
    std::fill(out.begin(), out.end(), 0.0f);
    valid_[i] = 0;
    return false;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<float>(values[j] * inv);
  valid_[i] = 1;
  return true;
}

void EmbeddingMatrix::set_invalid(std::size_t i, RowId id) {
  row_ids_[i] = id;
  auto out = vectors_.row(i);
  std::fill(out.begin(), out.end(), 0.0f);
  valid_[i] = 0;
}

EncoderModel EncoderModel::initialize(const EncoderConfig& config) {
  config.validate();
  Matrix<double> w(config.hash_buckets, config.embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hash_buckets));
  // std::uniform_real_distribution is implementation-defined; scale raw
  // 53-bit draws ourselves so weights match across standard libraries.
  std::mt19937_64 rng(config.seed);
  for (auto& x : w.data) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    x = (2.0 * unit - 1.0) * bound;
  }
  return EncoderModel(config, std::move(w));
}

EncoderModel::EncoderModel(EncoderConfig config, Matrix<double> weights)
    : config_(config), weights_(std::move(weights)) {
  config_.validate();
  if (weights_.rows != config_.hash_buckets || weights_.cols != config_.embed_dim ||
      weights_.data.size() != weights_.rows * weights_.cols) {
    throw UserError("weight matrix shape does not match encoder config");
  }
}

void EncoderModel::project(const SparseFeatures& features, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  double l1 = 0.0;
  for (const auto& f : features) l1 += std::abs(f.count);
  const double scale = 1.0 / std::max(l1, 1.0);
  for (const auto& f : features) {
    const double x = f.count * scale;
    const auto w = weights_.row(f.bucket);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += x * w[j];
  }
}

EmbeddingMatrix embed_batch(const EncoderModel& model,
                            std::span<const SerializedRecord> texts) {
  const auto dim = model.config().embed_dim;
  EmbeddingMatrix out(texts.size(), dim);
  std::vector<double> u(dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto features = featurize(texts[i].text, model.config());
    if (features.empty()) {
      out.set_invalid(i, texts[i].row_id);
      continue;
    }
    model.project(features, u);
    out.set_row(i, texts[i].row_id, u);
  }
  return out;
}

EmbeddingMatrix embed_batch(EmbeddingProvider& provider,
                            std::span<const SerializedRecord> texts) {
  return provider.embed(texts);
}

EmbeddingMatrix BuiltinProvider::embed(std::span<const SerializedRecord> texts) {
  return embed_batch(model_, texts);
}

std::string BuiltinProvider::describe() const {
  const auto& c = model_.config();
  return "builtin(ngrams=" + std::to_string(c.ngram_min) + ".." + std::to_string(c.ngram_max) +
         ", buckets=" + std::to_string(c.hash_buckets) + ", dim=" + std::to_string(c.embed_dim) + ")";
}

void save_model(const EncoderModel& model, const std::filesystem::path& path) {
  const auto& c = model.config();
  const auto& w = model.weights().data;
  std::vector<unsigned char> payload(w.size() * 8);
  for (std::size_t i = 0; i < w.size(); ++i) {
    put_le64(payload.data() + 8 * i, std::bit_cast<std::uint64_t>(w[i]));
  }
  nlohmann::ordered_json header{
      {"format_version", kModelFormatVersion},
      {"ngram_min", c.ngram_min},
      {"ngram_max", c.ngram_max},
      {"hash_buckets", c.hash_buckets},
      {"embed_dim", c.embed_dim},
      {"seed", c.seed},
      {"dtype", "float64-le"},
      {"payload_bytes", payload.size()},
      {"checksum_fnv1a64", hex64(fnv1a(payload.data(), payload.size()))},
  };

  // Write to a sibling temp file and rename so readers never see a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot open '" + tmp.string() + "' for writing");
    out << kModelMagic << '\n' << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw UserError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw UserError("cannot move model into place at '" + path.string() + "': " + ec.message());
}

EncoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open model file '" + path.string() + "'");
  const auto fail = [&](const std::string& what) -> UserError {
    return UserError("invalid model file '" + path.string() + "': " + what);
  };

  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kModelMagic) throw fail("bad magic line");
  if (!std::getline(in, header_line)) throw fail("missing header");

  nlohmann::json header;
  EncoderConfig config;
  std::size_t payload_bytes = 0;
  std::string checksum;
  try {
    header = nlohmann::json::parse(header_line);
    const int version = header.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw fail("unsupported format version " + std::to_string(version));
    }
    if (header.at("dtype").get<std::string>() != "float64-le") throw fail("unsupported dtype");
    config.ngram_min = header.at("ngram_min").get<int>();
    config.ngram_max = header.at("ngram_max").get<int>();
    config.hash_buckets = header.at("hash_buckets").get<std::size_t>();
    config.embed_dim = header.at("embed_dim").get<std::size_t>();
    config.seed = header.at("seed").get<std::uint64_t>();
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
    checksum = header.at("checksum_fnv1a64").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  try {
    config.validate();
  } catch (const UserError& e) {
    throw fail(e.what());
  }
  const std::size_t count = config.hash_buckets * config.embed_dim;
  if (payload_bytes != count * 8) throw fail("payload size does not match shape");

  std::vector<unsigned char> payload(payload_bytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes) throw fail("truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after payload");
  if (hex64(fnv1a(payload.data(), payload.size())) != checksum) throw fail("checksum mismatch");

  Matrix<double> w(config.hash_buckets, config.embed_dim);
  for (std::size_t i = 0; i < count; ++i) {
    w.data[i] = std::bit_cast<double>(get_le64(payload.data() + 8 * i));
    if (!std::isfinite(w.data[i])) throw fail("non-finite weight");
  }
  return EncoderModel(config, std::move(w));
}

std::optional<std::string> process_env(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec,
                                                 const EnvLookup& env) {
  if (const auto* b = std::get_if<BuiltinProviderSpec>(&spec)) {
    if (b->model_path.empty()) {
      return std::make_unique<BuiltinProvider>(EncoderModel::initialize(b->config));
    }
    return std::make_unique<BuiltinProvider>(load_model(b->model_path));
  }
  const auto& r = std::get<RemoteProviderSpec>(spec);
  if (r.batch_size == 0) throw UserError("remote batch size must be >= 1");
  auto key = env(r.api_key_env);
  if (!key || key->empty()) {
    throw UserError("environment variable " + r.api_key_env +
                    " must hold the API key for the remote provider");
  }
  return std::make_unique<RemoteProvider>(r, *key);
}

}  // namespace reclink
