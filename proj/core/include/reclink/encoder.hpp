#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "reclink/tabular.hpp"
#include "reclink/textprep.hpp"

namespace reclink {

struct EncoderConfig {
  int ngram_min = 2;
  int ngram_max = 4;
  std::size_t hash_buckets = 32768;
  std::size_t embed_dim = 256;
  std::uint64_t seed = 0;

  // Throws UserError unless 1 <= ngram_min <= ngram_max and
  // hash_buckets >= embed_dim >= 2.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct FeatureCount {
  std::uint32_t bucket = 0;
  double count = 0.0;

  friend bool operator==(const FeatureCount&, const FeatureCount&) = default;
};

// Sparse n-gram counts, sorted by bucket, no zero entries.
using SparseFeatures = std::vector<FeatureCount>;

// Seeded 64-bit hash of one n-gram's UTF-8 bytes. Stable across platforms.
std::uint64_t ngram_hash(std::string_view utf8_ngram, std::uint64_t seed);

// Lowercases the code points we know how to fold without a locale:
// ASCII, Latin-1 Supplement, Greek and Cyrillic basic blocks.
char32_t fold_case(char32_t c);

// Counts every character n-gram (ngram_min..ngram_max code points) of the
// case-folded text, hashed into [0, hash_buckets).
SparseFeatures featurize(std::string_view text, const EncoderConfig& config);

// Dense row-major matrix of shape rows x cols.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const T> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Row ids plus unit-norm float vectors. Rows that could not be embedded are
// all-zero and flagged invalid.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t dim)
      : row_ids_(n), vectors_(n, dim), valid_(n, 0) {}

  std::size_t size() const { return row_ids_.size(); }
  std::size_t dim() const { return vectors_.cols; }
  std::size_t num_valid() const;

  RowId row_id(std::size_t i) const { return row_ids_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  std::span<const float> vector(std::size_t i) const { return vectors_.row(i); }

  // Stores `values` scaled to unit norm; zero or non-finite input marks the
  // row invalid and leaves it all-zero. Returns whether the row is valid.
  bool set_row(std::size_t i, RowId id, std::span<const double> values);
  void set_invalid(std::size_t i, RowId id);

  const std::vector<RowId>& row_ids() const { return row_ids_; }
  const Matrix<float>& vectors() const { return vectors_; }

  friend bool operator==(const EmbeddingMatrix&,
                         const EmbeddingMatrix&) = default;

 private:
  std::vector<RowId> row_ids_;
  Matrix<float> vectors_;
  std::vector<std::uint8_t> valid_;
};

// The trainable built-in encoder: hashed n-gram features projected through a
// hash_buckets x embed_dim weight matrix, then L2-normalized.
class EncoderModel {
 public:
  // Weights drawn i.i.d. uniform in [-1/sqrt(D), 1/sqrt(D)] from config.seed.
  static EncoderModel initialize(const EncoderConfig& config);
  EncoderModel(EncoderConfig config, Matrix<double> weights);

  const EncoderConfig& config() const { return config_; }
  const Matrix<double>& weights() const { return weights_; }
  Matrix<double>& mutable_weights() { return weights_; }

  // u = W^T f / max(|f|_1, 1). Writes embed_dim values into `out`.
  void project(const SparseFeatures& features, std::span<double> out) const;

  friend bool operator==(const EncoderModel&, const EncoderModel&) = default;

 private:
  EncoderConfig config_;
  Matrix<double> weights_;
};

// Model file: a magic line, one JSON header line (format version, config,
// payload size, checksum), then W row-major as little-endian float64.
inline constexpr int kModelFormatVersion = 1;
void save_model(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_model(const std::filesystem::path& path);

struct BuiltinProviderSpec {
  // Empty path: a fresh model from `config` (untrained baseline).
  std::filesystem::path model_path;
  EncoderConfig config;

  friend bool operator==(const BuiltinProviderSpec&,
                         const BuiltinProviderSpec&) = default;
};

struct RemoteProviderSpec {
  std::string endpoint;  // e.g. https://host/v1 ; requests go to {endpoint}/embeddings
  std::string model;
  std::string api_key_env = "RECLINK_API_KEY";
  std::size_t batch_size = 64;
  int timeout_seconds = 60;

  friend bool operator==(const RemoteProviderSpec&,
                         const RemoteProviderSpec&) = default;
};

using ProviderSpec = std::variant<BuiltinProviderSpec, RemoteProviderSpec>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingMatrix embed(std::span<const SerializedRecord> texts) = 0;
  virtual std::string describe() const = 0;
};

class BuiltinProvider final : public EmbeddingProvider {
 public:
  explicit BuiltinProvider(EncoderModel model) : model_(std::move(model)) {}
  EmbeddingMatrix embed(std::span<const SerializedRecord> texts) override;
  std::string describe() const override;
  const EncoderModel& model() const { return model_; }

 private:
  EncoderModel model_;
};

// Speaks an OpenAI-compatible embeddings endpoint. Every failure raises
// ProviderError carrying the request id of the failing batch.
class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(RemoteProviderSpec spec, std::string api_key);
  EmbeddingMatrix embed(std::span<const SerializedRecord> texts) override;
  std::string describe() const override;

 private:
  RemoteProviderSpec spec_;
  std::string api_key_;
};

namespace remote {

// {"model": ..., "input": [...]}
std::string build_request_body(std::string_view model,
                               std::span<const SerializedRecord> texts);

// Parses {"data": [{"index": i, "embedding": [...]}, ...]} into rows ordered
// by "index". Throws ProviderError when the body is malformed, indices are
// not a permutation of 0..expected-1, or rows disagree on dimension.
std::vector<std::vector<double>> parse_response_body(std::string_view body,
                                                     std::size_t expected);

// Splits "https://host:port/base" into origin and base path.
struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // "" or "/v1"
};
Endpoint split_endpoint(std::string_view url);

}  // namespace remote

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
std::optional<std::string> process_env(std::string_view name);

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec,
                                                 const EnvLookup& env = process_env);

// Builtin embedding of every text with the given model.
EmbeddingMatrix embed_batch(const EncoderModel& model,
                            std::span<const SerializedRecord> texts);
EmbeddingMatrix embed_batch(EmbeddingProvider& provider,
                            std::span<const SerializedRecord> texts);

}  // namespace reclink
