#include <algorithm>

#include "reclink/encoder.hpp"
#include "reclink/error.hpp"

namespace reclink {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t ngram_hash(std::string_view utf8_ngram, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ splitmix64(seed);
  for (char c : utf8_ngram) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  // FNV's low bits mix poorly; finalize before the modulo.
  return splitmix64(h);
}

char32_t fold_case(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0x80) return c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

void EncoderConfig::validate() const {
  if (ngram_min < 1 || ngram_max < ngram_min) {
    throw UserError("invalid n-gram range [" + std::to_string(ngram_min) + ", " +
                    std::to_string(ngram_max) + "]");
  }
  if (embed_dim < 2 || hash_buckets < embed_dim) {
    throw UserError("need hash_buckets >= embed_dim >= 2 (got " +
                    std::to_string(hash_buckets) + ", " + std::to_string(embed_dim) + ")");
  }
  if (hash_buckets > (std::size_t{1} << 32)) throw UserError("hash_buckets too large");
}

SparseFeatures featurize(std::string_view text, const EncoderConfig& config) {
  auto cps = decode_utf8(text);
  for (auto& c : cps) c = fold_case(c);

  std::vector<std::uint32_t> buckets;
  const auto len = cps.size();
  std::string gram;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    const auto width = static_cast<std::size_t>(n);
    if (width > len) break;
    for (std::size_t i = 0; i + width <= len; ++i) {
      gram = encode_utf8(std::u32string_view(cps).substr(i, width));
      buckets.push_back(static_cast<std::uint32_t>(ngram_hash(gram, config.seed) %
                                                   config.hash_buckets));
    }
  }
  std::sort(buckets.begin(), buckets.end());

  SparseFeatures out;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    out.push_back({buckets[i], static_cast<double>(j - i)});
    i = j;
  }
  return out;
}

}  // namespace reclink
