#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "reclink/encoder.hpp"

namespace reclink::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("reclink-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// n random unit rows with ids 0..n-1.
inline EmbeddingMatrix random_embeddings(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  EmbeddingMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    m.set_row(i, static_cast<RowId>(i), random_gaussian(rng, dim));
  }
  return m;
}

inline Matrix<double> random_unit_rows(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  Matrix<double> z(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = random_gaussian(rng, dim);
    double s = 0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (std::size_t c = 0; c < dim; ++c) z(i, c) = v[c] / s;
  }
  return z;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len,
                               const std::string& alphabet = "abcde") {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

}  // namespace reclink::testing
