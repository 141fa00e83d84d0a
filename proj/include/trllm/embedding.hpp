#pragma once

// Sentence embeddings for action similarity.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trllm/errors.hpp"

namespace trllm {

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  // Unit-norm vector of fixed dimension.
  virtual std::vector<double> embed(const std::string& text) const = 0;
};

// Lowercases, trims and collapses runs of whitespace to one space.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

// Signed feature hashing of character trigrams (with start/end markers) into `dimension` bins.
class HashingEmbedder final : public EmbeddingProvider {
public:
  explicit HashingEmbedder(std::size_t dimension = 512) : dimension_(dimension) {
    if (dimension_ == 0) throw ContractError("hashing embedder: dimension must be positive");
  }

  std::vector<double> embed(const std::string& text) const override {
    const auto norm = normalize_text(text);
    if (norm.empty()) throw ContractError("embed: text is empty");
    const std::string padded = "\x02" + norm + "\x03";
    std::vector<double> v(dimension_, 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const auto h = fnv1a(std::string_view(padded).substr(i, 3));
      v[h % dimension_] += ((h >> 32) & 1u) ? -1.0 : 1.0;
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 == 0.0) {
      // Every trigram cancelled out; fall back to a single hashed bin.
      v[fnv1a(norm) % dimension_] = 1.0;
      return v;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
  }

  std::size_t dimension() const { return dimension_; }

private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::size_t dimension_;
};

// Clamped to [-1, 1].
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractError("cosine similarity: dimension mismatch");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ContractError("cosine similarity: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace trllm
