#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "routerbench/errors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/rng.hpp"

namespace routerbench {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

namespace detail {

// Lowercased ASCII-alphanumeric runs. This tokenization is part of the
// embedding contract: vectors must stay stable across versions.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace detail

// Deterministic hashed prompt features: word unigrams and bigrams are
// FNV-hashed into `dimension` signed buckets, then L2-normalized. A pure
// function of (text, dimension); empty text gives the zero vector.
inline EmbeddingVector embed(std::string_view text, int dimension) {
  if (dimension < 8) throw ConfigError("embed: dimension must be >= 8");
  EmbeddingVector v;
  v.values.assign(static_cast<std::size_t>(dimension), 0.0);

  const auto tokens = detail::tokenize(text);
  auto add_feature = [&](std::string_view feature) {
    const std::uint64_t h = fnv1a64(feature);
    const std::size_t bucket = h % static_cast<std::uint64_t>(dimension);
    const double sign = (mix64(h) >> 63) ? -1.0 : 1.0;
    v.values[bucket] += sign;
  };
  for (const auto& t : tokens) add_feature(t);
  for (std::size_t i = 1; i < tokens.size(); ++i)
    add_feature(tokens[i - 1] + '\x1f' + tokens[i]);

  double norm_sq = 0.0;
  for (double x : v.values) norm_sq += x * x;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v.values) x *= inv;
  }
  return v;
}

// dot(a,b) / (|a||b|); 0 when either norm is 0.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw ConfigError("cosine_similarity: dimension mismatch (" + std::to_string(a.dimension()) +
                      " vs " + std::to_string(b.dimension()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline constexpr int kDefaultEmbeddingDim = 384;

// Per-sample prompt embeddings for a table. Records carrying a precomputed
// `embedding` field override the hasher (the first model's vector in
// canonical order is used); everything else is hashed from the prompt at
// the table's embedding dimension, or hash_dim when none is present.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(const RecordTable& table, int hash_dim = kDefaultEmbeddingDim) {
    const int dim = table.embedding_dim() ? static_cast<int>(*table.embedding_dim()) : hash_dim;
    if (dim < 8) throw ConfigError("embedding provider: dimension must be >= 8");
    dim_ = dim;
    vectors_.reserve(table.n_samples());
    for (std::size_t si = 0; si < table.n_samples(); ++si) {
      bool precomputed = false;
      for (const auto& r : table.sample_records(si)) {
        if (r.embedding) {
          if (r.embedding->size() != static_cast<std::size_t>(dim))
            throw ConfigError("embedding provider: precomputed dimension mismatch for sample " +
                              r.sample_id);
          vectors_.push_back(EmbeddingVector{*r.embedding});
          precomputed = true;
          break;
        }
      }
      if (!precomputed) vectors_.push_back(embed(table.record(si, 0).prompt, dim));
    }
  }

  int dimension() const { return dim_; }

  const EmbeddingVector& sample_embedding(std::size_t sample_idx) const {
    return vectors_[sample_idx];
  }

 private:
  int dim_ = 0;
  std::vector<EmbeddingVector> vectors_;
};

}  // namespace routerbench
