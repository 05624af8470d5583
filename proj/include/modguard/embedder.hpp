#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "modguard/error.hpp"
#include "modguard/model.hpp"

namespace modguard {

// Dense embedding with its Euclidean norm cached at construction.
template <typename Scalar>
class BasicEmbedding {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicEmbedding() = default;
  explicit BasicEmbedding(Vector values) : values_(std::move(values)), norm_(values_.norm()) {}

  static BasicEmbedding zero(Eigen::Index dim) { return BasicEmbedding(Vector::Zero(dim)); }

  const Vector& values() const { return values_; }
  Scalar norm() const { return norm_; }
  Eigen::Index dim() const { return values_.size(); }
  bool is_zero() const { return norm_ == Scalar(0); }

  friend BasicEmbedding operator*(Scalar c, const BasicEmbedding& e) { return BasicEmbedding(Vector(c * e.values_)); }
  friend BasicEmbedding operator-(const BasicEmbedding& e) { return BasicEmbedding(Vector(-e.values_)); }

 private:
  Vector values_;
  Scalar norm_ = Scalar(0);
};

using EmbeddingVector = BasicEmbedding<double>;

// Cosine similarity clamped to [-1, 1]; 0 when either side is the zero vector.
// Throws ConfigError on a dimension mismatch.
template <typename Scalar>
Scalar cosine(const BasicEmbedding<Scalar>& a, const BasicEmbedding<Scalar>& b) {
  if (a.dim() != b.dim()) {
    throw ConfigError("embedding dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  if (a.is_zero() || b.is_zero()) return Scalar(0);
  const Scalar c = a.values().dot(b.values()) / (a.norm() * b.norm());
  return std::clamp(c, Scalar(-1), Scalar(1));
}

class Embedder {
 public:
  virtual ~Embedder() = default;

  // `text` is already normalized. Metadata, when given, is folded into the
  // embedded string after the text.
  virtual EmbeddingVector embed(std::string_view text, const MetadataRecord* metadata = nullptr) const = 0;
  virtual Eigen::Index dim() const = 0;
};

// Signed character-trigram feature hashing, L2-normalized.
class ReferenceEmbedder final : public Embedder {
 public:
  static constexpr Eigen::Index kDefaultDim = 256;

  explicit ReferenceEmbedder(Eigen::Index dim = kDefaultDim);

  EmbeddingVector embed(std::string_view text, const MetadataRecord* metadata = nullptr) const override;
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

// Field separator used when metadata is concatenated onto the text.
inline constexpr std::string_view kFieldDelimiter = " \x1f ";

// title, description, sorted genres, age rating; absent fields are skipped.
std::string compose_embedding_input(std::string_view normalized_text, const MetadataRecord* metadata);

struct EmbedderConfig {
  std::string kind = "reference";  // reference | external
  Eigen::Index dim = ReferenceEmbedder::kDefaultDim;
};

using ExternalEmbedderFactory = std::function<std::unique_ptr<Embedder>(const EmbedderConfig&)>;

// Installs the factory used for kind == "external". Returns the previous one.
ExternalEmbedderFactory register_external_embedder(ExternalEmbedderFactory factory);

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg);

}  // namespace modguard
