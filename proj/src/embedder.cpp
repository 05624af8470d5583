#include "modguard/embedder.hpp"

#include <mutex>
#include <vector>

#include "modguard/hash.hpp"
#include "modguard/text.hpp"

namespace modguard {
namespace {

std::mutex& factory_mutex() {
  static std::mutex m;
  return m;
}

ExternalEmbedderFactory& factory_slot() {
  static ExternalEmbedderFactory f;
  return f;
}

}  // namespace

std::string compose_embedding_input(std::string_view normalized_text, const MetadataRecord* metadata) {
  std::string out(normalized_text);
  if (metadata == nullptr) return out;
  auto append_field = [&](const std::string& raw) {
    std::string norm = text::normalize(raw);
    if (norm.empty()) return;
    out.append(kFieldDelimiter);
    out.append(norm);
  };
  if (metadata->description) append_field(*metadata->description);
  if (metadata->genre) {
    std::vector<std::string> genres;
    for (const auto& g : *metadata->genre) genres.push_back(text::normalize(g));
    std::sort(genres.begin(), genres.end());
    std::string joined;
    for (const auto& g : genres) {
      if (g.empty()) continue;
      if (!joined.empty()) joined.append(", ");
      joined.append(g);
    }
    append_field(joined);
  }
  if (metadata->age_rating) append_field(*metadata->age_rating);
  return out;
}

ReferenceEmbedder::ReferenceEmbedder(Eigen::Index dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
}

EmbeddingVector ReferenceEmbedder::embed(std::string_view text, const MetadataRecord* metadata) const {
  const std::string input = compose_embedding_input(text, metadata);
  EmbeddingVector::Vector v = EmbeddingVector::Vector::Zero(dim_);
  if (input.empty()) return EmbeddingVector(std::move(v));

  // Pad so one- and two-character words still contribute word-boundary grams.
  std::u32string cps = U" " + text::decode_utf8(input) + U" ";
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    const std::string gram = text::encode_utf8(std::u32string_view(cps).substr(i, 3));
    const std::uint64_t h = mix64(fnv1a64(gram));
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return EmbeddingVector(std::move(v));
}

ExternalEmbedderFactory register_external_embedder(ExternalEmbedderFactory factory) {
  std::lock_guard lock(factory_mutex());
  std::swap(factory_slot(), factory);
  return factory;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  if (cfg.kind == "reference") return std::make_unique<ReferenceEmbedder>(cfg.dim);
  if (cfg.kind == "external") {
    ExternalEmbedderFactory f;
    {
      std::lock_guard lock(factory_mutex());
      f = factory_slot();
    }
    if (!f) throw ConfigError("embedder kind 'external' selected but no external embedder is registered");
    auto e = f(cfg);
    if (!e) throw ConfigError("external embedder factory returned null");
    return e;
  }
  throw ConfigError("unknown embedder kind '" + cfg.kind + "' (expected reference | external)");
}

}  // namespace modguard
