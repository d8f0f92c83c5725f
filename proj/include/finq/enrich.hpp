#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "finq/queue.hpp"
#include "finq/retry.hpp"
#include "finq/types.hpp"

namespace finq::enrich {

/// Sliding-window chunking over whitespace tokens: windows of `chunk_size`
/// tokens advancing by `chunk_size - overlap`, final partial window kept.
/// Chunk text is the byte range spanning the window's tokens, so original
/// formatting survives. Throws EmptyBody / InvalidParameter.
std::vector<Chunk> chunk_text(const std::string& object_id, const std::string& body,
                              std::size_t chunk_size = 512, std::size_t overlap = 64);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Unit-norm vector of dims() floats. Throws EmptyText, TokenLimitExceeded,
    /// ProviderUnavailable (transient), ProviderBadResponse (permanent).
    virtual EmbeddingVector embed(const std::string& text) = 0;

    virtual std::size_t dims() const = 0;
    virtual std::size_t token_limit() const = 0;
    virtual std::string_view kind() const = 0;
};

/// Feature-hashing embedder: each case-folded token FNV-1a-hashed to a signed
/// coordinate, accumulated, L2-normalized. Same text, same vector, no network.
class LocalDeterministicProvider final : public EmbeddingProvider {
public:
    explicit LocalDeterministicProvider(std::size_t dims = 256, std::size_t token_limit = 8192);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dims() const override { return dims_; }
    std::size_t token_limit() const override { return token_limit_; }
    std::string_view kind() const override { return "local_deterministic"; }

private:
    std::size_t dims_;
    std::size_t token_limit_;
};

/// Calls an embedding service: POST {"model": ..., "input": ...} and expects
/// {"embedding": [floats]} back. Stateless per call, safe to share across
/// workers.
class RemoteHttpProvider final : public EmbeddingProvider {
public:
    struct Config {
        std::string endpoint; // full URL, e.g. http://127.0.0.1:9100/embed
        std::string model_name;
        std::size_t dims = 256;
        std::size_t token_limit = 8192;
        int timeout_ms = 30000;
    };

    explicit RemoteHttpProvider(Config config);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dims() const override { return config_.dims; }
    std::size_t token_limit() const override { return config_.token_limit; }
    std::string_view kind() const override { return "remote_http"; }

private:
    Config config_;
};

/// Exact-match entity dictionary: case-folded 1..5-token surface -> type.
class Gazetteer {
public:
    Gazetteer() = default;

    /// Lines `surface<TAB>ENTITY_TYPE`; '#' comments and blank lines skipped.
    /// Errors name the offending line number.
    static Gazetteer from_file(const std::string& path);
    static Gazetteer from_entries(
        const std::vector<std::pair<std::string, EntityType>>& entries);

    std::optional<EntityType> find(const std::string& folded_key) const;
    std::size_t size() const { return entries_.size(); }
    std::size_t max_surface_tokens() const { return max_tokens_; }

private:
    void add(const std::string& surface, EntityType type, const std::string& where);

    std::unordered_map<std::string, EntityType> entries_; // folded token-joined key
    std::size_t max_tokens_ = 0;
};

/// Longest-match, then leftmost, non-overlapping gazetteer scan. Spans are
/// byte offsets excluding punctuation margins; surface keeps original casing.
std::vector<EntityTag> tag_entities(const std::string& body, const Gazetteer& gazetteer);

struct EnrichOptions {
    std::size_t chunk_size = 512;
    std::size_t overlap = 64;
    RetryPolicy retry{};
};

/// Chunk + embed + tag one object into an IndexedDocument (all chunks
/// embedded or the whole object fails). Transient provider errors are retried
/// per options.retry.
IndexedDocument enrich_document(const KnowledgeObject& object, EmbeddingProvider& provider,
                                const Gazetteer& gazetteer, const EnrichOptions& options);

/// Keyword-term multiset for BM25: every case-folded body token, plus each
/// entity's folded surface and the folded core of each surface token.
std::vector<std::string> build_keyword_terms(const std::string& body,
                                             const std::vector<EntityTag>& entities);

struct EnrichStats {
    std::uint64_t enriched = 0;
    std::uint64_t failed = 0;
    std::uint64_t chunks = 0;
    std::uint64_t entities = 0;
};

/// Queue stage between extract and index. A failed object forwards its
/// envelope as a skip marker so the index worker's sequence stays gapless.
EnrichStats enrichment_worker_loop(BoundedQueue<Envelope<KnowledgeObject>>& embed_queue,
                                   BoundedQueue<Envelope<IndexedDocument>>& index_queue,
                                   EmbeddingProvider& provider, const Gazetteer& gazetteer,
                                   const EnrichOptions& options);

} // namespace finq::enrich
