#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "finq/bm25.hpp"
#include "finq/docstore.hpp"
#include "finq/hnsw.hpp"
#include "finq/queue.hpp"
#include "finq/types.hpp"

namespace finq::index {

inline constexpr char kSnapshotMagic[8] = {'F', 'I', 'N', 'Q', 'I', 'D', 'X', '1'};
inline constexpr std::uint8_t kSnapshotVersion = 1;

/// HNSW (per chunk) + BM25 (per document) + document store behind one
/// reader/writer lock: many concurrent readers or one writer, and queries
/// always see a consistent point-in-time view.
class SearchIndex {
public:
    struct Config {
        HnswIndex::Params hnsw{};
        Bm25Index::Params bm25{};
    };

    SearchIndex() : SearchIndex(Config{}) {}
    explicit SearchIndex(Config config);

    /// Inserts a document, replacing any previous version of the same
    /// object_id first (Modified re-index). Returns true when it replaced.
    bool upsert(const IndexedDocument& doc);
    void remove_document(const std::string& object_id);

    std::vector<Bm25Index::ScoredDoc> keyword_search(std::span<const std::string> terms,
                                                     std::size_t k) const;
    std::vector<HnswIndex::Hit> semantic_search(std::span<const float> query, std::size_t k,
                                                std::size_t ef) const;
    std::optional<StoredDocument> document(const std::string& object_id) const;
    bool contains(const std::string& object_id) const;
    std::size_t document_count() const;
    std::size_t chunk_count() const;

    struct BestChunk {
        std::string chunk_id;
        float similarity = -1.0f;
    };
    /// Exact best-chunk similarity for re-ranking (no ANN approximation).
    std::optional<BestChunk> best_chunk(const std::string& object_id,
                                        std::span<const float> query) const;

    const Config& config() const { return config_; }

    void save(const std::string& path) const;
    /// Replaces the entire index contents (and parameters) from a snapshot.
    void load(const std::string& path);

private:
    friend struct SnapshotCodec;

    void remove_locked(const std::string& object_id);

    Config config_;
    HnswIndex hnsw_;
    Bm25Index bm25_;
    DocumentStore docs_;
    mutable std::shared_mutex mutex_;
};

struct IndexWorkerStats {
    std::uint64_t indexed = 0;
    std::uint64_t replaced = 0;
    std::uint64_t failed = 0;
    std::uint64_t skipped = 0;
    std::uint64_t chunks = 0;
    std::uint64_t entities = 0;
};

/// Sole writer during ingestion. Applies documents in task-sequence order
/// (reorder buffer over the envelopes) so index construction is reproducible.
IndexWorkerStats index_worker_loop(BoundedQueue<Envelope<IndexedDocument>>& queue,
                                   SearchIndex& index);

} // namespace finq::index
