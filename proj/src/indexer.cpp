#include "finq/indexer.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "finq/errors.hpp"

namespace finq::index {

SearchIndex::SearchIndex(Config config)
    : config_(config), hnsw_(config.hnsw), bm25_(config.bm25) {}

void SearchIndex::remove_locked(const std::string& object_id) {
    const StoredDocument* stored = docs_.find(object_id);
    if (stored == nullptr) {
        raise(ErrorCode::UnknownDocId, "index", "document not indexed: " + object_id);
    }
    for (const std::string& chunk_id : stored->chunk_ids) {
        hnsw_.remove(chunk_id);
    }
    bm25_.remove_document(object_id);
    docs_.remove(object_id);
}

bool SearchIndex::upsert(const IndexedDocument& doc) {
    if (doc.object_id.empty()) {
        raise(ErrorCode::InvalidParameter, "index", "object_id must not be empty");
    }
    if (doc.chunks.size() != doc.embeddings.size()) {
        raise(ErrorCode::InvalidParameter, "index",
              "chunk/embedding count mismatch for " + doc.object_id);
    }
    if (doc.chunks.empty()) {
        raise(ErrorCode::InvalidParameter, "index",
              "document has no chunks: " + doc.object_id);
    }

    std::unique_lock lock(mutex_);
    const bool replaced = docs_.contains(doc.object_id);
    if (replaced) {
        remove_locked(doc.object_id);
    }

    StoredDocument stored;
    stored.object_id = doc.object_id;
    stored.title = doc.title;
    stored.category = doc.category;
    stored.timestamp = doc.timestamp;
    stored.snippet = doc.snippet;
    stored.entities = doc.entities;
    stored.metadata = doc.metadata;
    stored.body_token_count = doc.body_token_count;
    stored.chunk_ids.reserve(doc.chunks.size());
    for (const Chunk& chunk : doc.chunks) {
        stored.chunk_ids.push_back(chunk.chunk_id);
    }

    // Insert vectors first: HnswIndex validates dimensions / norms / duplicate
    // ids, and a throw here must leave BM25 and the docstore untouched.
    std::size_t inserted = 0;
    try {
        for (std::size_t i = 0; i < doc.chunks.size(); ++i) {
            hnsw_.insert(doc.chunks[i].chunk_id, doc.embeddings[i].values);
            ++inserted;
        }
        bm25_.add_document(doc.object_id, doc.keyword_terms);
    } catch (...) {
        for (std::size_t i = 0; i < inserted; ++i) {
            hnsw_.remove(doc.chunks[i].chunk_id);
        }
        throw;
    }
    docs_.put(std::move(stored));

    if (hnsw_.needs_rebuild()) {
        hnsw_.rebuild();
    }
    return replaced;
}

void SearchIndex::remove_document(const std::string& object_id) {
    std::unique_lock lock(mutex_);
    remove_locked(object_id);
    if (hnsw_.needs_rebuild()) {
        hnsw_.rebuild();
    }
}

std::vector<Bm25Index::ScoredDoc> SearchIndex::keyword_search(std::span<const std::string> terms,
                                                              std::size_t k) const {
    std::shared_lock lock(mutex_);
    return bm25_.search(terms, k);
}

std::vector<HnswIndex::Hit> SearchIndex::semantic_search(std::span<const float> query,
                                                         std::size_t k, std::size_t ef) const {
    std::shared_lock lock(mutex_);
    return hnsw_.search(query, k, ef);
}

std::optional<StoredDocument> SearchIndex::document(const std::string& object_id) const {
    std::shared_lock lock(mutex_);
    const StoredDocument* stored = docs_.find(object_id);
    if (stored == nullptr) {
        return std::nullopt;
    }
    return *stored;
}

bool SearchIndex::contains(const std::string& object_id) const {
    std::shared_lock lock(mutex_);
    return docs_.contains(object_id);
}

std::size_t SearchIndex::document_count() const {
    std::shared_lock lock(mutex_);
    return docs_.size();
}

std::size_t SearchIndex::chunk_count() const {
    std::shared_lock lock(mutex_);
    return hnsw_.live_count();
}

std::optional<SearchIndex::BestChunk> SearchIndex::best_chunk(const std::string& object_id,
                                                              std::span<const float> query) const {
    std::shared_lock lock(mutex_);
    const StoredDocument* stored = docs_.find(object_id);
    if (stored == nullptr) {
        return std::nullopt;
    }
    BestChunk best;
    for (const std::string& chunk_id : stored->chunk_ids) {
        const float sim = hnsw_.similarity_to(chunk_id, query);
        if (sim > best.similarity || (sim == best.similarity && best.chunk_id.empty())) {
            best.similarity = sim;
            best.chunk_id = chunk_id;
        }
    }
    if (best.chunk_id.empty()) {
        return std::nullopt;
    }
    return best;
}

IndexWorkerStats index_worker_loop(BoundedQueue<Envelope<IndexedDocument>>& queue,
                                   SearchIndex& index) {
    IndexWorkerStats stats;
    // Envelopes can arrive out of task order when several enrichment workers
    // feed the queue; buffer them and apply strictly by sequence number.
    std::map<std::uint64_t, std::optional<IndexedDocument>> pending;
    std::uint64_t next_seq = 0;

    auto drain_ready = [&] {
        for (auto it = pending.begin(); it != pending.end() && it->first == next_seq;
             it = pending.erase(it), ++next_seq) {
            if (!it->second.has_value()) {
                ++stats.skipped;
                continue;
            }
            const IndexedDocument& doc = *it->second;
            try {
                const bool replaced = index.upsert(doc);
                ++stats.indexed;
                if (replaced) {
                    ++stats.replaced;
                }
                stats.chunks += doc.chunks.size();
                stats.entities += doc.entities.size();
            } catch (const Error&) {
                ++stats.failed;
            }
        }
    };

    while (auto envelope = queue.pop()) {
        pending.emplace(envelope->seq, std::move(envelope->payload));
        drain_ready();
    }
    drain_ready();
    return stats;
}

} // namespace finq::index
