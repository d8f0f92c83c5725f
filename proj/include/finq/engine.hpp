#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "finq/enrich.hpp"
#include "finq/extract.hpp"
#include "finq/frontier.hpp"
#include "finq/indexer.hpp"
#include "finq/metastore.hpp"
#include "finq/retrieval.hpp"
#include "finq/retry.hpp"
#include "finq/text.hpp"

namespace finq::engine {

enum class ProviderKind { local_deterministic, remote_http };

struct EngineConfig {
    std::string frontier_config;
    std::string gazetteer;
    std::optional<std::string> stopwords; // builtin list when unset

    ProviderKind provider_kind = ProviderKind::local_deterministic;
    std::string provider_endpoint;
    std::string provider_model;
    int provider_timeout_ms = 30000;
    std::size_t token_limit = 8192;

    std::size_t dims = 256;
    std::size_t chunk_size = 512;
    std::size_t overlap = 64;

    std::size_t hnsw_m = 16;
    std::size_t hnsw_ef_construction = 200;
    std::size_t hnsw_ef_search = 64;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;

    retrieval::FusionMethod fusion = retrieval::FusionMethod::weighted;
    double alpha = 0.5;
    bool rerank = true;

    std::string snapshot_path;  // empty = no persistence
    std::string metastore_path; // empty = in-memory change detection
    int port = 8080;
    std::uint64_t seed = 0x51ee7;

    int extract_workers = 2;
    int enrich_workers = 2;
    int retry_base_delay_ms = 50;
    double retry_multiplier = 2.0;
};

/// Strict JSON config: unknown keys rejected, referenced files must exist.
EngineConfig load_engine_config(const std::string& path);

struct IngestReport {
    std::uint64_t tasks = 0;
    std::uint64_t fetched = 0;
    std::uint64_t new_objects = 0;
    std::uint64_t modified = 0;
    std::uint64_t unchanged = 0;
    std::uint64_t failed = 0;
    std::uint64_t chunks = 0;
    std::uint64_t entities = 0;
    std::uint64_t indexed = 0;
    std::vector<frontier::SelectorNotice> notices;
};

/// One process owning the whole blueprint: offline pipeline (frontier ->
/// extract -> enrich -> index) and online retrieval over the same index.
class Engine {
public:
    explicit Engine(EngineConfig config);

    /// True when the configured snapshot existed and was loaded.
    bool load_snapshot_if_present();

    /// Full pipeline run over the frontier config; writes the snapshot and
    /// compacts the metastore afterwards.
    IngestReport run_ingest();

    /// Synchronous single-object ingest (hash -> enrich -> index), the
    /// POST /documents path. Returns the change status; Unchanged leaves the
    /// index untouched.
    ChangeStatus ingest_document(const KnowledgeObject& object);

    retrieval::ResponsePayload query(retrieval::QueryRequest raw);

    std::size_t indexed_docs() const { return index_.document_count(); }
    int snapshot_version() const { return snapshot_loaded_ ? index::kSnapshotVersion : 0; }
    const EngineConfig& config() const { return config_; }
    index::SearchIndex& search_index() { return index_; }
    const enrich::Gazetteer& gazetteer() const { return gazetteer_; }

    void save_snapshot();

private:
    enrich::EnrichOptions enrich_options(const RetryPolicy& retry) const;

    EngineConfig config_;
    text::StopWords stop_words_;
    enrich::Gazetteer gazetteer_;
    std::unique_ptr<enrich::EmbeddingProvider> provider_;
    index::SearchIndex index_;
    extract::ObjectMetastore metastore_;
    std::mutex ingest_mutex_; // one pipeline run at a time
    std::mutex save_mutex_;   // serializes snapshot writes (same temp file)
    bool snapshot_loaded_ = false;
};

} // namespace finq::engine
