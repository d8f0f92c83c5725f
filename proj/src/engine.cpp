#include "finq/engine.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "finq/errors.hpp"

namespace finq::engine {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    raise(ErrorCode::InvalidConfig, "engine", field + ": " + why);
}

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> known,
                         const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            raise(ErrorCode::MalformedConfig, "engine", "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_number(const json& node, const char* key, T& out) {
    if (!node.contains(key)) {
        return;
    }
    if (!node[key].is_number()) {
        raise(ErrorCode::MalformedConfig, "engine", std::string(key) + " must be a number");
    }
    out = node[key].get<T>();
}

std::string read_string(const json& node, const char* key, const std::string& fallback = "") {
    if (!node.contains(key)) {
        return fallback;
    }
    if (!node[key].is_string()) {
        raise(ErrorCode::MalformedConfig, "engine", std::string(key) + " must be a string");
    }
    return node[key].get<std::string>();
}

void require_file(const std::string& path, const std::string& field) {
    std::error_code ec;
    if (path.empty() || !std::filesystem::is_regular_file(path, ec)) {
        invalid(field, "file not found: " + path);
    }
}

/// Runs `count` copies of `fn(worker_index)` to completion, rethrowing the
/// first worker exception after all joins.
template <typename Fn>
void run_workers(int count, Fn&& fn) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        threads.emplace_back([&, i] {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        });
    }
    for (std::thread& thread : threads) {
        thread.join();
    }
    for (const std::exception_ptr& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
}

} // namespace

EngineConfig load_engine_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        raise(ErrorCode::UnreadableLocation, "engine", "cannot open config: " + path);
    }
    std::ostringstream buffer;
    buffer << file.rdbuf();

    json document;
    try {
        document = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        raise(ErrorCode::MalformedConfig, "engine", path + ": " + e.what());
    }
    if (!document.is_object()) {
        raise(ErrorCode::MalformedConfig, "engine", path + ": top level must be an object");
    }
    reject_unknown_keys(document,
                        {"frontier_config", "gazetteer", "stopwords", "provider", "dims",
                         "chunk_size", "overlap", "hnsw", "bm25", "fusion", "snapshot",
                         "metastore", "port", "seed", "workers", "retry"},
                        path);

    EngineConfig config;
    config.frontier_config = read_string(document, "frontier_config");
    config.gazetteer = read_string(document, "gazetteer");
    if (document.contains("stopwords")) {
        config.stopwords = read_string(document, "stopwords");
    }

    if (document.contains("provider")) {
        const json& provider = document["provider"];
        if (!provider.is_object()) {
            raise(ErrorCode::MalformedConfig, "engine", "provider must be an object");
        }
        reject_unknown_keys(provider, {"kind", "endpoint", "model_name", "timeout_ms",
                                       "token_limit"},
                            "provider");
        const std::string kind = read_string(provider, "kind", "local_deterministic");
        if (kind == "local_deterministic") {
            config.provider_kind = ProviderKind::local_deterministic;
        } else if (kind == "remote_http") {
            config.provider_kind = ProviderKind::remote_http;
        } else {
            invalid("provider.kind", "must be local_deterministic or remote_http");
        }
        config.provider_endpoint = read_string(provider, "endpoint");
        config.provider_model = read_string(provider, "model_name");
        read_number(provider, "timeout_ms", config.provider_timeout_ms);
        read_number(provider, "token_limit", config.token_limit);
        if (config.provider_kind == ProviderKind::remote_http &&
            config.provider_endpoint.empty()) {
            invalid("provider.endpoint", "required for remote_http");
        }
    }

    read_number(document, "dims", config.dims);
    read_number(document, "chunk_size", config.chunk_size);
    read_number(document, "overlap", config.overlap);

    if (document.contains("hnsw")) {
        const json& hnsw = document["hnsw"];
        reject_unknown_keys(hnsw, {"M", "ef_construction", "ef_search"}, "hnsw");
        read_number(hnsw, "M", config.hnsw_m);
        read_number(hnsw, "ef_construction", config.hnsw_ef_construction);
        read_number(hnsw, "ef_search", config.hnsw_ef_search);
    }
    if (document.contains("bm25")) {
        const json& bm25 = document["bm25"];
        reject_unknown_keys(bm25, {"k1", "b"}, "bm25");
        read_number(bm25, "k1", config.bm25_k1);
        read_number(bm25, "b", config.bm25_b);
    }
    if (document.contains("fusion")) {
        const json& fusion = document["fusion"];
        reject_unknown_keys(fusion, {"method", "alpha", "rerank"}, "fusion");
        const std::string method = read_string(fusion, "method", "weighted");
        const auto parsed = retrieval::parse_fusion(method);
        if (!parsed) {
            invalid("fusion.method", "must be weighted or rrf");
        }
        config.fusion = *parsed;
        read_number(fusion, "alpha", config.alpha);
        if (fusion.contains("rerank")) {
            if (!fusion["rerank"].is_boolean()) {
                raise(ErrorCode::MalformedConfig, "engine", "fusion.rerank must be a boolean");
            }
            config.rerank = fusion["rerank"].get<bool>();
        }
    }

    config.snapshot_path = read_string(document, "snapshot");
    config.metastore_path = read_string(document, "metastore");
    read_number(document, "port", config.port);
    read_number(document, "seed", config.seed);

    if (document.contains("workers")) {
        const json& workers = document["workers"];
        reject_unknown_keys(workers, {"extract", "enrich"}, "workers");
        read_number(workers, "extract", config.extract_workers);
        read_number(workers, "enrich", config.enrich_workers);
    }
    if (document.contains("retry")) {
        const json& retry = document["retry"];
        reject_unknown_keys(retry, {"base_delay_ms", "multiplier"}, "retry");
        read_number(retry, "base_delay_ms", config.retry_base_delay_ms);
        read_number(retry, "multiplier", config.retry_multiplier);
    }

    // Range checks (the modules would also catch most of these, but failing
    // at startup with the config field name is kinder).
    require_file(config.frontier_config, "frontier_config");
    require_file(config.gazetteer, "gazetteer");
    if (config.stopwords.has_value()) {
        require_file(*config.stopwords, "stopwords");
    }
    if (config.dims == 0) {
        invalid("dims", "must be positive");
    }
    if (config.chunk_size == 0 || config.overlap >= config.chunk_size) {
        invalid("chunk_size", "must exceed overlap");
    }
    if (config.hnsw_m < 2) {
        invalid("hnsw.M", "must be at least 2");
    }
    if (config.bm25_k1 < 0.0 || config.bm25_b < 0.0 || config.bm25_b > 1.0) {
        invalid("bm25", "k1 must be >= 0 and b in [0, 1]");
    }
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
        invalid("fusion.alpha", "must be in [0, 1]");
    }
    if (config.port < 1 || config.port > 65535) {
        invalid("port", "must be in [1, 65535]");
    }
    if (config.extract_workers < 1 || config.enrich_workers < 1) {
        invalid("workers", "worker counts must be >= 1");
    }
    if (config.retry_base_delay_ms < 0 || config.retry_multiplier < 1.0) {
        invalid("retry", "base_delay_ms >= 0 and multiplier >= 1 required");
    }
    return config;
}

Engine::Engine(EngineConfig config)
    : config_(std::move(config)),
      stop_words_(config_.stopwords.has_value() ? text::StopWords::load(*config_.stopwords)
                                                : text::StopWords::builtin()),
      gazetteer_(enrich::Gazetteer::from_file(config_.gazetteer)),
      index_([&] {
          index::SearchIndex::Config index_config;
          index_config.hnsw.dims = config_.dims;
          index_config.hnsw.M = config_.hnsw_m;
          index_config.hnsw.ef_construction = config_.hnsw_ef_construction;
          index_config.hnsw.ef_search = config_.hnsw_ef_search;
          index_config.hnsw.seed = config_.seed;
          index_config.bm25.k1 = config_.bm25_k1;
          index_config.bm25.b = config_.bm25_b;
          return index_config;
      }()),
      metastore_(config_.metastore_path.empty()
                     ? extract::ObjectMetastore()
                     : extract::ObjectMetastore(config_.metastore_path)) {
    if (config_.provider_kind == ProviderKind::local_deterministic) {
        provider_ = std::make_unique<enrich::LocalDeterministicProvider>(config_.dims,
                                                                         config_.token_limit);
    } else {
        enrich::RemoteHttpProvider::Config remote;
        remote.endpoint = config_.provider_endpoint;
        remote.model_name = config_.provider_model;
        remote.dims = config_.dims;
        remote.token_limit = config_.token_limit;
        remote.timeout_ms = config_.provider_timeout_ms;
        provider_ = std::make_unique<enrich::RemoteHttpProvider>(std::move(remote));
    }
}

bool Engine::load_snapshot_if_present() {
    if (config_.snapshot_path.empty()) {
        return false;
    }
    std::error_code ec;
    if (!std::filesystem::is_regular_file(config_.snapshot_path, ec)) {
        return false;
    }
    index_.load(config_.snapshot_path);
    snapshot_loaded_ = true;
    return true;
}

void Engine::save_snapshot() {
    if (config_.snapshot_path.empty()) {
        return;
    }
    std::lock_guard lock(save_mutex_);
    index_.save(config_.snapshot_path);
    snapshot_loaded_ = true;
}

enrich::EnrichOptions Engine::enrich_options(const RetryPolicy& retry) const {
    enrich::EnrichOptions options;
    options.chunk_size = config_.chunk_size;
    options.overlap = config_.overlap;
    options.retry = retry;
    return options;
}

IngestReport Engine::run_ingest() {
    std::lock_guard run_lock(ingest_mutex_);

    const frontier::FrontierConfig frontier_config =
        frontier::load_frontier_config(config_.frontier_config);
    frontier::TaskPlan plan = frontier::build_fetch_tasks(frontier_config);

    RetryPolicy retry;
    retry.max_retries = frontier_config.max_retries;
    retry.base_delay = std::chrono::milliseconds(config_.retry_base_delay_ms);
    retry.multiplier = config_.retry_multiplier;
    const enrich::EnrichOptions options = enrich_options(retry);

    BoundedQueue<Envelope<FetchTask>> task_queue(64);
    BoundedQueue<Envelope<KnowledgeObject>> embed_queue(64);
    BoundedQueue<Envelope<IndexedDocument>> index_queue(64);

    std::vector<extract::ExtractStats> extract_stats(
        static_cast<std::size_t>(config_.extract_workers));
    std::vector<enrich::EnrichStats> enrich_stats(
        static_cast<std::size_t>(config_.enrich_workers));
    index::IndexWorkerStats index_stats;

    std::exception_ptr enrich_error;
    std::exception_ptr index_error;
    std::thread pipeline([&] {
        std::thread index_thread([&] {
            try {
                index_stats = index::index_worker_loop(index_queue, index_);
            } catch (...) {
                index_error = std::current_exception();
            }
        });
        try {
            run_workers(config_.enrich_workers, [&](int i) {
                enrich_stats[static_cast<std::size_t>(i)] = enrich::enrichment_worker_loop(
                    embed_queue, index_queue, *provider_, gazetteer_, options);
            });
        } catch (...) {
            enrich_error = std::current_exception();
        }
        index_queue.close();
        index_thread.join();
    });

    std::exception_ptr extract_error;
    std::thread extract_pool([&] {
        try {
            run_workers(config_.extract_workers, [&](int i) {
                extract_stats[static_cast<std::size_t>(i)] =
                    extract::extract_worker_loop(task_queue, metastore_, embed_queue, retry);
            });
        } catch (...) {
            extract_error = std::current_exception();
        }
        embed_queue.close();
    });

    std::size_t enqueued = 0;
    std::exception_ptr feed_error;
    try {
        enqueued = frontier::enqueue_tasks(std::move(plan.tasks), task_queue);
    } catch (...) {
        feed_error = std::current_exception();
    }
    task_queue.close();
    extract_pool.join();
    pipeline.join();

    for (const std::exception_ptr& error : {feed_error, extract_error, enrich_error, index_error}) {
        if (error) {
            std::rethrow_exception(error);
        }
    }

    IngestReport report;
    report.tasks = enqueued;
    report.notices = std::move(plan.notices);
    std::uint64_t enrich_failed = 0;
    for (const auto& stats : extract_stats) {
        report.fetched += stats.fetched;
        report.new_objects += stats.new_objects;
        report.modified += stats.modified;
        report.unchanged += stats.unchanged;
        report.failed += stats.fetch_failed + stats.invalid;
    }
    for (const auto& stats : enrich_stats) {
        enrich_failed += stats.failed;
    }
    report.failed += enrich_failed + index_stats.failed;
    report.chunks = index_stats.chunks;
    report.entities = index_stats.entities;
    report.indexed = index_stats.indexed;

    save_snapshot();
    metastore_.flush();
    return report;
}

ChangeStatus Engine::ingest_document(const KnowledgeObject& object) {
    if (object.object_id.empty()) {
        raise(ErrorCode::InvalidParameter, "ingest", "object_id must not be empty");
    }
    const extract::ValidationReport report = extract::validate_object(object);
    if (!report.ok()) {
        std::string failures;
        for (const auto failure : report.failures) {
            if (!failures.empty()) {
                failures += ", ";
            }
            failures += to_string(failure);
        }
        raise(ErrorCode::InvalidParameter, "ingest", "validation failed: " + failures);
    }

    const Digest digest = extract::compute_hash(object);
    const ChangeStatus status =
        metastore_.check_and_record(object.object_id, digest, now_unix_seconds());
    if (status == ChangeStatus::Unchanged) {
        return status;
    }

    RetryPolicy retry;
    retry.base_delay = std::chrono::milliseconds(config_.retry_base_delay_ms);
    retry.multiplier = config_.retry_multiplier;
    const IndexedDocument doc =
        enrich::enrich_document(object, *provider_, gazetteer_, enrich_options(retry));
    index_.upsert(doc);
    return status;
}

retrieval::ResponsePayload Engine::query(retrieval::QueryRequest raw) {
    // Engine-level fusion defaults apply where the request left fields unset.
    if (!raw.alpha.has_value()) {
        raw.alpha = config_.alpha;
    }
    if (!raw.fusion.has_value()) {
        raw.fusion = config_.fusion;
    }
    if (!raw.rerank.has_value()) {
        raw.rerank = config_.rerank;
    }
    const retrieval::QueryContext context{index_, *provider_, stop_words_};
    return retrieval::execute_query(context, raw);
}

} // namespace finq::engine
