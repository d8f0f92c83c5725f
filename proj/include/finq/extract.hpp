#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "finq/metastore.hpp"
#include "finq/queue.hpp"
#include "finq/retry.hpp"
#include "finq/types.hpp"

namespace finq::extract {

Digest sha256(std::string_view bytes);

/// SHA-256 over the canonical byte serialization, so any change to a field
/// that reaches the index changes the digest.
Digest compute_hash(const KnowledgeObject& object);

/// One fetch attempt: pulls the payload from the task's source (file or
/// HTTP(S)), applies the source's field mapping, and fills defaults
/// (title <- object_ref, category <- document, timestamp <- source
/// modification time when the source exposes one, else epoch).
/// Throws SourceUnavailable (transient), ObjectNotFound, MappingError.
KnowledgeObject fetch_object(const FetchTask& task);

/// fetch_object with exponential backoff on transient failures; a permanently
/// failing source is attempted exactly max_retries + 1 times.
KnowledgeObject fetch_with_retry(const FetchTask& task, const RetryPolicy& policy);

enum class ValidationFailure {
    EmptyBody,
    BodyTooLarge,
    InvalidUtf8,
    TimestampInFuture,
};

std::string_view to_string(ValidationFailure failure);

struct ValidationReport {
    std::vector<ValidationFailure> failures;
    bool ok() const { return failures.empty(); }
};

inline constexpr std::size_t kMaxBodyBytes = 10 * 1024 * 1024;
inline constexpr std::int64_t kMaxFutureSkewSeconds = 24 * 3600;

/// Validation failures are data, not exceptions; an object is forwarded only
/// when the report is empty.
ValidationReport validate_object(const KnowledgeObject& object,
                                 std::size_t max_body_bytes = kMaxBodyBytes,
                                 UnixSeconds now = now_unix_seconds());

struct ExtractStats {
    std::uint64_t tasks = 0;
    std::uint64_t fetched = 0;
    std::uint64_t new_objects = 0;
    std::uint64_t modified = 0;
    std::uint64_t unchanged = 0;
    std::uint64_t fetch_failed = 0;
    std::uint64_t invalid = 0;
};

/// Task consumer: fetch -> hash -> change detection -> validation. Unchanged,
/// failed, and invalid objects forward a skip marker so the downstream
/// sequence stays gapless; New/Modified valid objects forward their payload.
ExtractStats extract_worker_loop(BoundedQueue<Envelope<FetchTask>>& task_queue,
                                 ObjectMetastore& metastore,
                                 BoundedQueue<Envelope<KnowledgeObject>>& embed_queue,
                                 const RetryPolicy& policy);

} // namespace finq::extract
