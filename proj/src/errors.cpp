#include "finq/errors.hpp"

namespace finq {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnreadableLocation: return "unreadable_location";
    case ErrorCode::MalformedConfig: return "malformed_config";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::SelectorMatchesNothing: return "selector_matches_nothing";
    case ErrorCode::QueueClosed: return "queue_closed";
    case ErrorCode::SourceUnavailable: return "source_unavailable";
    case ErrorCode::ObjectNotFound: return "object_not_found";
    case ErrorCode::MappingError: return "mapping_error";
    case ErrorCode::MetastoreIOError: return "metastore_io_error";
    case ErrorCode::EmptyBody: return "empty_body";
    case ErrorCode::EmptyText: return "empty_text";
    case ErrorCode::ProviderUnavailable: return "provider_unavailable";
    case ErrorCode::ProviderBadResponse: return "provider_bad_response";
    case ErrorCode::TokenLimitExceeded: return "token_limit_exceeded";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::DuplicateChunkId: return "duplicate_chunk_id";
    case ErrorCode::DuplicateDocId: return "duplicate_doc_id";
    case ErrorCode::UnknownDocId: return "unknown_doc_id";
    case ErrorCode::SnapshotIOError: return "snapshot_io_error";
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::EmptyQuery: return "empty_query";
    case ErrorCode::QueryTooLong: return "query_too_long";
    case ErrorCode::InvalidParameter: return "invalid_parameter";
    case ErrorCode::EmbeddingFailed: return "embedding_failed";
    case ErrorCode::UnknownCandidate: return "unknown_candidate";
    case ErrorCode::Internal: return "internal";
    }
    return "internal";
}

} // namespace finq
