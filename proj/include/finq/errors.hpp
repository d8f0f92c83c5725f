#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finq {

enum class ErrorCode {
    // configuration / frontier
    UnreadableLocation,
    MalformedConfig,
    InvalidConfig,
    SelectorMatchesNothing,
    // queues
    QueueClosed,
    // extract
    SourceUnavailable,
    ObjectNotFound,
    MappingError,
    MetastoreIOError,
    // enrichment
    EmptyBody,
    EmptyText,
    ProviderUnavailable,
    ProviderBadResponse,
    TokenLimitExceeded,
    // index
    DimensionMismatch,
    DuplicateChunkId,
    DuplicateDocId,
    UnknownDocId,
    SnapshotIOError,
    VersionMismatch,
    // retrieval
    EmptyQuery,
    QueryTooLong,
    InvalidParameter,
    EmbeddingFailed,
    UnknownCandidate,
    Internal,
};

std::string_view to_string(ErrorCode code);

/// Base error type carrying a machine-readable code and the pipeline/query
/// stage the failure is attributed to.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string stage, const std::string& message)
        : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    ErrorCode code_;
    std::string stage_;
};

[[noreturn]] inline void raise(ErrorCode code, std::string stage, const std::string& message) {
    throw Error(code, std::move(stage), message);
}

/// True for failures worth retrying (transient transport/provider trouble).
inline bool is_transient(ErrorCode code) {
    return code == ErrorCode::SourceUnavailable || code == ErrorCode::ProviderUnavailable;
}

} // namespace finq
