#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace finq {

// ---------------------------------------------------------------------------
// Timestamps. All instants are UTC, second resolution, stored as unix seconds.
// ---------------------------------------------------------------------------

using UnixSeconds = std::int64_t;

std::string format_iso8601(UnixSeconds t);
std::optional<UnixSeconds> parse_iso8601(std::string_view text);
UnixSeconds now_unix_seconds();

// ---------------------------------------------------------------------------
// Small text utilities shared by validation and canonicalization.
// ---------------------------------------------------------------------------

/// Removes C0 control characters (except \t \n \r) and DEL. In particular the
/// canonical-form separators 0x1F/0x1E can never survive sanitization.
std::string strip_control_chars(std::string_view text);

bool is_valid_utf8(std::string_view text);

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class Category {
    document,
    metadata_catalog,
    article,
    news_feed,
    dataset_record,
};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view name);

/// One knowledge source from the frontier configuration.
struct SourceConfig {
    std::string source_id;
    std::string endpoint; // file path/URL or http(s) URL
    std::optional<std::string> auth_env; // env var holding a bearer credential
    std::vector<std::string> selectors; // object ids or glob patterns
    std::map<std::string, std::string> mapping; // source field -> canonical field
    std::map<std::string, std::string> extra_metadata;
};

/// Canonical field names a source mapping may target.
bool is_canonical_field(std::string_view name);

struct FetchTask {
    std::string task_id;
    std::string source_id;
    std::string object_ref;
    std::map<std::string, std::string> mapping;
    std::map<std::string, std::string> extra_metadata;
    std::string endpoint;
    std::optional<std::string> auth_env;
    int attempt = 0;
};

/// A fetched source item; the unit flowing through every pipeline stage.
struct KnowledgeObject {
    std::string object_id; // "source_id/object_ref"
    std::string title;
    std::string body;
    Category category = Category::document;
    UnixSeconds timestamp = 0;
    std::map<std::string, std::string> metadata;
};

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& digest);
std::optional<Digest> digest_from_hex(std::string_view hex);

struct MetastoreEntry {
    std::string object_id;
    Digest content_hash{};
    UnixSeconds first_seen = 0;
    UnixSeconds last_indexed = 0;
};

struct Chunk {
    std::string chunk_id; // "object_id#k"
    std::string text;
    std::size_t token_count = 0;
    std::size_t ordinal = 0;
};

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dims() const { return values.size(); }
};

/// Validates dims/finiteness and unit norm (|‖v‖−1| ≤ 1e-5).
bool is_valid_embedding(const EmbeddingVector& v, std::size_t dims);

enum class EntityType {
    PERSON,
    ORGANIZATION,
    PLACE,
    FINANCIAL_SYSTEM,
};

std::string_view to_string(EntityType t);
std::optional<EntityType> parse_entity_type(std::string_view name);

struct EntityTag {
    std::string surface; // original casing, equals body[begin..end)
    EntityType entity_type = EntityType::ORGANIZATION;
    std::size_t begin = 0; // byte offsets into body
    std::size_t end = 0;
};

/// Fully enriched document ready for the index worker.
struct IndexedDocument {
    std::string object_id;
    std::string title;
    Category category = Category::document;
    UnixSeconds timestamp = 0;
    std::map<std::string, std::string> metadata;
    std::vector<Chunk> chunks;
    std::vector<EmbeddingVector> embeddings; // parallel to chunks
    std::vector<std::string> keyword_terms; // tokenized body + entity surfaces
    std::vector<EntityTag> entities;
    std::string snippet;
    std::size_t body_token_count = 0;
};

struct SearchResult {
    std::string object_id;
    std::optional<std::string> chunk_id; // best chunk, for semantic hits
    double keyword_score = 0.0;
    double semantic_score = 0.0;
    double fused_score = 0.0;
    int rank = 0; // 1-based
    std::string snippet;
    std::vector<EntityTag> entities;
};

enum class ChangeStatus {
    New,
    Modified,
    Unchanged,
};

std::string_view to_string(ChangeStatus s);

// ---------------------------------------------------------------------------
// Canonical serialization (input to the content hash)
// ---------------------------------------------------------------------------

/// Stable byte serialization of an object: object_id, title, body, category,
/// timestamp, then metadata pairs sorted by key, joined with 0x1F and
/// terminated by 0x1E. Total over objects whose text fields are sanitized.
std::string canonicalize(const KnowledgeObject& object);

} // namespace finq
