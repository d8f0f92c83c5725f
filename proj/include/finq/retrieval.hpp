#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finq/bm25.hpp"
#include "finq/enrich.hpp"
#include "finq/indexer.hpp"
#include "finq/text.hpp"
#include "finq/types.hpp"

namespace finq::retrieval {

enum class Mode { keyword, semantic, hybrid, auto_select };
enum class FusionMethod { weighted, rrf };

std::string_view to_string(Mode mode);
std::string_view to_string(FusionMethod method);
std::optional<Mode> parse_mode(std::string_view name);
std::optional<FusionMethod> parse_fusion(std::string_view name);

/// A query as received, before validation; unset fields take defaults.
struct QueryRequest {
    std::string text;
    std::optional<Mode> mode;
    std::optional<int> k;
    std::optional<double> alpha;
    std::optional<FusionMethod> fusion;
    std::optional<bool> rerank;
};

struct Query {
    std::string text; // trimmed
    Mode mode = Mode::auto_select;
    int k = 10;
    double alpha = 0.5; // hybrid keyword weight
    FusionMethod fusion = FusionMethod::weighted;
    bool rerank = true;
};

inline constexpr std::size_t kMaxQueryBytes = 1024;
inline constexpr int kMaxK = 100;
inline constexpr double kRrfC = 60.0;

/// Trims, range-checks, and applies defaults.
/// Throws EmptyQuery, QueryTooLong, InvalidParameter (naming the field).
Query validate_query(const QueryRequest& raw);

/// Explicit modes pass through. Auto: <= 3 content tokens (stop words
/// removed) -> keyword; else an interrogative token or > 8 raw tokens
/// -> hybrid; otherwise semantic.
Mode resolve_mode(const Query& query, const text::StopWords& stop_words);

/// Over-fetch size: fusion and re-ranking need more candidates than k.
inline std::size_t overfetch(int k) {
    return std::max<std::size_t>(50, 3 * static_cast<std::size_t>(k));
}

struct SemanticHit {
    std::string object_id;
    std::string chunk_id; // best-scoring chunk of the document
    double similarity = 0.0;
};

/// Case-folded, stop-filtered terms -> BM25 top-k'.
std::vector<index::Bm25Index::ScoredDoc> keyword_search(const index::SearchIndex& index,
                                                        const std::string& query_text,
                                                        const text::StopWords& stop_words,
                                                        std::size_t k_prime);

/// ANN search with ef = max(ef_search, 2k'), chunk hits collapsed to
/// documents keeping each document's best-chunk similarity.
std::vector<SemanticHit> semantic_search(const index::SearchIndex& index,
                                         std::span<const float> query_vector,
                                         std::size_t k_prime);

/// Fused candidate carrying raw per-channel scores for the payload.
struct Candidate {
    std::string object_id;
    double keyword_score = 0.0;  // raw BM25 (0 when absent from the channel)
    double semantic_score = 0.0; // cosine (0 when absent)
    double fused_score = 0.0;
    std::optional<std::string> chunk_id;
    bool in_keyword = false;
    bool in_semantic = false;
};

/// Weighted fusion: per-channel min-max normalization over the channel's own
/// candidates (constant channels normalize to 1.0, absent documents take 0),
/// fused = alpha * kw + (1 - alpha) * sem. Top-k, ties by ascending id.
std::vector<Candidate> fuse_weighted(const std::vector<index::Bm25Index::ScoredDoc>& keyword,
                                     const std::vector<SemanticHit>& semantic, double alpha,
                                     std::size_t k);

/// Reciprocal-rank fusion: score(d) = sum over channels of 1/(c + rank_d),
/// ranks 1-based. Top-k, ties by ascending id.
std::vector<Candidate> fuse_rrf(const std::vector<index::Bm25Index::ScoredDoc>& keyword,
                                const std::vector<SemanticHit>& semantic, std::size_t k,
                                double c = kRrfC);

struct RerankOutcome {
    std::vector<Candidate> candidates;
    std::size_t dropped = 0; // candidates no longer resolvable in the index
};

/// Re-scores candidates with exact best-chunk cosine (removing ANN error)
/// plus an entity boost of +0.05 per distinct query-matching entity surface
/// (capped at +0.15): final = 0.5 * fused + 0.5 * (cos + 1) / 2 + boost.
RerankOutcome rerank(std::vector<Candidate> candidates, std::span<const float> query_vector,
                     const std::string& query_text, const index::SearchIndex& index,
                     std::size_t k);

struct ResponsePayload {
    std::string query; // trimmed echo
    Mode resolved_mode = Mode::hybrid;
    std::vector<SearchResult> results;
    std::map<std::string, double> timings_ms; // validate, embed, search, fuse, rerank
    std::map<std::string, std::vector<std::string>> related_entities; // type -> surfaces
};

struct QueryContext {
    const index::SearchIndex& index;
    enrich::EmbeddingProvider& provider;
    const text::StopWords& stop_words;
};

/// Full pipeline: validate -> resolve mode -> channels -> fuse -> rerank ->
/// payload. All five timing entries are always present (0 for skipped
/// stages). Stage errors carry the stage name.
ResponsePayload execute_query(const QueryContext& ctx, const QueryRequest& raw);

} // namespace finq::retrieval
