#include "finq/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "finq/errors.hpp"

namespace finq::retrieval {
namespace {

const std::set<std::string, std::less<>> kInterrogatives = {"what", "how",  "why", "which",
                                                            "who",  "when", "where"};

std::string trim(const std::string& s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && is_space(s[begin])) {
        ++begin;
    }
    while (end > begin && is_space(s[end - 1])) {
        --end;
    }
    return s.substr(begin, end - begin);
}

/// Folded token cores of a text, punctuation-only tokens dropped.
std::vector<std::string> folded_cores(const std::string& body) {
    std::vector<std::string> cores;
    for (const text::Token& token : text::tokenize(body)) {
        std::string core = text::fold_case(
            std::string_view(body).substr(token.core_begin, token.core_end - token.core_begin));
        if (!core.empty()) {
            cores.push_back(std::move(core));
        }
    }
    return cores;
}

std::string doc_of_chunk(const std::string& chunk_id) {
    const std::size_t hash = chunk_id.rfind('#');
    if (hash == std::string::npos) {
        return chunk_id;
    }
    return chunk_id.substr(0, hash);
}

/// Min-max over the channel's own scores: constant (or single-candidate)
/// channels map to 1.0.
std::vector<double> min_max_normalize(const std::vector<double>& scores) {
    std::vector<double> out(scores.size(), 1.0);
    if (scores.empty()) {
        return out;
    }
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) {
        return out;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = (scores[i] - lo) / (hi - lo);
    }
    return out;
}

void sort_and_truncate(std::vector<Candidate>& candidates, std::size_t k) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fused_score != b.fused_score) {
            return a.fused_score > b.fused_score;
        }
        return a.object_id < b.object_id;
    });
    if (candidates.size() > k) {
        candidates.resize(k);
    }
}

/// Distinct entity surfaces whose folded token sequence appears contiguously
/// in the query's folded tokens.
std::size_t count_matching_surfaces(const std::vector<EntityTag>& entities,
                                    const std::vector<std::string>& query_cores) {
    std::set<std::string> matched;
    for (const EntityTag& entity : entities) {
        const std::vector<std::string> surface_cores = folded_cores(entity.surface);
        if (surface_cores.empty() || surface_cores.size() > query_cores.size()) {
            continue;
        }
        const auto it = std::search(query_cores.begin(), query_cores.end(),
                                    surface_cores.begin(), surface_cores.end());
        if (it != query_cores.end()) {
            std::string key;
            for (const std::string& core : surface_cores) {
                if (!key.empty()) {
                    key += ' ';
                }
                key += core;
            }
            matched.insert(std::move(key));
        }
    }
    return matched.size();
}

} // namespace

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::keyword: return "keyword";
    case Mode::semantic: return "semantic";
    case Mode::hybrid: return "hybrid";
    case Mode::auto_select: return "auto";
    }
    return "auto";
}

std::string_view to_string(FusionMethod method) {
    return method == FusionMethod::weighted ? "weighted" : "rrf";
}

std::optional<Mode> parse_mode(std::string_view name) {
    if (name == "keyword") return Mode::keyword;
    if (name == "semantic") return Mode::semantic;
    if (name == "hybrid") return Mode::hybrid;
    if (name == "auto") return Mode::auto_select;
    return std::nullopt;
}

std::optional<FusionMethod> parse_fusion(std::string_view name) {
    if (name == "weighted") return FusionMethod::weighted;
    if (name == "rrf") return FusionMethod::rrf;
    return std::nullopt;
}

Query validate_query(const QueryRequest& raw) {
    Query query;
    query.text = trim(raw.text);
    if (query.text.empty()) {
        raise(ErrorCode::EmptyQuery, "validate", "query text is empty after trimming");
    }
    if (query.text.size() > kMaxQueryBytes) {
        raise(ErrorCode::QueryTooLong, "validate",
              "query is " + std::to_string(query.text.size()) + " bytes (limit " +
                  std::to_string(kMaxQueryBytes) + ")");
    }
    if (raw.mode.has_value()) {
        query.mode = *raw.mode;
    }
    if (raw.k.has_value()) {
        if (*raw.k < 1 || *raw.k > kMaxK) {
            raise(ErrorCode::InvalidParameter, "validate",
                  "k must be in [1, " + std::to_string(kMaxK) + "], got " +
                      std::to_string(*raw.k));
        }
        query.k = *raw.k;
    }
    if (raw.alpha.has_value()) {
        if (!(*raw.alpha >= 0.0 && *raw.alpha <= 1.0)) {
            raise(ErrorCode::InvalidParameter, "validate",
                  "alpha must be in [0, 1], got " + std::to_string(*raw.alpha));
        }
        query.alpha = *raw.alpha;
    }
    if (raw.fusion.has_value()) {
        query.fusion = *raw.fusion;
    }
    if (raw.rerank.has_value()) {
        query.rerank = *raw.rerank;
    }
    return query;
}

Mode resolve_mode(const Query& query, const text::StopWords& stop_words) {
    if (query.mode != Mode::auto_select) {
        return query.mode;
    }
    const std::vector<std::string> cores = folded_cores(query.text);
    std::size_t content_tokens = 0;
    bool interrogative = false;
    for (const std::string& core : cores) {
        if (!stop_words.contains(core)) {
            ++content_tokens;
        }
        interrogative = interrogative || kInterrogatives.contains(core);
    }
    if (content_tokens <= 3) {
        return Mode::keyword;
    }
    if (interrogative || text::count_tokens(query.text) > 8) {
        return Mode::hybrid;
    }
    return Mode::semantic;
}

std::vector<index::Bm25Index::ScoredDoc> keyword_search(const index::SearchIndex& index,
                                                        const std::string& query_text,
                                                        const text::StopWords& stop_words,
                                                        std::size_t k_prime) {
    const std::vector<std::string> terms = text::query_terms(query_text, &stop_words);
    if (terms.empty()) {
        return {};
    }
    return index.keyword_search(terms, k_prime);
}

std::vector<SemanticHit> semantic_search(const index::SearchIndex& index,
                                         std::span<const float> query_vector,
                                         std::size_t k_prime) {
    const std::size_t ef = std::max(index.config().hnsw.ef_search, 2 * k_prime);
    const auto chunk_hits = index.semantic_search(query_vector, k_prime, ef);

    std::vector<SemanticHit> hits;
    std::unordered_map<std::string, std::size_t> best; // object_id -> hits index
    for (const auto& hit : chunk_hits) {
        std::string object_id = doc_of_chunk(hit.chunk_id);
        const auto it = best.find(object_id);
        if (it == best.end()) {
            best.emplace(object_id, hits.size());
            hits.push_back({std::move(object_id), hit.chunk_id, hit.similarity});
        } else if (hit.similarity > hits[it->second].similarity) {
            hits[it->second].chunk_id = hit.chunk_id;
            hits[it->second].similarity = hit.similarity;
        }
    }
    // Chunk hits arrive similarity-descending, so document order is already
    // by best-chunk similarity; re-sort only to break ties by id.
    std::stable_sort(hits.begin(), hits.end(), [](const SemanticHit& a, const SemanticHit& b) {
        if (a.similarity != b.similarity) {
            return a.similarity > b.similarity;
        }
        return a.object_id < b.object_id;
    });
    if (hits.size() > k_prime) {
        hits.resize(k_prime);
    }
    return hits;
}

namespace {

std::vector<Candidate> merge_channels(const std::vector<index::Bm25Index::ScoredDoc>& keyword,
                                      const std::vector<SemanticHit>& semantic) {
    std::vector<Candidate> candidates;
    std::unordered_map<std::string, std::size_t> by_id;
    for (const auto& hit : keyword) {
        Candidate c;
        c.object_id = hit.doc_id;
        c.keyword_score = hit.score;
        c.in_keyword = true;
        by_id.emplace(c.object_id, candidates.size());
        candidates.push_back(std::move(c));
    }
    for (const auto& hit : semantic) {
        const auto it = by_id.find(hit.object_id);
        if (it == by_id.end()) {
            Candidate c;
            c.object_id = hit.object_id;
            c.semantic_score = hit.similarity;
            c.chunk_id = hit.chunk_id;
            c.in_semantic = true;
            by_id.emplace(c.object_id, candidates.size());
            candidates.push_back(std::move(c));
        } else {
            candidates[it->second].semantic_score = hit.similarity;
            candidates[it->second].chunk_id = hit.chunk_id;
            candidates[it->second].in_semantic = true;
        }
    }
    return candidates;
}

} // namespace

std::vector<Candidate> fuse_weighted(const std::vector<index::Bm25Index::ScoredDoc>& keyword,
                                     const std::vector<SemanticHit>& semantic, double alpha,
                                     std::size_t k) {
    std::vector<double> kw_scores;
    kw_scores.reserve(keyword.size());
    for (const auto& hit : keyword) {
        kw_scores.push_back(hit.score);
    }
    std::vector<double> sem_scores;
    sem_scores.reserve(semantic.size());
    for (const auto& hit : semantic) {
        sem_scores.push_back(hit.similarity);
    }
    const std::vector<double> kw_norm = min_max_normalize(kw_scores);
    const std::vector<double> sem_norm = min_max_normalize(sem_scores);

    std::unordered_map<std::string, double> kw_by_id;
    for (std::size_t i = 0; i < keyword.size(); ++i) {
        kw_by_id.emplace(keyword[i].doc_id, kw_norm[i]);
    }
    std::unordered_map<std::string, double> sem_by_id;
    for (std::size_t i = 0; i < semantic.size(); ++i) {
        sem_by_id.emplace(semantic[i].object_id, sem_norm[i]);
    }

    std::vector<Candidate> candidates = merge_channels(keyword, semantic);
    for (Candidate& c : candidates) {
        const auto kw = kw_by_id.find(c.object_id);
        const auto sem = sem_by_id.find(c.object_id);
        const double kw_part = kw == kw_by_id.end() ? 0.0 : kw->second;
        const double sem_part = sem == sem_by_id.end() ? 0.0 : sem->second;
        c.fused_score = alpha * kw_part + (1.0 - alpha) * sem_part;
    }
    sort_and_truncate(candidates, k);
    return candidates;
}

std::vector<Candidate> fuse_rrf(const std::vector<index::Bm25Index::ScoredDoc>& keyword,
                                const std::vector<SemanticHit>& semantic, std::size_t k,
                                double c) {
    if (!(c > 0.0)) {
        raise(ErrorCode::InvalidParameter, "fuse", "rrf constant must be positive");
    }
    std::unordered_map<std::string, double> rrf;
    for (std::size_t i = 0; i < keyword.size(); ++i) {
        rrf[keyword[i].doc_id] += 1.0 / (c + static_cast<double>(i + 1));
    }
    for (std::size_t i = 0; i < semantic.size(); ++i) {
        rrf[semantic[i].object_id] += 1.0 / (c + static_cast<double>(i + 1));
    }
    std::vector<Candidate> candidates = merge_channels(keyword, semantic);
    for (Candidate& cand : candidates) {
        cand.fused_score = rrf[cand.object_id];
    }
    sort_and_truncate(candidates, k);
    return candidates;
}

RerankOutcome rerank(std::vector<Candidate> candidates, std::span<const float> query_vector,
                     const std::string& query_text, const index::SearchIndex& index,
                     std::size_t k) {
    RerankOutcome outcome;
    const std::vector<std::string> query_cores = folded_cores(query_text);

    for (Candidate& candidate : candidates) {
        const auto best = index.best_chunk(candidate.object_id, query_vector);
        if (!best.has_value()) {
            ++outcome.dropped; // candidate vanished between search and rerank
            continue;
        }
        const auto stored = index.document(candidate.object_id);
        if (!stored.has_value()) {
            ++outcome.dropped;
            continue;
        }
        const double exact_cos = best->similarity;
        const double cos_norm = (exact_cos + 1.0) / 2.0;
        const double boost = std::min(
            0.15, 0.05 * static_cast<double>(count_matching_surfaces(stored->entities,
                                                                     query_cores)));
        candidate.fused_score = 0.5 * candidate.fused_score + 0.5 * cos_norm + boost;
        candidate.semantic_score = exact_cos; // exact similarity replaces the ANN estimate
        candidate.chunk_id = best->chunk_id;
        outcome.candidates.push_back(std::move(candidate));
    }
    sort_and_truncate(outcome.candidates, k);
    return outcome;
}

ResponsePayload execute_query(const QueryContext& ctx, const QueryRequest& raw) {
    using Clock = std::chrono::steady_clock;
    const auto ms_since = [](Clock::time_point start) {
        return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    };

    ResponsePayload payload;
    payload.timings_ms = {
        {"validate", 0.0}, {"embed", 0.0}, {"search", 0.0}, {"fuse", 0.0}, {"rerank", 0.0}};

    auto t = Clock::now();
    const Query query = validate_query(raw);
    payload.query = query.text;
    payload.timings_ms["validate"] = ms_since(t);

    const Mode mode = resolve_mode(query, ctx.stop_words);
    payload.resolved_mode = mode;

    const bool need_semantic = mode == Mode::semantic || mode == Mode::hybrid;
    const bool need_keyword = mode == Mode::keyword || mode == Mode::hybrid;
    const bool need_vector = need_semantic || query.rerank;

    std::vector<float> query_vector;
    if (need_vector) {
        t = Clock::now();
        try {
            query_vector = ctx.provider.embed(query.text).values;
        } catch (const Error& e) {
            // Keep the provider's error code (503-worthy vs permanent) but
            // attribute the failure to the query's embed stage.
            raise(e.code(), "embed", e.what());
        }
        payload.timings_ms["embed"] = ms_since(t);
    }

    const std::size_t k_prime = overfetch(query.k);
    std::vector<index::Bm25Index::ScoredDoc> keyword_hits;
    std::vector<SemanticHit> semantic_hits;
    t = Clock::now();
    if (need_keyword) {
        keyword_hits = keyword_search(ctx.index, query.text, ctx.stop_words, k_prime);
    }
    if (need_semantic) {
        semantic_hits = semantic_search(ctx.index, query_vector, k_prime);
    }
    payload.timings_ms["search"] = ms_since(t);

    // Candidates kept at k' through fusion; the final cut to k happens after
    // re-ranking (or here when re-ranking is off).
    const std::size_t pre_rerank = query.rerank ? k_prime : static_cast<std::size_t>(query.k);
    t = Clock::now();
    std::vector<Candidate> candidates;
    if (mode == Mode::hybrid) {
        candidates = query.fusion == FusionMethod::weighted
                         ? fuse_weighted(keyword_hits, semantic_hits, query.alpha, pre_rerank)
                         : fuse_rrf(keyword_hits, semantic_hits, pre_rerank);
    } else if (mode == Mode::keyword) {
        candidates = fuse_weighted(keyword_hits, {}, 1.0, pre_rerank);
    } else {
        candidates = fuse_weighted({}, semantic_hits, 0.0, pre_rerank);
    }
    payload.timings_ms["fuse"] = ms_since(t);

    if (query.rerank && !candidates.empty()) {
        t = Clock::now();
        RerankOutcome outcome = rerank(std::move(candidates), query_vector, query.text,
                                       ctx.index, static_cast<std::size_t>(query.k));
        candidates = std::move(outcome.candidates);
        payload.timings_ms["rerank"] = ms_since(t);
    }

    payload.results.reserve(candidates.size());
    std::map<std::string, std::set<std::string>> entity_summary;
    int rank = 1;
    for (Candidate& candidate : candidates) {
        const auto stored = ctx.index.document(candidate.object_id);
        if (!stored.has_value()) {
            continue; // removed mid-query; skip rather than fabricate
        }
        SearchResult result;
        result.object_id = std::move(candidate.object_id);
        result.chunk_id = std::move(candidate.chunk_id);
        result.keyword_score = candidate.keyword_score;
        result.semantic_score = candidate.semantic_score;
        result.fused_score = candidate.fused_score;
        result.rank = rank++;
        result.snippet = stored->snippet;
        result.entities = stored->entities;
        for (const EntityTag& entity : result.entities) {
            entity_summary[std::string(to_string(entity.entity_type))].insert(entity.surface);
        }
        payload.results.push_back(std::move(result));
    }
    for (auto& [type, surfaces] : entity_summary) {
        payload.related_entities[type] =
            std::vector<std::string>(surfaces.begin(), surfaces.end());
    }
    return payload;
}

} // namespace finq::retrieval
