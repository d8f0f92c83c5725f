#include "finq/enrich.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "finq/errors.hpp"
#include "finq/http_client.hpp"
#include "finq/text.hpp"
#include "finq/vecops.hpp"

namespace finq::enrich {
namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string folded_core(std::string_view body, const text::Token& token) {
    return text::fold_case(body.substr(token.core_begin, token.core_end - token.core_begin));
}

} // namespace

std::vector<Chunk> chunk_text(const std::string& object_id, const std::string& body,
                              std::size_t chunk_size, std::size_t overlap) {
    if (chunk_size == 0 || overlap >= chunk_size) {
        raise(ErrorCode::InvalidParameter, "enrich",
              "chunk_size must exceed overlap (got " + std::to_string(chunk_size) + "/" +
                  std::to_string(overlap) + ")");
    }
    const std::vector<text::Token> tokens = text::tokenize(body);
    if (tokens.empty()) {
        raise(ErrorCode::EmptyBody, "enrich", "no tokens to chunk in " + object_id);
    }

    const std::size_t stride = chunk_size - overlap;
    std::vector<Chunk> chunks;
    for (std::size_t start = 0, ordinal = 0;; start += stride, ++ordinal) {
        const std::size_t end = std::min(start + chunk_size, tokens.size());
        Chunk chunk;
        chunk.chunk_id = object_id + "#" + std::to_string(ordinal);
        chunk.text = body.substr(tokens[start].begin, tokens[end - 1].end - tokens[start].begin);
        chunk.token_count = end - start;
        chunk.ordinal = ordinal;
        chunks.push_back(std::move(chunk));
        if (end == tokens.size()) {
            break;
        }
    }
    return chunks;
}

LocalDeterministicProvider::LocalDeterministicProvider(std::size_t dims, std::size_t token_limit)
    : dims_(dims), token_limit_(token_limit) {
    if (dims == 0) {
        raise(ErrorCode::InvalidParameter, "enrich", "embedding dims must be positive");
    }
}

EmbeddingVector LocalDeterministicProvider::embed(const std::string& text) {
    const std::vector<text::Token> tokens = text::tokenize(text);
    if (tokens.empty()) {
        raise(ErrorCode::EmptyText, "enrich", "cannot embed empty text");
    }
    if (tokens.size() > token_limit_) {
        raise(ErrorCode::TokenLimitExceeded, "enrich",
              std::to_string(tokens.size()) + " tokens exceed provider limit " +
                  std::to_string(token_limit_));
    }

    EmbeddingVector out;
    out.values.assign(dims_, 0.0f);
    for (const text::Token& token : tokens) {
        const std::string core = folded_core(text, token);
        if (core.empty()) {
            continue; // pure punctuation carries no feature
        }
        const std::uint64_t h = fnv1a64(core);
        const std::size_t idx = static_cast<std::size_t>(h % dims_);
        out.values[idx] += (h >> 63) ? -1.0f : 1.0f;
    }
    if (!vec::normalize(out.values)) {
        // Signed counts cancelled out (or every token was punctuation): fall
        // back to a single deterministic coordinate from the whole text.
        const std::uint64_t h = fnv1a64(text::fold_case(text));
        out.values.assign(dims_, 0.0f);
        out.values[static_cast<std::size_t>(h % dims_)] = 1.0f;
    }
    return out;
}

RemoteHttpProvider::RemoteHttpProvider(Config config) : config_(std::move(config)) {
    if (config_.dims == 0) {
        raise(ErrorCode::InvalidParameter, "enrich", "embedding dims must be positive");
    }
    if (config_.endpoint.empty()) {
        raise(ErrorCode::InvalidParameter, "enrich", "remote provider endpoint must be set");
    }
}

EmbeddingVector RemoteHttpProvider::embed(const std::string& text) {
    const std::size_t ntokens = text::count_tokens(text);
    if (ntokens == 0) {
        raise(ErrorCode::EmptyText, "enrich", "cannot embed empty text");
    }
    if (ntokens > config_.token_limit) {
        raise(ErrorCode::TokenLimitExceeded, "enrich",
              std::to_string(ntokens) + " tokens exceed provider limit " +
                  std::to_string(config_.token_limit));
    }

    nlohmann::json request = {{"model", config_.model_name}, {"input", text}};
    const http::Response response =
        http::post_json(config_.endpoint, request.dump(), config_.timeout_ms);
    if (!response.transport_ok()) {
        raise(ErrorCode::ProviderUnavailable, "enrich",
              "embedding endpoint unreachable: " + response.error);
    }
    if (response.status == 429 || response.status >= 500) {
        raise(ErrorCode::ProviderUnavailable, "enrich",
              "embedding endpoint returned HTTP " + std::to_string(response.status));
    }
    if (response.status != 200) {
        raise(ErrorCode::ProviderBadResponse, "enrich",
              "embedding endpoint returned HTTP " + std::to_string(response.status));
    }

    nlohmann::json payload = nlohmann::json::parse(response.body, nullptr, false);
    if (payload.is_discarded() || !payload.is_object() || !payload.contains("embedding") ||
        !payload["embedding"].is_array()) {
        raise(ErrorCode::ProviderBadResponse, "enrich",
              "embedding response is not {\"embedding\": [...]}");
    }
    const auto& arr = payload["embedding"];
    if (arr.size() != config_.dims) {
        raise(ErrorCode::ProviderBadResponse, "enrich",
              "expected " + std::to_string(config_.dims) + " dims, got " +
                  std::to_string(arr.size()));
    }
    EmbeddingVector out;
    out.values.reserve(config_.dims);
    for (const auto& v : arr) {
        if (!v.is_number()) {
            raise(ErrorCode::ProviderBadResponse, "enrich", "non-numeric embedding coordinate");
        }
        const float f = v.get<float>();
        if (!std::isfinite(f)) {
            raise(ErrorCode::ProviderBadResponse, "enrich", "non-finite embedding coordinate");
        }
        out.values.push_back(f);
    }
    if (!vec::normalize(out.values)) {
        raise(ErrorCode::ProviderBadResponse, "enrich", "zero-norm embedding returned");
    }
    return out;
}

void Gazetteer::add(const std::string& surface, EntityType type, const std::string& where) {
    const std::vector<text::Token> tokens = text::tokenize(surface);
    std::string key;
    std::size_t ntokens = 0;
    for (const text::Token& token : tokens) {
        const std::string core = folded_core(surface, token);
        if (core.empty()) {
            raise(ErrorCode::InvalidConfig, "enrich",
                  "gazetteer surface has a punctuation-only token" + where + ": " + surface);
        }
        if (!key.empty()) {
            key += ' ';
        }
        key += core;
        ++ntokens;
    }
    if (ntokens < 1 || ntokens > 5) {
        raise(ErrorCode::InvalidConfig, "enrich",
              "gazetteer surface must be 1-5 tokens" + where + ": " + surface);
    }
    if (!entries_.emplace(key, type).second) {
        raise(ErrorCode::InvalidConfig, "enrich",
              "duplicate gazetteer surface" + where + ": " + key);
    }
    max_tokens_ = std::max(max_tokens_, ntokens);
}

Gazetteer Gazetteer::from_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        raise(ErrorCode::UnreadableLocation, "enrich", "cannot open gazetteer: " + path);
    }
    Gazetteer gazetteer;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::string where = " (" + path + ":" + std::to_string(line_no) + ")";
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
            raise(ErrorCode::MalformedConfig, "enrich",
                  "gazetteer line is not `surface<TAB>TYPE`" + where);
        }
        const std::string surface = line.substr(0, tab);
        const std::string type_name = line.substr(tab + 1);
        const auto type = parse_entity_type(type_name);
        if (!type) {
            raise(ErrorCode::MalformedConfig, "enrich",
                  "unknown entity type '" + type_name + "'" + where);
        }
        gazetteer.add(surface, *type, where);
    }
    return gazetteer;
}

Gazetteer Gazetteer::from_entries(
    const std::vector<std::pair<std::string, EntityType>>& entries) {
    Gazetteer gazetteer;
    for (const auto& [surface, type] : entries) {
        gazetteer.add(surface, type, "");
    }
    return gazetteer;
}

std::optional<EntityType> Gazetteer::find(const std::string& folded_key) const {
    const auto it = entries_.find(folded_key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<EntityTag> tag_entities(const std::string& body, const Gazetteer& gazetteer) {
    if (gazetteer.size() == 0) {
        return {};
    }
    const std::vector<text::Token> tokens = text::tokenize(body);
    std::vector<std::string> cores(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        cores[i] = folded_core(body, tokens[i]);
    }

    struct Candidate {
        std::size_t first = 0; // token indices, inclusive..inclusive
        std::size_t last = 0;
        EntityType type = EntityType::ORGANIZATION;
    };
    std::vector<Candidate> candidates;
    const std::size_t max_len = std::min<std::size_t>(gazetteer.max_surface_tokens(), 5);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (cores[i].empty()) {
            continue; // punctuation-only tokens break phrases
        }
        std::string key;
        for (std::size_t len = 1; len <= max_len && i + len <= tokens.size(); ++len) {
            const std::size_t j = i + len - 1;
            if (cores[j].empty()) {
                break;
            }
            if (len > 1) {
                key += ' ';
            }
            key += cores[j];
            if (const auto type = gazetteer.find(key)) {
                candidates.push_back({i, j, *type});
            }
        }
    }

    // Longest match wins; among equal lengths the leftmost; accepted matches
    // exclude any candidate sharing a token.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        const std::size_t la = a.last - a.first;
        const std::size_t lb = b.last - b.first;
        if (la != lb) {
            return la > lb;
        }
        return a.first < b.first;
    });
    std::vector<char> taken(tokens.size(), 0);
    std::vector<Candidate> accepted;
    for (const Candidate& c : candidates) {
        bool free = true;
        for (std::size_t t = c.first; t <= c.last && free; ++t) {
            free = !taken[t];
        }
        if (!free) {
            continue;
        }
        for (std::size_t t = c.first; t <= c.last; ++t) {
            taken[t] = 1;
        }
        accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const Candidate& a, const Candidate& b) { return a.first < b.first; });

    std::vector<EntityTag> tags;
    tags.reserve(accepted.size());
    for (const Candidate& c : accepted) {
        EntityTag tag;
        tag.begin = tokens[c.first].core_begin;
        tag.end = tokens[c.last].core_end;
        tag.surface = body.substr(tag.begin, tag.end - tag.begin);
        tag.entity_type = c.type;
        tags.push_back(std::move(tag));
    }
    return tags;
}

std::vector<std::string> build_keyword_terms(const std::string& body,
                                             const std::vector<EntityTag>& entities) {
    std::vector<std::string> terms;
    const std::vector<text::Token> tokens = text::tokenize(body);
    terms.reserve(tokens.size() + entities.size() * 2);
    for (const text::Token& token : tokens) {
        terms.push_back(text::fold_case(
            std::string_view(body).substr(token.begin, token.end - token.begin)));
    }
    for (const EntityTag& entity : entities) {
        terms.push_back(text::fold_case(entity.surface));
        const std::vector<text::Token> parts = text::tokenize(entity.surface);
        if (parts.size() > 1) {
            for (const text::Token& part : parts) {
                std::string core = folded_core(entity.surface, part);
                if (!core.empty()) {
                    terms.push_back(std::move(core));
                }
            }
        }
    }
    return terms;
}

IndexedDocument enrich_document(const KnowledgeObject& object, EmbeddingProvider& provider,
                                const Gazetteer& gazetteer, const EnrichOptions& options) {
    IndexedDocument doc;
    doc.object_id = object.object_id;
    doc.title = object.title;
    doc.category = object.category;
    doc.timestamp = object.timestamp;
    doc.metadata = object.metadata;
    doc.chunks = chunk_text(object.object_id, object.body, options.chunk_size, options.overlap);

    doc.embeddings.reserve(doc.chunks.size());
    for (const Chunk& chunk : doc.chunks) {
        for (int attempt = 0;; ++attempt) {
            try {
                doc.embeddings.push_back(provider.embed(chunk.text));
                break;
            } catch (const Error& e) {
                if (!is_transient(e.code()) || attempt >= options.retry.max_retries) {
                    throw;
                }
                options.retry.sleep_before_retry(attempt);
            }
        }
    }

    doc.entities = tag_entities(object.body, gazetteer);
    doc.keyword_terms = build_keyword_terms(object.body, doc.entities);
    doc.snippet = text::make_snippet(object.body);
    doc.body_token_count = text::count_tokens(object.body);
    return doc;
}

EnrichStats enrichment_worker_loop(BoundedQueue<Envelope<KnowledgeObject>>& embed_queue,
                                   BoundedQueue<Envelope<IndexedDocument>>& index_queue,
                                   EmbeddingProvider& provider, const Gazetteer& gazetteer,
                                   const EnrichOptions& options) {
    EnrichStats stats;
    while (auto envelope = embed_queue.pop()) {
        Envelope<IndexedDocument> out;
        out.seq = envelope->seq;
        if (envelope->payload.has_value()) {
            try {
                IndexedDocument doc =
                    enrich_document(*envelope->payload, provider, gazetteer, options);
                ++stats.enriched;
                stats.chunks += doc.chunks.size();
                stats.entities += doc.entities.size();
                out.payload = std::move(doc);
            } catch (const Error&) {
                ++stats.failed; // skip marker keeps the sequence gapless
            }
        }
        index_queue.push(std::move(out));
    }
    return stats;
}

} // namespace finq::enrich
