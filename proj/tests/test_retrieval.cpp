#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "finq/enrich.hpp"
#include "finq/errors.hpp"
#include "finq/indexer.hpp"
#include "finq/retrieval.hpp"
#include "finq/text.hpp"

using namespace finq;
using retrieval::Candidate;
using retrieval::Mode;
using retrieval::QueryRequest;

namespace {

constexpr std::size_t kDims = 32;

index::SearchIndex::Config small_config() {
    index::SearchIndex::Config config;
    config.hnsw.dims = kDims;
    return config;
}

/// Small corpus enriched exactly like the ingestion pipeline would.
struct Corpus {
    index::SearchIndex index{small_config()};
    enrich::LocalDeterministicProvider provider{kDims};
    text::StopWords stop_words = text::StopWords::builtin();
    enrich::Gazetteer gazetteer = enrich::Gazetteer::from_entries({
        {"nvidia", EntityType::ORGANIZATION},
        {"john smith", EntityType::PERSON},
    });

    Corpus() {
        add("finance/nvidia",
            "Nvidia reported record quarterly revenue growth for data center chips");
        add("finance/rates",
            "The central bank raised interest rates to curb persistent inflation pressure");
        add("finance/risk",
            "Financial risk management frameworks require continuous policy oversight");
        add("tech/cloud", "Cloud gaming infrastructure scales with global user demand");
    }

    void add(const std::string& object_id, const std::string& body) {
        KnowledgeObject object;
        object.object_id = object_id;
        object.title = object_id;
        object.body = body;
        const auto doc =
            enrich::enrich_document(object, provider, gazetteer, enrich::EnrichOptions{});
        index.upsert(doc);
    }

    retrieval::QueryContext ctx() { return {index, provider, stop_words}; }
};

/// Index of hand-built single-chunk documents with controlled vectors and
/// entity lists, for isolating re-ranking arithmetic.
struct HandIndex {
    index::SearchIndex index;

    HandIndex() : index(hand_config()) {}

    static index::SearchIndex::Config hand_config() {
        index::SearchIndex::Config config;
        config.hnsw.dims = 4;
        return config;
    }

    void add(const std::string& object_id, std::vector<std::vector<float>> vectors,
             std::vector<EntityTag> entities = {}) {
        IndexedDocument doc;
        doc.object_id = object_id;
        doc.title = object_id;
        doc.snippet = object_id + " snippet";
        doc.entities = std::move(entities);
        doc.keyword_terms = {object_id};
        doc.body_token_count = 1;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            Chunk chunk;
            chunk.chunk_id = object_id + "#" + std::to_string(i);
            chunk.text = object_id;
            chunk.token_count = 1;
            chunk.ordinal = i;
            doc.chunks.push_back(std::move(chunk));
            doc.embeddings.push_back(EmbeddingVector{std::move(vectors[i])});
        }
        index.upsert(doc);
    }
};

EntityTag entity(const std::string& surface, EntityType type) {
    EntityTag tag;
    tag.surface = surface;
    tag.entity_type = type;
    tag.begin = 0;
    tag.end = surface.size();
    return tag;
}

Candidate candidate(const std::string& object_id, double fused) {
    Candidate c;
    c.object_id = object_id;
    c.fused_score = fused;
    return c;
}

std::vector<std::string> result_ids(const retrieval::ResponsePayload& payload) {
    std::vector<std::string> out;
    for (const auto& r : payload.results) {
        out.push_back(r.object_id);
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// validate_query
// ---------------------------------------------------------------------------

TEST_CASE("validation trims text and applies defaults") {
    QueryRequest raw;
    raw.text = "  risk management  ";
    const auto query = retrieval::validate_query(raw);
    CHECK(query.text == "risk management");
    CHECK(query.mode == Mode::auto_select);
    CHECK(query.k == 10);
    CHECK(query.alpha == 0.5);
    CHECK(query.fusion == retrieval::FusionMethod::weighted);
    CHECK(query.rerank == true);
}

TEST_CASE("validation rejects empty and oversized text") {
    for (const std::string text : {"", "   ", "\t\n  "}) {
        QueryRequest raw;
        raw.text = text;
        try {
            retrieval::validate_query(raw);
            FAIL("expected EmptyQuery");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyQuery);
            CHECK(e.stage() == "validate");
        }
    }

    QueryRequest raw;
    raw.text = std::string(1024, 'q');
    CHECK_NOTHROW(retrieval::validate_query(raw)); // exactly at the limit

    raw.text = std::string(1025, 'q');
    try {
        retrieval::validate_query(raw);
        FAIL("expected QueryTooLong");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::QueryTooLong);
    }

    // Trailing whitespace does not count against the limit.
    raw.text = std::string(1024, 'q') + "   ";
    CHECK_NOTHROW(retrieval::validate_query(raw));
}

TEST_CASE("validation range-checks k and alpha, naming the field") {
    QueryRequest raw;
    raw.text = "query";

    for (const int bad_k : {0, -5, 101}) {
        raw.k = bad_k;
        try {
            retrieval::validate_query(raw);
            FAIL("expected InvalidParameter");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidParameter);
            CHECK(std::string(e.what()).find("k must") != std::string::npos);
        }
    }
    raw.k = 1;
    CHECK(retrieval::validate_query(raw).k == 1);
    raw.k = 100;
    CHECK(retrieval::validate_query(raw).k == 100);

    for (const double bad_alpha : {-0.01, 1.01, std::nan("")}) {
        raw.alpha = bad_alpha;
        try {
            retrieval::validate_query(raw);
            FAIL("expected InvalidParameter");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidParameter);
            CHECK(std::string(e.what()).find("alpha") != std::string::npos);
        }
    }
    raw.alpha = 0.0;
    CHECK(retrieval::validate_query(raw).alpha == 0.0);
    raw.alpha = 1.0;
    CHECK(retrieval::validate_query(raw).alpha == 1.0);
}

// ---------------------------------------------------------------------------
// resolve_mode
// ---------------------------------------------------------------------------

TEST_CASE("mode resolution follows the decision ladder") {
    const auto stop_words = text::StopWords::builtin();
    const auto resolve = [&](const std::string& text) {
        QueryRequest raw;
        raw.text = text;
        return retrieval::resolve_mode(retrieval::validate_query(raw), stop_words);
    };

    // Three or fewer content tokens: keyword.
    CHECK(resolve("nvidia") == Mode::keyword);
    CHECK(resolve("nvidia quarterly earnings") == Mode::keyword);
    CHECK(resolve("the rates of it") == Mode::keyword); // only one content token
    // Interrogatives count as content but the token-count rule fires first.
    CHECK(resolve("what is risk") == Mode::keyword);

    // Interrogative with enough content: hybrid.
    CHECK(resolve("what risk frameworks govern derivatives exposure") == Mode::hybrid);
    CHECK(resolve("how should banks report liquidity coverage ratios") == Mode::hybrid);

    // Long queries go hybrid even without an interrogative.
    CHECK(resolve("central bank policy committee reviews capital adequacy across member "
                  "institutions") == Mode::hybrid);

    // Minimum-four content tokens, short, declarative: semantic.
    CHECK(resolve("financial services risk management") == Mode::semantic);
    CHECK(resolve("corporate bond spread dynamics") == Mode::semantic);

    // Explicit modes pass through untouched.
    QueryRequest raw;
    raw.text = "nvidia";
    raw.mode = Mode::semantic;
    CHECK(retrieval::resolve_mode(retrieval::validate_query(raw), stop_words) == Mode::semantic);
    raw.mode = Mode::hybrid;
    CHECK(retrieval::resolve_mode(retrieval::validate_query(raw), stop_words) == Mode::hybrid);
}

TEST_CASE("mode names round-trip") {
    using retrieval::parse_mode;
    CHECK(parse_mode("keyword") == Mode::keyword);
    CHECK(parse_mode("semantic") == Mode::semantic);
    CHECK(parse_mode("hybrid") == Mode::hybrid);
    CHECK(parse_mode("auto") == Mode::auto_select);
    CHECK_FALSE(parse_mode("psychic").has_value());
    CHECK(to_string(Mode::auto_select) == "auto");

    CHECK(retrieval::parse_fusion("weighted") == retrieval::FusionMethod::weighted);
    CHECK(retrieval::parse_fusion("rrf") == retrieval::FusionMethod::rrf);
    CHECK_FALSE(retrieval::parse_fusion("vote").has_value());
}

// ---------------------------------------------------------------------------
// channel searches
// ---------------------------------------------------------------------------

TEST_CASE("keyword search stop-filters the query") {
    Corpus corpus;
    // "the" and "to" are stop words; "rates" carries the query.
    const auto hits =
        retrieval::keyword_search(corpus.index, "the rates to", corpus.stop_words, 10);
    REQUIRE_FALSE(hits.empty());
    CHECK(hits[0].doc_id == "finance/rates");

    // All-stopword queries match nothing rather than everything.
    CHECK(retrieval::keyword_search(corpus.index, "the of and", corpus.stop_words, 10).empty());
}

TEST_CASE("semantic search collapses chunk hits to documents") {
    HandIndex hand;
    // Two chunks of one document bracket the query; another document is
    // orthogonal.
    hand.add("doc/multi", {{1.0f, 0.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f, 0.0f}});
    hand.add("doc/ortho", {{0.0f, 0.0f, 1.0f, 0.0f}});

    const std::vector<float> query = {1.0f, 0.0f, 0.0f, 0.0f};
    const auto hits = retrieval::semantic_search(hand.index, query, 10);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].object_id == "doc/multi");
    CHECK(hits[0].chunk_id == "doc/multi#0"); // the better of its two chunks
    CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hits[1].object_id == "doc/ortho");

    // Each document appears exactly once.
    std::vector<std::string> seen;
    for (const auto& hit : hits) {
        seen.push_back(hit.object_id);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

// ---------------------------------------------------------------------------
// rerank
// ---------------------------------------------------------------------------

TEST_CASE("rerank arithmetic: exact cosine plus capped entity boost") {
    HandIndex hand;
    const std::vector<float> unit_x = {1.0f, 0.0f, 0.0f, 0.0f};
    hand.add("doc/tagged", {unit_x}, {entity("Nvidia", EntityType::ORGANIZATION)});
    hand.add("doc/plain", {unit_x});

    SUBCASE("a query-matching entity surface breaks the tie") {
        auto outcome = retrieval::rerank({candidate("doc/plain", 0.5),
                                          candidate("doc/tagged", 0.5)},
                                         unit_x, "nvidia growth", hand.index, 10);
        CHECK(outcome.dropped == 0);
        REQUIRE(outcome.candidates.size() == 2);
        CHECK(outcome.candidates[0].object_id == "doc/tagged");
        // final = 0.5 * 0.5 + 0.5 * (1 + 1)/2 + 0.05 = 0.80 (tagged), 0.75 (plain)
        CHECK(outcome.candidates[0].fused_score == doctest::Approx(0.80).epsilon(1e-12));
        CHECK(outcome.candidates[1].fused_score == doctest::Approx(0.75).epsilon(1e-12));
        // The exact cosine replaces the channel estimate; chunk resolves.
        CHECK(outcome.candidates[0].semantic_score == doctest::Approx(1.0).epsilon(1e-6));
        REQUIRE(outcome.candidates[0].chunk_id.has_value());
        CHECK(*outcome.candidates[0].chunk_id == "doc/tagged#0");
    }

    SUBCASE("an entity absent from the query adds nothing") {
        auto outcome = retrieval::rerank({candidate("doc/plain", 0.5),
                                          candidate("doc/tagged", 0.5)},
                                         unit_x, "quarterly results", hand.index, 10);
        REQUIRE(outcome.candidates.size() == 2);
        CHECK(outcome.candidates[0].fused_score ==
              doctest::Approx(outcome.candidates[1].fused_score).epsilon(1e-12));
        // Tie falls back to ascending id.
        CHECK(outcome.candidates[0].object_id == "doc/plain");
    }
}

TEST_CASE("the entity boost counts distinct surfaces and caps at 0.15") {
    HandIndex hand;
    const std::vector<float> unit_x = {1.0f, 0.0f, 0.0f, 0.0f};
    hand.add("doc/many",
             {unit_x},
             {entity("Alpha", EntityType::ORGANIZATION), entity("Beta", EntityType::PLACE),
              entity("Gamma", EntityType::PERSON), entity("Delta", EntityType::ORGANIZATION)});
    hand.add("doc/dup", {unit_x},
             {entity("Alpha", EntityType::ORGANIZATION),
              entity("alpha", EntityType::ORGANIZATION)});

    // Four distinct matches would be +0.20; the cap holds it at +0.15.
    auto outcome = retrieval::rerank({candidate("doc/many", 0.0)}, unit_x,
                                     "alpha beta gamma delta", hand.index, 10);
    REQUIRE(outcome.candidates.size() == 1);
    CHECK(outcome.candidates[0].fused_score == doctest::Approx(0.65).epsilon(1e-12));

    // Case-folded duplicates count once.
    outcome = retrieval::rerank({candidate("doc/dup", 0.0)}, unit_x, "alpha beta gamma delta",
                                hand.index, 10);
    CHECK(outcome.candidates[0].fused_score == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("multi-token surfaces must appear contiguously in the query") {
    HandIndex hand;
    const std::vector<float> unit_x = {1.0f, 0.0f, 0.0f, 0.0f};
    hand.add("doc/person", {unit_x}, {entity("John Smith", EntityType::PERSON)});

    auto hit = retrieval::rerank({candidate("doc/person", 0.0)}, unit_x,
                                 "report by John Smith", hand.index, 10);
    CHECK(hit.candidates[0].fused_score == doctest::Approx(0.55).epsilon(1e-12));

    auto miss = retrieval::rerank({candidate("doc/person", 0.0)}, unit_x,
                                  "john outran smith", hand.index, 10);
    CHECK(miss.candidates[0].fused_score == doctest::Approx(0.50).epsilon(1e-12));
}

TEST_CASE("rerank drops vanished candidates and truncates to k") {
    HandIndex hand;
    const std::vector<float> unit_x = {1.0f, 0.0f, 0.0f, 0.0f};
    hand.add("doc/a", {unit_x});
    hand.add("doc/b", {{0.0f, 1.0f, 0.0f, 0.0f}});
    hand.add("doc/c", {{0.0f, 0.0f, 1.0f, 0.0f}});

    auto outcome = retrieval::rerank({candidate("doc/a", 0.9), candidate("ghost", 0.8),
                                      candidate("doc/b", 0.7), candidate("doc/c", 0.6)},
                                     unit_x, "query", hand.index, 2);
    CHECK(outcome.dropped == 1);
    REQUIRE(outcome.candidates.size() == 2); // truncated to k
    // No candidate the input did not contain.
    for (const auto& c : outcome.candidates) {
        CHECK((c.object_id == "doc/a" || c.object_id == "doc/b" || c.object_id == "doc/c"));
    }
    // doc/a pairs the highest fused input with the highest cosine.
    CHECK(outcome.candidates[0].object_id == "doc/a");
}

// ---------------------------------------------------------------------------
// execute_query
// ---------------------------------------------------------------------------

TEST_CASE("the full pipeline answers a keyword query") {
    Corpus corpus;
    QueryRequest raw;
    raw.text = "  nvidia revenue  ";
    const auto payload = retrieval::execute_query(corpus.ctx(), raw);

    CHECK(payload.query == "nvidia revenue"); // trimmed echo
    CHECK(payload.resolved_mode == Mode::keyword);
    REQUIRE_FALSE(payload.results.empty());
    CHECK(payload.results[0].object_id == "finance/nvidia");
    CHECK(payload.results[0].rank == 1);
    CHECK_FALSE(payload.results[0].snippet.empty());

    // Ranks are consecutive from 1.
    for (std::size_t i = 0; i < payload.results.size(); ++i) {
        CHECK(payload.results[i].rank == static_cast<int>(i) + 1);
    }

    // The tagged organization surfaces in the entity summary.
    REQUIRE(payload.related_entities.contains("ORGANIZATION"));
    const auto& orgs = payload.related_entities.at("ORGANIZATION");
    CHECK(std::find(orgs.begin(), orgs.end(), "Nvidia") != orgs.end());

    // All five stage timings are always present.
    for (const char* stage : {"validate", "embed", "search", "fuse", "rerank"}) {
        CHECK(payload.timings_ms.contains(stage));
    }
}

TEST_CASE("skipped stages report zero time") {
    Corpus corpus;
    QueryRequest raw;
    raw.text = "nvidia revenue";
    raw.mode = Mode::keyword;
    raw.rerank = false; // keyword without rerank never embeds
    const auto payload = retrieval::execute_query(corpus.ctx(), raw);
    CHECK(payload.timings_ms.at("embed") == 0.0);
    CHECK(payload.timings_ms.at("rerank") == 0.0);
    CHECK(payload.timings_ms.size() == 5);
}

TEST_CASE("alpha boundaries reproduce the single-channel orderings") {
    Corpus corpus;
    const auto run = [&](Mode mode, double alpha) {
        QueryRequest raw;
        raw.text = "nvidia revenue growth";
        raw.mode = mode;
        raw.alpha = alpha;
        raw.rerank = false;
        raw.k = 4;
        return retrieval::execute_query(corpus.ctx(), raw);
    };

    // At alpha=1 the keyword-channel documents (raw BM25 > 0) must appear in
    // exactly the keyword-mode order; semantic-only documents trail at 0.
    const auto hybrid_kw = run(Mode::hybrid, 1.0);
    std::vector<std::string> kw_subsequence;
    for (const auto& r : hybrid_kw.results) {
        if (r.keyword_score > 0.0) {
            kw_subsequence.push_back(r.object_id);
        }
    }
    CHECK(kw_subsequence == result_ids(run(Mode::keyword, 0.5)));

    // At alpha=0 the semantic-channel documents (those carrying a chunk) must
    // appear in exactly the semantic-mode order.
    const auto hybrid_sem = run(Mode::hybrid, 0.0);
    std::vector<std::string> sem_subsequence;
    for (const auto& r : hybrid_sem.results) {
        if (r.chunk_id.has_value()) {
            sem_subsequence.push_back(r.object_id);
        }
    }
    CHECK(sem_subsequence == result_ids(run(Mode::semantic, 0.5)));
    CHECK(hybrid_kw.results.size() <= 4);
}

TEST_CASE("alpha shifts hybrid scores toward the favored channel") {
    Corpus corpus;
    const auto fused_of = [&](double alpha, const std::string& id) {
        QueryRequest raw;
        raw.text = "nvidia revenue growth";
        raw.mode = Mode::hybrid;
        raw.alpha = alpha;
        raw.rerank = false;
        raw.k = 4;
        const auto payload = retrieval::execute_query(corpus.ctx(), raw);
        for (const auto& r : payload.results) {
            if (r.object_id == id) {
                return r.fused_score;
            }
        }
        return -1.0;
    };

    // The top keyword document holds normalized keyword score 1; its fused
    // score must rise linearly with alpha unless it also tops the semantic
    // channel (then it pins at 1 everywhere).
    const double lo = fused_of(0.2, "finance/nvidia");
    const double hi = fused_of(0.8, "finance/nvidia");
    CHECK(lo >= 0.0);
    CHECK(hi >= lo);
}

TEST_CASE("queries matching nothing return an empty result set") {
    Corpus corpus;
    QueryRequest raw;
    raw.text = "zzzqqq"; // no such token anywhere
    raw.mode = Mode::keyword;
    const auto payload = retrieval::execute_query(corpus.ctx(), raw);
    CHECK(payload.results.empty());
    CHECK(payload.related_entities.empty());
    CHECK(payload.resolved_mode == Mode::keyword);
}

TEST_CASE("pipeline errors carry the failing stage") {
    Corpus corpus;
    QueryRequest raw;
    raw.text = "   ";
    try {
        retrieval::execute_query(corpus.ctx(), raw);
        FAIL("expected EmptyQuery");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyQuery);
        CHECK(e.stage() == "validate");
    }
}

TEST_CASE("k truncates after re-ranking") {
    Corpus corpus;
    QueryRequest raw;
    raw.text = "financial risk management frameworks policy";
    raw.mode = Mode::hybrid;
    raw.k = 2;
    const auto payload = retrieval::execute_query(corpus.ctx(), raw);
    CHECK(payload.results.size() <= 2);
    REQUIRE_FALSE(payload.results.empty());
    CHECK(payload.results[0].object_id == "finance/risk");
}

TEST_CASE("semantic mode finds paraphrases that keyword misses") {
    Corpus corpus;
    // Shares "risk management" vocabulary with finance/risk.
    QueryRequest raw;
    raw.text = "risk management policy frameworks";
    raw.mode = Mode::semantic;
    const auto payload = retrieval::execute_query(corpus.ctx(), raw);
    REQUIRE_FALSE(payload.results.empty());
    CHECK(payload.results[0].object_id == "finance/risk");
    // Semantic results carry their best chunk.
    REQUIRE(payload.results[0].chunk_id.has_value());
    CHECK(payload.results[0].chunk_id->rfind("finance/risk#", 0) == 0);
}
