#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "finq/errors.hpp"
#include "finq/hnsw.hpp"
#include "finq/vecops.hpp"

using namespace finq;
using index::HnswIndex;

namespace {

std::vector<float> random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> v(dims);
    for (float& x : v) {
        x = dist(rng);
    }
    vec::normalize(v);
    return v;
}

// Exact k-NN by brute force: the recall oracle.
std::vector<std::string> brute_force_top_k(const std::vector<std::vector<float>>& corpus,
                                           const std::vector<std::string>& ids,
                                           const std::vector<float>& query, std::size_t k) {
    std::vector<std::pair<float, std::string>> scored;
    scored.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        double dot = 0.0;
        for (std::size_t d = 0; d < query.size(); ++d) {
            dot += static_cast<double>(corpus[i][d]) * query[d];
        }
        scored.emplace_back(static_cast<float>(dot), ids[i]);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });
    std::vector<std::string> top;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        top.push_back(scored[i].second);
    }
    return top;
}

} // namespace

TEST_CASE("first insertion becomes the entry point and finds itself") {
    HnswIndex::Params params;
    params.dims = 8;
    HnswIndex idx(params);

    std::mt19937_64 rng(1);
    const auto v = random_unit(rng, 8);
    const std::uint32_t node = idx.insert("c0", v);
    CHECK(idx.entry_point() == node);
    CHECK(idx.node_count() == 1);
    CHECK(idx.live_count() == 1);

    const auto hits = idx.search(v, 1, 16);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].chunk_id == "c0");
    CHECK(hits[0].similarity == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("duplicate chunk ids are rejected") {
    HnswIndex::Params params;
    params.dims = 4;
    HnswIndex idx(params);
    std::vector<float> v{1.0f, 0.0f, 0.0f, 0.0f};
    idx.insert("c0", v);
    CHECK_THROWS_AS(idx.insert("c0", v), Error);
    try {
        idx.insert("c0", v);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateChunkId);
    }
}

TEST_CASE("dimension mismatches are rejected on insert and search") {
    HnswIndex::Params params;
    params.dims = 4;
    HnswIndex idx(params);
    std::vector<float> wrong{1.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS(idx.insert("c0", wrong), Error);

    std::vector<float> v{1.0f, 0.0f, 0.0f, 0.0f};
    idx.insert("c0", v);
    CHECK_THROWS_AS(idx.search(wrong, 1, 16), Error);
    try {
        idx.search(wrong, 1, 16);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("non-unit vectors are rejected") {
    HnswIndex::Params params;
    params.dims = 4;
    HnswIndex idx(params);
    std::vector<float> big{2.0f, 0.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS(idx.insert("c0", big), Error);
    std::vector<float> nan_vec{std::nanf(""), 0.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS(idx.insert("c1", nan_vec), Error);
}

TEST_CASE("search on an empty index returns nothing") {
    HnswIndex idx;
    std::mt19937_64 rng(2);
    CHECK(idx.search(random_unit(rng, 256), 10, 64).empty());
}

TEST_CASE("layer-0 graph stays connected and degree-bounded") {
    HnswIndex::Params params;
    params.dims = 16;
    params.M = 8;
    HnswIndex idx(params);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        idx.insert("c" + std::to_string(i), random_unit(rng, 16));
    }

    // Degree bounds per layer: M, 2M at layer 0; edges reference real nodes.
    for (std::uint32_t n = 0; n < idx.node_count(); ++n) {
        const auto view = idx.node_view(n);
        REQUIRE(view.neighbors.size() == view.level + 1);
        for (std::size_t layer = 0; layer < view.neighbors.size(); ++layer) {
            const std::size_t cap = layer == 0 ? 2 * params.M : params.M;
            CHECK(view.neighbors[layer].size() <= cap);
            for (std::uint32_t neighbor : view.neighbors[layer]) {
                CHECK(neighbor < idx.node_count());
                CHECK(neighbor != n);
            }
        }
    }

    // BFS from the entry point across layer 0 must reach every node.
    std::set<std::uint32_t> seen;
    std::queue<std::uint32_t> frontier;
    frontier.push(idx.entry_point());
    seen.insert(idx.entry_point());
    while (!frontier.empty()) {
        const std::uint32_t node = frontier.front();
        frontier.pop();
        const auto view = idx.node_view(node);
        for (std::uint32_t neighbor : view.neighbors[0]) {
            if (seen.insert(neighbor).second) {
                frontier.push(neighbor);
            }
        }
    }
    CHECK(seen.size() == idx.node_count());

    // Entry point has maximal level.
    const std::uint32_t entry_level = idx.node_view(idx.entry_point()).level;
    CHECK(entry_level == idx.max_level());
    for (std::uint32_t n = 0; n < idx.node_count(); ++n) {
        CHECK(idx.node_view(n).level <= entry_level);
    }
}

TEST_CASE("results are sorted by similarity with id tie-breaks") {
    HnswIndex::Params params;
    params.dims = 4;
    HnswIndex idx(params);
    // Two identical vectors (tie) plus an orthogonal one.
    std::vector<float> x{1.0f, 0.0f, 0.0f, 0.0f};
    std::vector<float> y{0.0f, 1.0f, 0.0f, 0.0f};
    idx.insert("b", x);
    idx.insert("a", x);
    idx.insert("z", y);

    const auto hits = idx.search(x, 3, 16);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].chunk_id == "a"); // tie broken by ascending id
    CHECK(hits[1].chunk_id == "b");
    CHECK(hits[2].chunk_id == "z");
    CHECK(hits[0].similarity == doctest::Approx(1.0f));
    CHECK(hits[2].similarity == doctest::Approx(0.0f));
}

TEST_CASE("recall against brute force at small scale") {
    HnswIndex::Params params;
    params.dims = 32;
    HnswIndex idx(params);

    std::mt19937_64 rng(5);
    std::vector<std::vector<float>> corpus;
    std::vector<std::string> ids;
    for (int i = 0; i < 500; ++i) {
        corpus.push_back(random_unit(rng, 32));
        ids.push_back("c" + std::to_string(i));
        idx.insert(ids.back(), corpus.back());
    }

    double recall_sum = 0.0;
    constexpr int kQueries = 30;
    for (int q = 0; q < kQueries; ++q) {
        const auto query = random_unit(rng, 32);
        const auto exact = brute_force_top_k(corpus, ids, query, 10);
        const auto approx = idx.search(query, 10, 200);
        std::set<std::string> exact_set(exact.begin(), exact.end());
        std::size_t overlap = 0;
        for (const auto& hit : approx) {
            overlap += exact_set.count(hit.chunk_id);
        }
        recall_sum += static_cast<double>(overlap) / 10.0;
    }
    CHECK(recall_sum / kQueries >= 0.85);
}

TEST_CASE("identical builds give identical results") {
    HnswIndex::Params params;
    params.dims = 16;
    params.seed = 99;
    HnswIndex a(params);
    HnswIndex b(params);

    std::mt19937_64 rng(7);
    std::vector<std::vector<float>> vectors;
    for (int i = 0; i < 200; ++i) {
        vectors.push_back(random_unit(rng, 16));
    }
    for (int i = 0; i < 200; ++i) {
        a.insert("c" + std::to_string(i), vectors[static_cast<std::size_t>(i)]);
        b.insert("c" + std::to_string(i), vectors[static_cast<std::size_t>(i)]);
    }
    CHECK(a.rng_state() == b.rng_state());

    std::mt19937_64 query_rng(8);
    for (int q = 0; q < 20; ++q) {
        const auto query = random_unit(query_rng, 16);
        const auto hits_a = a.search(query, 5, 64);
        const auto hits_b = b.search(query, 5, 64);
        REQUIRE(hits_a.size() == hits_b.size());
        for (std::size_t i = 0; i < hits_a.size(); ++i) {
            CHECK(hits_a[i].chunk_id == hits_b[i].chunk_id);
            CHECK(hits_a[i].similarity == hits_b[i].similarity); // bit-identical
        }
    }
}

TEST_CASE("removal tombstones a chunk without breaking navigation") {
    HnswIndex::Params params;
    params.dims = 16;
    HnswIndex idx(params);

    std::mt19937_64 rng(9);
    std::vector<std::vector<float>> vectors;
    for (int i = 0; i < 50; ++i) {
        vectors.push_back(random_unit(rng, 16));
        idx.insert("c" + std::to_string(i), vectors.back());
    }

    idx.remove("c7");
    CHECK_FALSE(idx.contains("c7"));
    CHECK(idx.live_count() == 49);
    CHECK(idx.node_count() == 50); // node still present as a tombstone

    const auto hits = idx.search(vectors[7], 50, 200);
    CHECK(hits.size() == 49);
    for (const auto& hit : hits) {
        CHECK(hit.chunk_id != "c7");
    }

    CHECK_THROWS_AS(idx.remove("c7"), Error); // already gone
    CHECK_THROWS_AS(idx.remove("ghost"), Error);
}

TEST_CASE("tombstone accumulation triggers rebuild eligibility") {
    HnswIndex::Params params;
    params.dims = 8;
    HnswIndex idx(params);

    std::mt19937_64 rng(11);
    std::vector<std::vector<float>> vectors;
    for (int i = 0; i < 4; ++i) {
        vectors.push_back(random_unit(rng, 8));
        idx.insert("c" + std::to_string(i), vectors.back());
    }
    CHECK_FALSE(idx.needs_rebuild());

    idx.remove("c0");
    idx.remove("c1");
    CHECK(idx.tombstone_fraction() == doctest::Approx(0.5));
    CHECK_FALSE(idx.needs_rebuild()); // strictly greater than one half

    idx.remove("c2");
    CHECK(idx.tombstone_fraction() == doctest::Approx(0.75));
    CHECK(idx.needs_rebuild());

    idx.rebuild();
    CHECK(idx.node_count() == 1);
    CHECK(idx.live_count() == 1);
    CHECK(idx.tombstone_fraction() == doctest::Approx(0.0));
    const auto hits = idx.search(vectors[3], 4, 16);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].chunk_id == "c3");
    CHECK(hits[0].similarity == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("similarity_to computes the exact stored-vector cosine") {
    HnswIndex::Params params;
    params.dims = 4;
    HnswIndex idx(params);
    std::vector<float> x{1.0f, 0.0f, 0.0f, 0.0f};
    const float inv_sqrt2 = 1.0f / std::sqrt(2.0f);
    std::vector<float> diag{inv_sqrt2, inv_sqrt2, 0.0f, 0.0f};
    idx.insert("c0", x);
    CHECK(idx.similarity_to("c0", diag) == doctest::Approx(inv_sqrt2).epsilon(1e-6));
    CHECK(idx.similarity_to("c0", x) == doctest::Approx(1.0f).epsilon(1e-6));
}
