#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "finq/enrich.hpp"
#include "finq/errors.hpp"
#include "finq/text.hpp"

using namespace finq;

namespace {

std::string numbered_body(int tokens) {
    std::string body;
    for (int i = 0; i < tokens; ++i) {
        if (!body.empty()) {
            body += ' ';
        }
        body += "w" + std::to_string(i);
    }
    return body;
}

} // namespace

TEST_CASE("a short body fits in a single chunk") {
    const std::string body = numbered_body(100);
    const auto chunks = enrich::chunk_text("obj", body, 512, 64);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].chunk_id == "obj#0");
    CHECK(chunks[0].token_count == 100);
    CHECK(chunks[0].ordinal == 0);
    CHECK(chunks[0].text == body);
}

TEST_CASE("a 1000-token body yields 3 chunks at stride 448") {
    // Window starts at tokens 0, 448, 896: ceil((1000-512)/448)+1 = 3.
    const std::string body = numbered_body(1000);
    const auto chunks = enrich::chunk_text("obj", body, 512, 64);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].token_count == 512);
    CHECK(chunks[1].token_count == 512);
    CHECK(chunks[2].token_count == 104); // tokens 896..999

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        CHECK(chunks[i].chunk_id == "obj#" + std::to_string(i));
        CHECK(chunks[i].ordinal == i);
    }

    // First token of each window confirms the stride.
    CHECK(chunks[0].text.substr(0, 2) == "w0");
    CHECK(chunks[1].text.substr(0, 4) == "w448");
    CHECK(chunks[2].text.substr(0, 4) == "w896");
}

TEST_CASE("empty and whitespace-only bodies are rejected") {
    CHECK_THROWS_AS(enrich::chunk_text("obj", "", 512, 64), Error);
    try {
        enrich::chunk_text("obj", "  \t\n ", 512, 64);
        FAIL("expected EmptyBody");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyBody);
    }
}

TEST_CASE("chunk_size must exceed overlap") {
    CHECK_THROWS_AS(enrich::chunk_text("obj", "a b c", 64, 64), Error);
    CHECK_THROWS_AS(enrich::chunk_text("obj", "a b c", 0, 0), Error);
    try {
        enrich::chunk_text("obj", "a b c", 32, 64);
        FAIL("expected InvalidParameter");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidParameter);
    }
}

TEST_CASE("chunk text slices the original body bytes") {
    const std::string body = "alpha  beta\tgamma\ndelta epsilon";
    const auto chunks = enrich::chunk_text("obj", body, 3, 1);
    REQUIRE(chunks.size() == 2);
    // Inner whitespace is preserved exactly as in the body.
    CHECK(chunks[0].text == "alpha  beta\tgamma");
    CHECK(chunks[1].text == "gamma\ndelta epsilon");
    for (const Chunk& chunk : chunks) {
        CHECK(body.find(chunk.text) != std::string::npos);
    }
}

TEST_CASE("consecutive full windows share exactly `overlap` tokens") {
    const std::string body = numbered_body(30);
    const auto chunks = enrich::chunk_text("obj", body, 10, 4);
    REQUIRE(chunks.size() >= 2);
    for (std::size_t i = 0; i + 1 < chunks.size(); ++i) {
        const auto current = text::fold_tokens(chunks[i].text);
        const auto next = text::fold_tokens(chunks[i + 1].text);
        if (current.size() < 10) {
            continue; // partial tail window
        }
        // Last 4 tokens of one window = first 4 of the next.
        const std::size_t shared = std::min<std::size_t>(4, next.size());
        for (std::size_t t = 0; t < shared; ++t) {
            CHECK(current[current.size() - 4 + t] == next[t]);
        }
    }
}

TEST_CASE("non-overlapping prefixes reconstruct the token stream") {
    for (int total : {1, 5, 6, 7, 12, 40, 100}) {
        const std::string body = numbered_body(total);
        const auto original = text::fold_tokens(body);
        const auto chunks = enrich::chunk_text("obj", body, 6, 2);

        std::vector<std::string> reassembled;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            auto tokens = text::fold_tokens(chunks[i].text);
            // All but the final chunk contribute their stride-sized prefix.
            const std::size_t take = i + 1 < chunks.size()
                                         ? std::min<std::size_t>(4, tokens.size())
                                         : tokens.size();
            reassembled.insert(reassembled.end(), tokens.begin(),
                               tokens.begin() + static_cast<std::ptrdiff_t>(take));
        }
        CHECK(reassembled == original);

        // Ordinals are contiguous from zero.
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            CHECK(chunks[i].ordinal == i);
        }
    }
}

TEST_CASE("every body token appears in at least one chunk") {
    const std::string body = numbered_body(47);
    const auto chunks = enrich::chunk_text("obj", body, 10, 3);
    std::vector<std::string> covered;
    for (const Chunk& chunk : chunks) {
        const auto tokens = text::fold_tokens(chunk.text);
        covered.insert(covered.end(), tokens.begin(), tokens.end());
    }
    for (const std::string& token : text::fold_tokens(body)) {
        CHECK(std::find(covered.begin(), covered.end(), token) != covered.end());
    }
}
