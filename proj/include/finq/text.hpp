#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace finq::text {

/// One whitespace-delimited token with byte offsets into the source text.
/// [begin, end) spans the raw token; [core_begin, core_end) is the token with
/// leading/trailing ASCII punctuation trimmed (used for query terms and
/// gazetteer matching). The core can be empty for all-punctuation tokens.
struct Token {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t core_begin = 0;
    std::size_t core_end = 0;
};

/// Maximal non-whitespace runs, in order.
std::vector<Token> tokenize(std::string_view body);

std::size_t count_tokens(std::string_view body);

/// ASCII case folding.
std::string fold_case(std::string_view s);

/// Case-folded raw tokens: the document-side keyword terms.
std::vector<std::string> fold_tokens(std::string_view body);

class StopWords {
public:
    StopWords() = default;
    explicit StopWords(std::vector<std::string> words);

    static const StopWords& builtin();
    static StopWords load(const std::string& path);

    bool contains(std::string_view folded_word) const;
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_set<std::string> set_;
};

/// Query-side terms: case-folded punctuation-trimmed tokens, empty cores
/// dropped, stop words removed when a list is given.
std::vector<std::string> query_terms(std::string_view query, const StopWords* stop_words);

/// UTF-8 safe prefix of at most max_bytes, for result snippets.
std::string make_snippet(std::string_view body, std::size_t max_bytes = 200);

} // namespace finq::text
