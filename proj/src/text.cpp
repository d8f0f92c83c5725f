#include "finq/text.hpp"

#include <cctype>
#include <fstream>

#include "finq/errors.hpp"

namespace finq::text {

namespace {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::vector<Token> tokenize(std::string_view body) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = body.size();
    while (i < n) {
        while (i < n && is_space(body[i])) {
            ++i;
        }
        if (i >= n) {
            break;
        }
        const std::size_t begin = i;
        while (i < n && !is_space(body[i])) {
            ++i;
        }
        Token t;
        t.begin = begin;
        t.end = i;
        t.core_begin = begin;
        t.core_end = i;
        while (t.core_begin < t.core_end && is_ascii_punct(body[t.core_begin])) {
            ++t.core_begin;
        }
        while (t.core_end > t.core_begin && is_ascii_punct(body[t.core_end - 1])) {
            --t.core_end;
        }
        tokens.push_back(t);
    }
    return tokens;
}

std::size_t count_tokens(std::string_view body) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : body) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::string fold_case(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::vector<std::string> fold_tokens(std::string_view body) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(body)) {
        out.push_back(fold_case(body.substr(t.begin, t.end - t.begin)));
    }
    return out;
}

StopWords::StopWords(std::vector<std::string> words) : words_(std::move(words)) {
    set_.insert(words_.begin(), words_.end());
}

const StopWords& StopWords::builtin() {
    static const StopWords instance{std::vector<std::string>{
        "the", "a", "an", "and", "or", "of", "to", "in", "on", "for",
        "with", "is", "are", "was", "were", "be", "been", "being", "by", "at",
        "as", "it", "its", "this", "that", "these", "those", "from", "but", "not",
        "no", "so", "if", "then", "than", "too", "very", "can", "will", "just",
        "do", "does", "did", "have", "has", "had", "about", "into", "over", "under",
    }};
    return instance;
}

StopWords StopWords::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::UnreadableLocation, "config", "cannot open stop-word file: " + path);
    }
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        words.push_back(fold_case(line));
    }
    return StopWords(std::move(words));
}

bool StopWords::contains(std::string_view folded_word) const {
    return set_.contains(std::string(folded_word));
}

std::vector<std::string> query_terms(std::string_view query, const StopWords* stop_words) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(query)) {
        if (t.core_end <= t.core_begin) {
            continue;
        }
        std::string term = fold_case(query.substr(t.core_begin, t.core_end - t.core_begin));
        if (stop_words != nullptr && stop_words->contains(term)) {
            continue;
        }
        out.push_back(std::move(term));
    }
    return out;
}

std::string make_snippet(std::string_view body, std::size_t max_bytes) {
    if (body.size() <= max_bytes) {
        return std::string(body);
    }
    std::size_t cut = max_bytes;
    // back off to a UTF-8 sequence boundary
    while (cut > 0 && (static_cast<unsigned char>(body[cut]) & 0xC0) == 0x80) {
        --cut;
    }
    return std::string(body.substr(0, cut)) + "...";
}

} // namespace finq::text
