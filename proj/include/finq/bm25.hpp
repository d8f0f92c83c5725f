#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace finq::index {

/// Okapi BM25 inverted index over whole documents. Externally synchronized:
/// the composite SearchIndex holds the reader/writer lock.
class Bm25Index {
public:
    struct Params {
        double k1 = 1.2;
        double b = 0.75;
    };

    struct ScoredDoc {
        std::string doc_id;
        double score = 0.0;
    };

    Bm25Index() = default;
    explicit Bm25Index(Params params) : params_(params) {}

    /// Throws DuplicateDocId. Terms are the document's keyword multiset.
    void add_document(const std::string& doc_id, std::span<const std::string> terms);

    /// Throws UnknownDocId. Postings, N and avgdl are updated; the document
    /// can never appear in later queries.
    void remove_document(const std::string& doc_id);

    /// Okapi BM25 with the non-negative IDF variant
    /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); query terms contribute
    /// per occurrence. Throws UnknownDocId.
    double score(std::span<const std::string> query_terms, const std::string& doc_id) const;

    /// Documents containing at least one query term, by score descending,
    /// ties by ascending doc_id, truncated to k. Zero-score docs excluded.
    std::vector<ScoredDoc> search(std::span<const std::string> query_terms, std::size_t k) const;

    bool contains(const std::string& doc_id) const { return slot_of_.contains(doc_id); }
    std::size_t document_count() const { return live_count_; }
    double average_length() const;
    const Params& params() const { return params_; }

    // --- snapshot support -------------------------------------------------
    struct PostingsEntry {
        std::string term;
        std::vector<std::pair<std::string, std::uint32_t>> docs; // (doc_id, tf)
    };
    /// Deterministic full dump: terms ascending, docs ascending.
    std::vector<PostingsEntry> dump_postings() const;
    std::vector<std::pair<std::string, std::uint32_t>> dump_doc_lengths() const;
    static Bm25Index restore(Params params,
                             const std::vector<std::pair<std::string, std::uint32_t>>& doc_lengths,
                             const std::vector<PostingsEntry>& postings);

private:
    struct Posting {
        std::uint32_t slot = 0;
        std::uint32_t tf = 0;
    };

    double idf(std::size_t df) const;
    // insertion position keeping the list ordered by external doc_id
    std::size_t lower_bound(const std::vector<Posting>& list, const std::string& doc_id) const;

    Params params_{};
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::string> doc_ids_;              // slot -> external id
    std::vector<std::uint32_t> doc_lengths_;        // slot -> token count
    std::vector<std::vector<std::pair<std::string, std::uint32_t>>> forward_; // slot -> (term, tf)
    std::unordered_map<std::string, std::uint32_t> slot_of_;
    std::uint64_t total_length_ = 0;
    std::size_t live_count_ = 0;
};

} // namespace finq::index
