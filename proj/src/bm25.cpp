#include "finq/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "finq/errors.hpp"

namespace finq::index {

double Bm25Index::idf(std::size_t df) const {
    const double n = static_cast<double>(live_count_);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Bm25Index::average_length() const {
    if (live_count_ == 0) {
        return 0.0;
    }
    return static_cast<double>(total_length_) / static_cast<double>(live_count_);
}

std::size_t Bm25Index::lower_bound(const std::vector<Posting>& list, const std::string& doc_id) const {
    auto it = std::lower_bound(list.begin(), list.end(), doc_id,
                               [this](const Posting& p, const std::string& id) {
                                   return doc_ids_[p.slot] < id;
                               });
    return static_cast<std::size_t>(it - list.begin());
}

void Bm25Index::add_document(const std::string& doc_id, std::span<const std::string> terms) {
    if (slot_of_.contains(doc_id)) {
        raise(ErrorCode::DuplicateDocId, "index", "document already indexed: " + doc_id);
    }
    const auto slot = static_cast<std::uint32_t>(doc_ids_.size());
    doc_ids_.push_back(doc_id);
    doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    slot_of_.emplace(doc_id, slot);

    std::map<std::string, std::uint32_t> tf; // sorted so forward lists are deterministic
    for (const auto& term : terms) {
        ++tf[term];
    }
    std::vector<std::pair<std::string, std::uint32_t>> forward;
    forward.reserve(tf.size());
    for (const auto& [term, count] : tf) {
        auto& list = postings_[term];
        list.insert(list.begin() + static_cast<std::ptrdiff_t>(lower_bound(list, doc_id)),
                    Posting{slot, count});
        forward.emplace_back(term, count);
    }
    forward_.push_back(std::move(forward));

    total_length_ += terms.size();
    ++live_count_;
}

void Bm25Index::remove_document(const std::string& doc_id) {
    auto it = slot_of_.find(doc_id);
    if (it == slot_of_.end()) {
        raise(ErrorCode::UnknownDocId, "index", "unknown document: " + doc_id);
    }
    const std::uint32_t slot = it->second;
    for (const auto& [term, tf] : forward_[slot]) {
        (void)tf;
        auto pit = postings_.find(term);
        if (pit == postings_.end()) {
            continue;
        }
        auto& list = pit->second;
        const std::size_t pos = lower_bound(list, doc_id);
        if (pos < list.size() && list[pos].slot == slot) {
            list.erase(list.begin() + static_cast<std::ptrdiff_t>(pos));
        }
        if (list.empty()) {
            postings_.erase(pit);
        }
    }
    forward_[slot].clear();
    total_length_ -= doc_lengths_[slot];
    doc_lengths_[slot] = 0;
    --live_count_;
    slot_of_.erase(it);
}

double Bm25Index::score(std::span<const std::string> query_terms, const std::string& doc_id) const {
    auto it = slot_of_.find(doc_id);
    if (it == slot_of_.end()) {
        raise(ErrorCode::UnknownDocId, "index", "unknown document: " + doc_id);
    }
    const std::uint32_t slot = it->second;
    const double dl = doc_lengths_[slot];
    const double avgdl = average_length();
    const double k1 = params_.k1;
    const double b = params_.b;

    double total = 0.0;
    for (const auto& term : query_terms) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) {
            continue;
        }
        const auto& list = pit->second;
        const std::size_t pos = lower_bound(list, doc_id);
        if (pos >= list.size() || list[pos].slot != slot) {
            continue;
        }
        const double tf = list[pos].tf;
        const double norm = tf + k1 * (1.0 - b + b * dl / avgdl);
        total += idf(list.size()) * tf * (k1 + 1.0) / norm;
    }
    return total;
}

std::vector<Bm25Index::ScoredDoc> Bm25Index::search(std::span<const std::string> query_terms,
                                                    std::size_t k) const {
    const double avgdl = average_length();
    const double k1 = params_.k1;
    const double b = params_.b;

    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& term : query_terms) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) {
            continue;
        }
        const auto& list = pit->second;
        const double term_idf = idf(list.size());
        for (const Posting& p : list) {
            const double tf = p.tf;
            const double dl = doc_lengths_[p.slot];
            const double norm = tf + k1 * (1.0 - b + b * dl / avgdl);
            acc[p.slot] += term_idf * tf * (k1 + 1.0) / norm;
        }
    }

    std::vector<ScoredDoc> hits;
    hits.reserve(acc.size());
    for (const auto& [slot, score] : acc) {
        if (score > 0.0) {
            hits.push_back(ScoredDoc{doc_ids_[slot], score});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b2) {
        if (a.score != b2.score) {
            return a.score > b2.score;
        }
        return a.doc_id < b2.doc_id;
    });
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

std::vector<Bm25Index::PostingsEntry> Bm25Index::dump_postings() const {
    std::vector<PostingsEntry> out;
    out.reserve(postings_.size());
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, list] : postings_) {
        (void)list;
        terms.push_back(&term);
    }
    std::sort(terms.begin(), terms.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (const std::string* term : terms) {
        const auto& list = postings_.at(*term);
        PostingsEntry entry;
        entry.term = *term;
        entry.docs.reserve(list.size());
        for (const Posting& p : list) {
            entry.docs.emplace_back(doc_ids_[p.slot], p.tf);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<std::pair<std::string, std::uint32_t>> Bm25Index::dump_doc_lengths() const {
    std::vector<std::pair<std::string, std::uint32_t>> out;
    out.reserve(slot_of_.size());
    for (const auto& [id, slot] : slot_of_) {
        out.emplace_back(id, doc_lengths_[slot]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Bm25Index Bm25Index::restore(Params params,
                             const std::vector<std::pair<std::string, std::uint32_t>>& doc_lengths,
                             const std::vector<PostingsEntry>& postings) {
    Bm25Index out(params);
    for (const auto& [id, length] : doc_lengths) {
        const auto slot = static_cast<std::uint32_t>(out.doc_ids_.size());
        out.doc_ids_.push_back(id);
        out.doc_lengths_.push_back(length);
        out.slot_of_.emplace(id, slot);
        out.forward_.emplace_back();
        out.total_length_ += length;
        ++out.live_count_;
    }
    for (const auto& entry : postings) {
        auto& list = out.postings_[entry.term];
        list.reserve(entry.docs.size());
        for (const auto& [id, tf] : entry.docs) {
            const std::uint32_t slot = out.slot_of_.at(id);
            list.push_back(Posting{slot, tf});
            out.forward_[slot].emplace_back(entry.term, tf);
        }
        std::sort(list.begin(), list.end(), [&](const Posting& a, const Posting& b) {
            return out.doc_ids_[a.slot] < out.doc_ids_[b.slot];
        });
    }
    return out;
}

} // namespace finq::index
