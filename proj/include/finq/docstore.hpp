#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finq/types.hpp"

namespace finq::index {

/// Per-document payload kept alongside the indexes: everything the retrieval
/// service needs to render results and re-rank.
struct StoredDocument {
    std::string object_id;
    std::string title;
    Category category = Category::document;
    UnixSeconds timestamp = 0;
    std::string snippet;
    std::vector<EntityTag> entities;
    std::map<std::string, std::string> metadata;
    std::vector<std::string> chunk_ids;
    std::uint32_t body_token_count = 0;
};

class DocumentStore {
public:
    void put(StoredDocument doc);
    void remove(const std::string& object_id);
    bool contains(const std::string& object_id) const { return docs_.contains(object_id); }
    const StoredDocument* find(const std::string& object_id) const;
    std::size_t size() const { return docs_.size(); }

    /// Deterministic (ascending object_id) iteration for snapshots.
    const std::map<std::string, StoredDocument>& all() const { return docs_; }

private:
    std::map<std::string, StoredDocument> docs_;
};

} // namespace finq::index
