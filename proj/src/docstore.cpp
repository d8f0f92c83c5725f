#include "finq/docstore.hpp"

#include "finq/errors.hpp"

namespace finq::index {

void DocumentStore::put(StoredDocument doc) {
    docs_[doc.object_id] = std::move(doc);
}

void DocumentStore::remove(const std::string& object_id) {
    if (docs_.erase(object_id) == 0) {
        raise(ErrorCode::UnknownDocId, "index", "unknown document: " + object_id);
    }
}

const StoredDocument* DocumentStore::find(const std::string& object_id) const {
    auto it = docs_.find(object_id);
    return it == docs_.end() ? nullptr : &it->second;
}

} // namespace finq::index
