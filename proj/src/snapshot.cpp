// Binary snapshot persistence for SearchIndex.
//
// Layout (all integers little-endian):
//   magic   8 bytes  "FINQIDX1"
//   version u8       1
//   4 x section: u64 payload length + payload
//     [0] document store   [1] keyword postings
//     [2] vector graph     [3] node -> chunk_id mapping
//
// Strings are u64 length + raw bytes. Vectors are stored as raw IEEE-754
// f32 bit patterns, so a round trip reproduces scores bit-for-bit.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "finq/errors.hpp"
#include "finq/indexer.hpp"

namespace finq::index {
namespace {

[[noreturn]] void io_fail(const std::string& msg) {
    raise(ErrorCode::SnapshotIOError, "snapshot", msg);
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return size_ - pos_; }
    bool exhausted() const { return pos_ == size_; }

private:
    void need(std::uint64_t n) {
        if (n > size_ - pos_) {
            io_fail("truncated snapshot");
        }
    }
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

/// Has friend access to SearchIndex internals.
struct SnapshotCodec {
    static std::string encode_docs(const DocumentStore& docs) {
        ByteWriter w;
        w.u64(docs.size());
        for (const auto& [id, doc] : docs.all()) {
            w.str(doc.object_id);
            w.str(doc.title);
            w.u8(static_cast<std::uint8_t>(doc.category));
            w.i64(doc.timestamp);
            w.str(doc.snippet);
            w.u64(doc.entities.size());
            for (const EntityTag& e : doc.entities) {
                w.str(e.surface);
                w.u8(static_cast<std::uint8_t>(e.entity_type));
                w.u64(e.begin);
                w.u64(e.end);
            }
            w.u64(doc.metadata.size());
            for (const auto& [k, v] : doc.metadata) {
                w.str(k);
                w.str(v);
            }
            w.u64(doc.chunk_ids.size());
            for (const std::string& cid : doc.chunk_ids) {
                w.str(cid);
            }
            w.u64(doc.body_token_count);
        }
        return w.bytes();
    }

    static DocumentStore decode_docs(ByteReader& r) {
        DocumentStore docs;
        const std::uint64_t n = r.u64();
        for (std::uint64_t i = 0; i < n; ++i) {
            StoredDocument doc;
            doc.object_id = r.str();
            doc.title = r.str();
            doc.category = static_cast<Category>(r.u8());
            doc.timestamp = r.i64();
            doc.snippet = r.str();
            const std::uint64_t ne = r.u64();
            doc.entities.reserve(ne);
            for (std::uint64_t j = 0; j < ne; ++j) {
                EntityTag e;
                e.surface = r.str();
                e.entity_type = static_cast<EntityType>(r.u8());
                e.begin = r.u64();
                e.end = r.u64();
                doc.entities.push_back(std::move(e));
            }
            const std::uint64_t nm = r.u64();
            for (std::uint64_t j = 0; j < nm; ++j) {
                std::string k = r.str();
                doc.metadata[k] = r.str();
            }
            const std::uint64_t nc = r.u64();
            doc.chunk_ids.reserve(nc);
            for (std::uint64_t j = 0; j < nc; ++j) {
                doc.chunk_ids.push_back(r.str());
            }
            doc.body_token_count = r.u64();
            docs.put(std::move(doc));
        }
        return docs;
    }

    static std::string encode_bm25(const Bm25Index& bm25) {
        ByteWriter w;
        w.f64(bm25.params().k1);
        w.f64(bm25.params().b);
        const auto lengths = bm25.dump_doc_lengths();
        w.u64(lengths.size());
        for (const auto& [id, len] : lengths) {
            w.str(id);
            w.u32(len);
        }
        const auto postings = bm25.dump_postings();
        w.u64(postings.size());
        for (const auto& entry : postings) {
            w.str(entry.term);
            w.u64(entry.docs.size());
            for (const auto& [id, tf] : entry.docs) {
                w.str(id);
                w.u32(tf);
            }
        }
        return w.bytes();
    }

    static Bm25Index decode_bm25(ByteReader& r) {
        Bm25Index::Params params;
        params.k1 = r.f64();
        params.b = r.f64();
        const std::uint64_t ndocs = r.u64();
        std::vector<std::pair<std::string, std::uint32_t>> lengths;
        lengths.reserve(ndocs);
        for (std::uint64_t i = 0; i < ndocs; ++i) {
            std::string id = r.str();
            const std::uint32_t len = r.u32();
            lengths.emplace_back(std::move(id), len);
        }
        const std::uint64_t nterms = r.u64();
        std::vector<Bm25Index::PostingsEntry> postings;
        postings.reserve(nterms);
        for (std::uint64_t i = 0; i < nterms; ++i) {
            Bm25Index::PostingsEntry entry;
            entry.term = r.str();
            const std::uint64_t nd = r.u64();
            entry.docs.reserve(nd);
            for (std::uint64_t j = 0; j < nd; ++j) {
                std::string id = r.str();
                const std::uint32_t tf = r.u32();
                entry.docs.emplace_back(std::move(id), tf);
            }
            postings.push_back(std::move(entry));
        }
        return Bm25Index::restore(params, lengths, postings);
    }

    static std::string encode_hnsw(const HnswIndex& hnsw) {
        ByteWriter w;
        const auto& p = hnsw.params();
        w.u64(p.dims);
        w.u64(p.M);
        w.u64(p.ef_construction);
        w.u64(p.ef_search);
        w.u64(p.seed);
        w.u8(static_cast<std::uint8_t>(p.metric));
        const std::uint32_t n = static_cast<std::uint32_t>(hnsw.node_count());
        w.u32(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto view = hnsw.node_view(i);
            w.u32(view.level);
            w.u8(view.deleted ? 1 : 0);
            for (const auto& layer : view.neighbors) {
                w.u64(layer.size());
                for (std::uint32_t nb : layer) {
                    w.u32(nb);
                }
            }
        }
        w.u32(hnsw.entry_point());
        w.u32(hnsw.max_level());
        w.u64(std::uint64_t(n) * p.dims);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (float v : hnsw.vector_of_node(i)) {
                w.f32(v);
            }
        }
        w.str(hnsw.rng_state());
        return w.bytes();
    }

    static HnswIndex decode_hnsw(ByteReader& r, std::vector<std::string> chunk_ids) {
        HnswIndex::Params params;
        params.dims = r.u64();
        params.M = r.u64();
        params.ef_construction = r.u64();
        params.ef_search = r.u64();
        params.seed = r.u64();
        params.metric = static_cast<Metric>(r.u8());
        const std::uint32_t n = r.u32();
        if (chunk_ids.size() != n) {
            io_fail("node mapping does not match graph size");
        }
        std::vector<HnswIndex::NodeView> nodes;
        nodes.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            HnswIndex::NodeView view;
            view.chunk_id = std::move(chunk_ids[i]);
            view.level = r.u32();
            view.deleted = r.u8() != 0;
            view.neighbors.resize(view.level + 1);
            for (auto& layer : view.neighbors) {
                const std::uint64_t cnt = r.u64();
                layer.reserve(cnt);
                for (std::uint64_t j = 0; j < cnt; ++j) {
                    const std::uint32_t nb = r.u32();
                    if (nb >= n) {
                        io_fail("neighbor id out of range");
                    }
                    layer.push_back(nb);
                }
            }
            nodes.push_back(std::move(view));
        }
        const std::uint32_t entry = r.u32();
        const std::uint32_t max_level = r.u32();
        if (entry != HnswIndex::kNone && entry >= n) {
            io_fail("entry point out of range");
        }
        const std::uint64_t nfloats = r.u64();
        if (nfloats != std::uint64_t(n) * params.dims) {
            io_fail("vector payload does not match graph size");
        }
        std::vector<float> vectors(nfloats);
        for (std::uint64_t i = 0; i < nfloats; ++i) {
            vectors[i] = r.f32();
        }
        std::string rng = r.str();
        return HnswIndex::restore(params, std::move(nodes), std::move(vectors), entry, max_level,
                                  rng);
    }

    static void save(const SearchIndex& index, const std::string& path) {
        std::shared_lock lock(index.mutex_);

        ByteWriter mapping;
        const std::uint32_t n = static_cast<std::uint32_t>(index.hnsw_.node_count());
        mapping.u64(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            mapping.str(index.hnsw_.node_view(i).chunk_id);
        }

        const std::string sections[4] = {
            encode_docs(index.docs_),
            encode_bm25(index.bm25_),
            encode_hnsw(index.hnsw_),
            mapping.bytes(),
        };

        ByteWriter out;
        for (char c : kSnapshotMagic) {
            out.u8(static_cast<std::uint8_t>(c));
        }
        out.u8(kSnapshotVersion);
        for (const std::string& s : sections) {
            out.str(s);
        }
        lock.unlock();

        // Write to a sibling temp file and rename, so a crash mid-write never
        // leaves a truncated snapshot in place of a good one.
        const std::string tmp = path + ".tmp";
        {
            std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
            if (!file) {
                io_fail("cannot open for writing: " + tmp);
            }
            file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
            file.flush();
            if (!file) {
                io_fail("write failed: " + tmp);
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            io_fail("rename failed: " + path + " (" + ec.message() + ")");
        }
    }

    static void load(SearchIndex& index, const std::string& path) {
        std::ifstream file(path, std::ios::binary);
        if (!file) {
            io_fail("cannot open: " + path);
        }
        std::string blob((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
        file.close();

        ByteReader header(blob.data(), blob.size());
        char magic[8];
        for (char& c : magic) {
            c = static_cast<char>(header.u8());
        }
        if (std::memcmp(magic, kSnapshotMagic, 8) != 0) {
            io_fail("not a snapshot file: " + path);
        }
        const std::uint8_t version = header.u8();
        if (version != kSnapshotVersion) {
            raise(ErrorCode::VersionMismatch, "snapshot",
                  "unsupported snapshot version " + std::to_string(version) + " (expected " +
                      std::to_string(kSnapshotVersion) + ")");
        }
        std::string sections[4];
        for (std::string& s : sections) {
            s = header.str();
        }
        if (!header.exhausted()) {
            io_fail("trailing bytes after snapshot payload");
        }

        ByteReader docs_r(sections[0].data(), sections[0].size());
        DocumentStore docs = decode_docs(docs_r);
        if (!docs_r.exhausted()) {
            io_fail("document section has trailing bytes");
        }

        ByteReader bm25_r(sections[1].data(), sections[1].size());
        Bm25Index bm25 = decode_bm25(bm25_r);
        if (!bm25_r.exhausted()) {
            io_fail("postings section has trailing bytes");
        }

        ByteReader map_r(sections[3].data(), sections[3].size());
        const std::uint64_t nmap = map_r.u64();
        std::vector<std::string> chunk_ids;
        chunk_ids.reserve(nmap);
        for (std::uint64_t i = 0; i < nmap; ++i) {
            chunk_ids.push_back(map_r.str());
        }
        if (!map_r.exhausted()) {
            io_fail("mapping section has trailing bytes");
        }

        ByteReader hnsw_r(sections[2].data(), sections[2].size());
        HnswIndex hnsw = decode_hnsw(hnsw_r, std::move(chunk_ids));
        if (!hnsw_r.exhausted()) {
            io_fail("graph section has trailing bytes");
        }

        // Cross-section consistency: every stored chunk must have a live node.
        std::unordered_set<std::string> live;
        for (std::uint32_t i = 0; i < hnsw.node_count(); ++i) {
            const auto view = hnsw.node_view(i);
            if (!view.deleted) {
                live.insert(view.chunk_id);
            }
        }
        for (const auto& [id, doc] : docs.all()) {
            for (const std::string& cid : doc.chunk_ids) {
                if (!live.contains(cid)) {
                    io_fail("document " + id + " references missing chunk " + cid);
                }
            }
        }
        if (bm25.document_count() != docs.size()) {
            io_fail("postings document count does not match document store");
        }

        std::unique_lock lock(index.mutex_);
        index.config_.hnsw = hnsw.params();
        index.config_.bm25 = bm25.params();
        index.hnsw_ = std::move(hnsw);
        index.bm25_ = std::move(bm25);
        index.docs_ = std::move(docs);
    }
};

void SearchIndex::save(const std::string& path) const {
    SnapshotCodec::save(*this, path);
}

void SearchIndex::load(const std::string& path) {
    SnapshotCodec::load(*this, path);
}

} // namespace finq::index
