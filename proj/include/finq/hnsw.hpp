#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace finq::index {

enum class Metric {
    cosine,
    dot, // identical to cosine on unit vectors
};

/// Hierarchical Navigable Small Worlds graph over unit-normalized f32
/// vectors, keyed by chunk id. Deletion is tombstoning: removed nodes stay
/// navigable but never appear in results; rebuild() compacts when tombstones
/// accumulate. Externally synchronized (see SearchIndex).
class HnswIndex {
public:
    struct Params {
        std::size_t dims = 256;
        std::size_t M = 16;              // per-layer degree bound (2M at layer 0)
        std::size_t ef_construction = 200;
        std::size_t ef_search = 64;
        std::uint64_t seed = 0x51ee7;
        Metric metric = Metric::cosine;
    };

    struct Hit {
        std::string chunk_id;
        float similarity = 0.0f;
    };

    HnswIndex() : HnswIndex(Params{}) {}
    explicit HnswIndex(Params params);

    /// Inserts a unit vector. Throws DimensionMismatch, DuplicateChunkId,
    /// InvalidParameter (non-finite or non-unit input).
    std::uint32_t insert(const std::string& chunk_id, std::span<const float> vector);

    /// Top-k by similarity descending, ties by ascending chunk_id. An empty
    /// index yields an empty list. Throws DimensionMismatch.
    std::vector<Hit> search(std::span<const float> query, std::size_t k, std::size_t ef) const;
    std::vector<Hit> search(std::span<const float> query, std::size_t k) const {
        return search(query, k, params_.ef_search);
    }

    /// Tombstones a chunk. Throws UnknownDocId.
    void remove(const std::string& chunk_id);

    bool contains(const std::string& chunk_id) const;
    /// Exact similarity between q and a stored chunk (used by re-ranking).
    float similarity_to(const std::string& chunk_id, std::span<const float> q) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t live_count() const { return live_count_; }
    double tombstone_fraction() const;
    bool needs_rebuild() const { return tombstone_fraction() > 0.5; }
    /// Reinserts live nodes (ascending chunk_id) into a fresh graph.
    void rebuild();

    const Params& params() const { return params_; }

    // --- introspection (tests, snapshots) ----------------------------------
    struct NodeView {
        std::string chunk_id;
        std::uint32_t level = 0;
        bool deleted = false;
        std::vector<std::vector<std::uint32_t>> neighbors; // per layer 0..level
    };
    NodeView node_view(std::uint32_t node) const;
    std::span<const float> vector_of_node(std::uint32_t node) const;
    std::uint32_t entry_point() const { return entry_; }
    std::uint32_t max_level() const { return max_level_; }
    static constexpr std::uint32_t kNone = 0xFFFFFFFF;

    std::string rng_state() const;
    void set_rng_state(const std::string& state);
    /// Snapshot restore: nodes and vectors in node-id order.
    static HnswIndex restore(Params params, std::vector<NodeView> nodes,
                             std::vector<float> vectors, std::uint32_t entry,
                             std::uint32_t max_level, const std::string& rng);

private:
    struct Node {
        std::string chunk_id;
        std::uint32_t level = 0;
        bool deleted = false;
        std::vector<std::vector<std::uint32_t>> neighbors;
    };

    struct Scored {
        float sim = 0.0f;
        std::uint32_t node = 0;
    };

    const float* vec(std::uint32_t node) const { return vectors_.data() + node * params_.dims; }
    float sim(std::span<const float> q, std::uint32_t node) const;
    std::uint32_t sample_level();
    std::uint32_t greedy_descend(std::span<const float> q, std::uint32_t ep,
                                 std::size_t layer) const;
    std::vector<Scored> search_layer(std::span<const float> q, std::uint32_t ep, std::size_t ef,
                                     std::size_t layer) const;
    void prune_neighbors(std::uint32_t node, std::size_t layer);
    std::size_t capacity(std::size_t layer) const {
        return layer == 0 ? 2 * params_.M : params_.M;
    }

    Params params_;
    double level_multiplier_ = 0.0; // 1 / ln(M)
    std::vector<Node> nodes_;
    std::vector<float> vectors_;
    std::unordered_map<std::string, std::uint32_t> id_of_;
    std::uint32_t entry_ = kNone;
    std::uint32_t max_level_ = 0;
    std::size_t live_count_ = 0;
    std::mt19937_64 rng_;
};

} // namespace finq::index
