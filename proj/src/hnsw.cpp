#include "finq/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "finq/errors.hpp"
#include "finq/vecops.hpp"

namespace finq::index {

HnswIndex::HnswIndex(Params params) : params_(params), rng_(params.seed) {
    if (params_.M < 2) {
        raise(ErrorCode::InvalidParameter, "index", "HNSW M must be >= 2");
    }
    if (params_.dims == 0) {
        raise(ErrorCode::InvalidParameter, "index", "HNSW dims must be positive");
    }
    level_multiplier_ = 1.0 / std::log(static_cast<double>(params_.M));
}

float HnswIndex::sim(std::span<const float> q, std::uint32_t node) const {
    return vec::dot(q, std::span<const float>(vec(node), params_.dims));
}

std::uint32_t HnswIndex::sample_level() {
    // 53-bit mantissa draw; independent of distribution implementations.
    double u;
    do {
        u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    const double level = -std::log(u) * level_multiplier_;
    return static_cast<std::uint32_t>(level);
}

std::uint32_t HnswIndex::greedy_descend(std::span<const float> q, std::uint32_t ep,
                                        std::size_t layer) const {
    float best = sim(q, ep);
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::uint32_t nb : nodes_[ep].neighbors[layer]) {
            const float s = sim(q, nb);
            if (s > best) {
                best = s;
                ep = nb;
                improved = true;
            }
        }
    }
    return ep;
}

std::vector<HnswIndex::Scored> HnswIndex::search_layer(std::span<const float> q, std::uint32_t ep,
                                                       std::size_t ef, std::size_t layer) const {
    std::vector<std::uint8_t> visited(nodes_.size(), 0);
    // frontier: best-first by similarity
    std::priority_queue<std::pair<float, std::uint32_t>> frontier;
    // kept results: min-heap so the worst of the ef best is on top
    std::priority_queue<std::pair<float, std::uint32_t>, std::vector<std::pair<float, std::uint32_t>>,
                        std::greater<>>
        best;

    const float entry_sim = sim(q, ep);
    visited[ep] = 1;
    frontier.emplace(entry_sim, ep);
    if (!nodes_[ep].deleted) {
        best.emplace(entry_sim, ep);
    }

    while (!frontier.empty()) {
        const auto [cand_sim, cand] = frontier.top();
        frontier.pop();
        if (best.size() >= ef && cand_sim < best.top().first) {
            break;
        }
        for (std::uint32_t nb : nodes_[cand].neighbors[layer]) {
            if (visited[nb]) {
                continue;
            }
            visited[nb] = 1;
            const float s = sim(q, nb);
            if (best.size() < ef || s > best.top().first) {
                frontier.emplace(s, nb);
                if (!nodes_[nb].deleted) {
                    best.emplace(s, nb);
                    if (best.size() > ef) {
                        best.pop();
                    }
                }
            }
        }
    }

    std::vector<Scored> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(Scored{best.top().first, best.top().second});
        best.pop();
    }
    std::reverse(out.begin(), out.end()); // similarity descending
    return out;
}

void HnswIndex::prune_neighbors(std::uint32_t node, std::size_t layer) {
    auto& list = nodes_[node].neighbors[layer];
    const std::size_t cap = capacity(layer);
    if (list.size() <= cap) {
        return;
    }
    const std::span<const float> self(vec(node), params_.dims);
    std::vector<Scored> scored;
    scored.reserve(list.size());
    for (std::uint32_t nb : list) {
        scored.push_back(Scored{sim(self, nb), nb});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) {
            return a.sim > b.sim;
        }
        return a.node < b.node;
    });
    list.clear();
    for (std::size_t i = 0; i < cap; ++i) {
        list.push_back(scored[i].node);
    }
}

std::uint32_t HnswIndex::insert(const std::string& chunk_id, std::span<const float> vector) {
    if (vector.size() != params_.dims) {
        raise(ErrorCode::DimensionMismatch, "index",
              "expected " + std::to_string(params_.dims) + " dims, got " +
                  std::to_string(vector.size()));
    }
    if (id_of_.contains(chunk_id)) {
        raise(ErrorCode::DuplicateChunkId, "index", "chunk already indexed: " + chunk_id);
    }
    const float norm = vec::l2_norm(vector);
    if (!std::isfinite(norm) || std::fabs(norm - 1.0f) > 1e-3f) {
        raise(ErrorCode::InvalidParameter, "index",
              "vector for " + chunk_id + " is not unit-normalized");
    }

    const auto node = static_cast<std::uint32_t>(nodes_.size());
    const std::uint32_t level = sample_level();
    Node n;
    n.chunk_id = chunk_id;
    n.level = level;
    n.neighbors.resize(level + 1);
    nodes_.push_back(std::move(n));
    vectors_.insert(vectors_.end(), vector.begin(), vector.end());
    id_of_.emplace(chunk_id, node);
    ++live_count_;

    if (entry_ == kNone) {
        entry_ = node;
        max_level_ = level;
        return node;
    }

    std::uint32_t ep = entry_;
    for (std::size_t layer = max_level_; layer > level; --layer) {
        ep = greedy_descend(vector, ep, layer);
    }
    for (std::size_t layer = std::min<std::uint32_t>(level, max_level_) + 1; layer-- > 0;) {
        const auto candidates = search_layer(vector, ep, params_.ef_construction, layer);
        const std::size_t take = std::min(params_.M, candidates.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::uint32_t nb = candidates[i].node;
            if (nb == node) {
                continue;
            }
            nodes_[node].neighbors[layer].push_back(nb);
            nodes_[nb].neighbors[layer].push_back(node);
            prune_neighbors(nb, layer);
        }
        if (!candidates.empty()) {
            ep = candidates[0].node;
        }
    }
    if (level > max_level_) {
        max_level_ = level;
        entry_ = node;
    }
    return node;
}

std::vector<HnswIndex::Hit> HnswIndex::search(std::span<const float> query, std::size_t k,
                                              std::size_t ef) const {
    if (entry_ == kNone) {
        return {};
    }
    if (query.size() != params_.dims) {
        raise(ErrorCode::DimensionMismatch, "search",
              "expected " + std::to_string(params_.dims) + " dims, got " +
                  std::to_string(query.size()));
    }
    if (k == 0) {
        return {};
    }
    ef = std::max(ef, k);

    std::uint32_t ep = entry_;
    for (std::size_t layer = max_level_; layer > 0; --layer) {
        ep = greedy_descend(query, ep, layer);
    }
    auto found = search_layer(query, ep, ef, 0);
    std::sort(found.begin(), found.end(), [this](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) {
            return a.sim > b.sim;
        }
        return nodes_[a.node].chunk_id < nodes_[b.node].chunk_id;
    });
    if (found.size() > k) {
        found.resize(k);
    }
    std::vector<Hit> hits;
    hits.reserve(found.size());
    for (const Scored& s : found) {
        hits.push_back(Hit{nodes_[s.node].chunk_id, s.sim});
    }
    return hits;
}

void HnswIndex::remove(const std::string& chunk_id) {
    auto it = id_of_.find(chunk_id);
    if (it == id_of_.end() || nodes_[it->second].deleted) {
        raise(ErrorCode::UnknownDocId, "index", "unknown chunk: " + chunk_id);
    }
    nodes_[it->second].deleted = true;
    id_of_.erase(it);
    --live_count_;
}

bool HnswIndex::contains(const std::string& chunk_id) const {
    return id_of_.contains(chunk_id);
}

float HnswIndex::similarity_to(const std::string& chunk_id, std::span<const float> q) const {
    auto it = id_of_.find(chunk_id);
    if (it == id_of_.end()) {
        raise(ErrorCode::UnknownCandidate, "rerank", "unknown chunk: " + chunk_id);
    }
    return sim(q, it->second);
}

double HnswIndex::tombstone_fraction() const {
    if (nodes_.empty()) {
        return 0.0;
    }
    return 1.0 - static_cast<double>(live_count_) / static_cast<double>(nodes_.size());
}

void HnswIndex::rebuild() {
    std::vector<std::pair<std::string, std::vector<float>>> live;
    live.reserve(live_count_);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].deleted) {
            live.emplace_back(nodes_[i].chunk_id,
                              std::vector<float>(vec(i), vec(i) + params_.dims));
        }
    }
    std::sort(live.begin(), live.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    HnswIndex fresh(params_);
    for (auto& [id, v] : live) {
        fresh.insert(id, v);
    }
    *this = std::move(fresh);
}

HnswIndex::NodeView HnswIndex::node_view(std::uint32_t node) const {
    const Node& n = nodes_.at(node);
    return NodeView{n.chunk_id, n.level, n.deleted, n.neighbors};
}

std::span<const float> HnswIndex::vector_of_node(std::uint32_t node) const {
    return {vec(node), params_.dims};
}

std::string HnswIndex::rng_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
}

void HnswIndex::set_rng_state(const std::string& state) {
    std::istringstream is(state);
    is >> rng_;
}

HnswIndex HnswIndex::restore(Params params, std::vector<NodeView> nodes,
                             std::vector<float> vectors, std::uint32_t entry,
                             std::uint32_t max_level, const std::string& rng) {
    HnswIndex out(params);
    out.nodes_.reserve(nodes.size());
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
        NodeView& nv = nodes[i];
        Node n;
        n.chunk_id = std::move(nv.chunk_id);
        n.level = nv.level;
        n.deleted = nv.deleted;
        n.neighbors = std::move(nv.neighbors);
        if (!n.deleted) {
            out.id_of_.emplace(n.chunk_id, i);
            ++out.live_count_;
        }
        out.nodes_.push_back(std::move(n));
    }
    out.vectors_ = std::move(vectors);
    out.entry_ = entry;
    out.max_level_ = max_level;
    if (!rng.empty()) {
        out.set_rng_state(rng);
    }
    return out;
}

} // namespace finq::index
