#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsa/types.hpp"

// Tripartite user-item-aspect graph. Node-aspect edges carry interaction
// frequency w plus the timestamps behind it (w == number of timestamps);
// user-item edges carry (rating, timestamp) pairs. The graph is built once
// and read-only afterwards.

namespace lsa {

struct InteractionHistory {
    std::vector<std::pair<int, int64_t>> entries;  // (aspect id, timestamp)
};

class AspectGraph {
public:
    AspectGraph() = default;
    AspectGraph(int n_users, int n_items, int n_aspects)
        : n_users_(n_users), n_items_(n_items), n_aspects_(n_aspects),
          user_aspects_(n_users), item_aspects_(n_items) {}

    int n_users() const { return n_users_; }
    int n_items() const { return n_items_; }
    int n_aspects() const { return n_aspects_; }

    void add_mention(NodeId node, int aspect, int64_t timestamp) {
        auto& times = edges(node)[aspect];
        times.insert(std::upper_bound(times.begin(), times.end(), timestamp), timestamp);
    }
    void add_rating(int user, int item, double rating, int64_t timestamp) {
        ratings_[{user, item}].emplace_back(rating, timestamp);
    }

    int edge_weight(NodeId node, int aspect) const {
        const auto& e = edges(node);
        auto it = e.find(aspect);
        return it == e.end() ? 0 : int(it->second.size());
    }

    // All aspects with w >= 1 for a user or item node, ascending id.
    std::vector<int> neighbor_aspects(NodeId node) const {
        const auto& e = edges(node);
        std::vector<int> out;
        out.reserve(e.size());
        for (const auto& [aspect, times] : e) out.push_back(aspect);
        return out;
    }

    const std::vector<int64_t>& timestamps(NodeId node, int aspect) const {
        static const std::vector<int64_t> kEmpty;
        const auto& e = edges(node);
        auto it = e.find(aspect);
        return it == e.end() ? kEmpty : it->second;
    }

    // Flattened (aspect, timestamp) interaction history of one node.
    InteractionHistory history(NodeId node) const {
        InteractionHistory h;
        for (const auto& [aspect, times] : edges(node))
            for (int64_t t : times) h.entries.emplace_back(aspect, t);
        return h;
    }

    const std::map<std::pair<int, int>, std::vector<std::pair<double, int64_t>>>& ratings() const {
        return ratings_;
    }

    void save_json(const std::string& path, const AspectVocabulary& vocab, const IdMap& users,
                   const IdMap& items) const {
        nlohmann::json j;
        j["version"] = 1;
        j["users"] = users.names;
        j["items"] = items.names;
        j["aspects"] = vocab.id_to_aspect;
        nlohmann::json edges = nlohmann::json::array();
        auto dump_side = [&](const char* kind, const auto& side) {
            for (size_t n = 0; n < side.size(); ++n)
                for (const auto& [aspect, times] : side[n])
                    edges.push_back({kind, n, aspect, times.size(), times});
        };
        dump_side("user", user_aspects_);
        dump_side("item", item_aspects_);
        j["edges"] = std::move(edges);
        nlohmann::json ratings = nlohmann::json::array();
        for (const auto& [key, list] : ratings_)
            for (const auto& [rating, ts] : list)
                ratings.push_back({key.first, key.second, rating, ts});
        j["ratings"] = std::move(ratings);
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write graph snapshot: " + path);
        out << j.dump() << "\n";
    }

private:
    using EdgeMap = std::map<int, std::vector<int64_t>>;

    const EdgeMap& edges(NodeId node) const {
        if (node.kind == NodeKind::user) return user_aspects_.at(node.index);
        if (node.kind == NodeKind::item) return item_aspects_.at(node.index);
        throw std::invalid_argument("aspect nodes have no aspect neighbors");
    }
    EdgeMap& edges(NodeId node) {
        if (node.kind == NodeKind::user) return user_aspects_.at(node.index);
        if (node.kind == NodeKind::item) return item_aspects_.at(node.index);
        throw std::invalid_argument("aspect nodes have no aspect neighbors");
    }

    int n_users_ = 0, n_items_ = 0, n_aspects_ = 0;
    std::vector<EdgeMap> user_aspects_;
    std::vector<EdgeMap> item_aspects_;
    std::map<std::pair<int, int>, std::vector<std::pair<double, int64_t>>> ratings_;
};

// Per-review distinct-aspect counting: a review mentioning "quality" twice
// contributes 1 to w(u, quality) and 1 to w(i, quality).
inline AspectGraph build_graph(const std::vector<RawReview>& reviews,
                               const std::vector<std::vector<AspectMention>>& mentions,
                               const AspectVocabulary& vocab, const IdMap& users,
                               const IdMap& items) {
    AspectGraph g(users.size(), items.size(), vocab.size());
    for (size_t r = 0; r < reviews.size(); ++r) {
        const RawReview& review = reviews[r];
        int u = *users.find(review.user_id);
        int i = *items.find(review.item_id);
        g.add_rating(u, i, review.rating, review.timestamp);
        if (r >= mentions.size()) continue;
        std::set<int> distinct;
        for (const auto& m : mentions[r])
            if (auto id = vocab.find(m.aspect)) distinct.insert(*id);
        for (int aspect : distinct) {
            g.add_mention(NodeId{NodeKind::user, u}, aspect, review.timestamp);
            g.add_mention(NodeId{NodeKind::item, i}, aspect, review.timestamp);
        }
    }
    return g;
}

}  // namespace lsa
