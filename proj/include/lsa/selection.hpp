#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lsa/graph.hpp"
#include "lsa/params.hpp"
#include "lsa/types.hpp"

// Interest selection. Long-term: rank a node's neighbor aspects by the sum
// of the frequency score and the rating-preference score, keep the top K.
// Short-term: the N most recent aspect interactions inside a T-day window
// strictly before the current interaction.

namespace lsa {

enum class Horizon { long_term, short_term };

struct InterestSequence {
    NodeId anchor;
    Horizon horizon = Horizon::long_term;
    std::vector<int> aspect_ids;      // fixed K or N slots
    std::vector<char> valid;          // per-slot validity
    std::vector<int64_t> timestamps;  // short-term only, aligned with slots
    int64_t t_curr = 0;               // short-term only

    int slot_count() const { return int(aspect_ids.size()); }
    int valid_count() const {
        int n = 0;
        for (char v : valid) n += v != 0;
        return n;
    }
};

// sigma(exp(w / 100)); strictly increasing in w, bounded in (0.5, 1) for
// w >= 0. The 100 keeps the exponential from blowing up at realistic
// frequencies.
inline double edge_weight_score(int w) {
    return 1.0 / (1.0 + std::exp(-std::exp(double(w) / 100.0)));
}

// Scaled dot product between the projected rating-preference embedding and
// the aspect embedding: (W1 y) . e_a / sqrt(d).
inline double rating_preference_score(const Mat& y, const Mat& e_a, const Mat& w1) {
    if (y.rows() != 1 || e_a.rows() != 1 || y.cols() != e_a.cols() || w1.rows() != y.cols() ||
        w1.cols() != y.cols())
        throw std::invalid_argument("rating_preference_score: dimension mismatch");
    int d = y.cols();
    double score = 0.0;
    for (int i = 0; i < d; ++i) {
        double proj = 0.0;
        for (int j = 0; j < d; ++j) proj += w1(i, j) * y(0, j);
        score += proj * e_a(0, i);
    }
    return score / std::sqrt(double(d));
}

inline double combined_relevance_score(const AspectGraph& graph, const ModelParams& params,
                                       NodeId node, int aspect) {
    const Mat& pref_table =
        params.tensor(node.kind == NodeKind::user ? params.pref_user : params.pref_item);
    const Mat& aspect_table = params.tensor(params.emb_aspect);
    int d = pref_table.cols();
    Mat y(1, d), e_a(1, d);
    std::copy(pref_table.row_ptr(node.index), pref_table.row_ptr(node.index) + d, y.data());
    std::copy(aspect_table.row_ptr(aspect), aspect_table.row_ptr(aspect) + d, e_a.data());
    return edge_weight_score(graph.edge_weight(node, aspect)) +
           rating_preference_score(y, e_a, params.tensor(params.select_w1));
}

// Top-K aspects by combined relevance, descending score with ascending-id
// tie break. Ranks the node's neighbor aspects by default; full_vocab ranks
// the entire vocabulary (non-neighbors enter with w = 0). Fewer candidates
// than K leaves trailing slots masked.
inline InterestSequence important_k(const AspectGraph& graph, const ModelParams& params,
                                    NodeId node, int K, bool full_vocab = false) {
    if (K < 1) throw std::invalid_argument("important_k: K must be >= 1");
    std::vector<int> candidates;
    if (full_vocab) {
        candidates.resize(graph.n_aspects());
        std::iota(candidates.begin(), candidates.end(), 0);
    } else {
        candidates = graph.neighbor_aspects(node);
    }
    std::vector<std::pair<double, int>> scored;
    for (int aspect : candidates)
        scored.emplace_back(combined_relevance_score(graph, params, node, aspect), aspect);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    InterestSequence seq;
    seq.anchor = node;
    seq.horizon = Horizon::long_term;
    seq.aspect_ids.assign(K, 0);
    seq.valid.assign(K, 0);
    int n = std::min<int>(K, int(scored.size()));
    for (int k = 0; k < n; ++k) {
        seq.aspect_ids[k] = scored[k].second;
        seq.valid[k] = 1;
    }
    return seq;
}

// Entries strictly before t_curr and within T days of it, most recent first
// (ties by ascending aspect id), truncated to N. Duplicate aspects at
// different times stay distinct tokens.
inline InterestSequence recent_n(const InteractionHistory& history, NodeId anchor, int64_t t_curr,
                                 int N, double T_days) {
    if (N < 1) throw std::invalid_argument("recent_n: N must be >= 1");
    if (T_days <= 0.0) throw std::invalid_argument("recent_n: T must be > 0");
    double window = T_days * 86400.0;
    std::vector<std::pair<int64_t, int>> kept;  // (t, aspect)
    for (const auto& [aspect, t] : history.entries)
        if (t < t_curr && double(t_curr - t) <= window) kept.emplace_back(t, aspect);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    InterestSequence seq;
    seq.anchor = anchor;
    seq.horizon = Horizon::short_term;
    seq.t_curr = t_curr;
    seq.aspect_ids.assign(N, 0);
    seq.valid.assign(N, 0);
    seq.timestamps.assign(N, 0);
    int n = std::min<int>(N, int(kept.size()));
    for (int k = 0; k < n; ++k) {
        seq.aspect_ids[k] = kept[k].second;
        seq.timestamps[k] = kept[k].first;
        seq.valid[k] = 1;
    }
    return seq;
}

// Elapsed-day bucket: 0 -> 0, 1 -> 1, 2-3 -> 2, 4-7 -> 3, doubling.
inline int time_bucket(int64_t elapsed_seconds) {
    int64_t days = elapsed_seconds / 86400;
    if (days <= 0) return 0;
    int b = 1;
    while (days > 1 && b < ModelDims::kTimeBuckets - 1) {
        days >>= 1;
        ++b;
    }
    return b;
}

}  // namespace lsa
