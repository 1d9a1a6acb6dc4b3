#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsa/encoders.hpp"
#include "lsa/graph.hpp"
#include "lsa/predictor.hpp"
#include "lsa/selection.hpp"

// End-to-end rating prediction for one (user, item, time) example, plus the
// ablation variants that rewire single mechanisms.

namespace lsa {

enum class Variant { full, no_aspect_attention, no_fusion, no_short, no_long };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_aspect_attention: return "no_aspect_attention";
        case Variant::no_fusion: return "no_fusion";
        case Variant::no_short: return "no_short";
        case Variant::no_long: return "no_long";
    }
    return "full";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no_aspect_attention") return Variant::no_aspect_attention;
    if (s == "no_fusion") return Variant::no_fusion;
    if (s == "no_short") return Variant::no_short;
    if (s == "no_long") return Variant::no_long;
    throw std::invalid_argument("unknown variant: " + s);
}

struct Example {
    std::optional<int> user;
    std::optional<int> item;
    double rating = 0.0;
    int64_t timestamp = 0;
};

// Everything the differentiable forward needs, resolved from the graph.
// Long sequences come from a per-epoch cache; short sequences and the
// candidate union are example-specific.
struct ExampleInputs {
    std::optional<int> user, item;
    InterestSequence user_long, user_short, item_long, item_short;
    std::vector<int> candidates;
};

// Per-epoch Important-K cache: selection scores depend on learnable tensors,
// so the trainer refreshes this between epochs.
struct LongSeqCache {
    std::vector<InterestSequence> users;
    std::vector<InterestSequence> items;

    static LongSeqCache build(const AspectGraph& graph, const ModelParams& params, int K) {
        LongSeqCache cache;
        cache.users.reserve(graph.n_users());
        for (int u = 0; u < graph.n_users(); ++u)
            cache.users.push_back(important_k(graph, params, NodeId{NodeKind::user, u}, K));
        cache.items.reserve(graph.n_items());
        for (int i = 0; i < graph.n_items(); ++i)
            cache.items.push_back(important_k(graph, params, NodeId{NodeKind::item, i}, K));
        return cache;
    }
};

inline ExampleInputs build_inputs(const AspectGraph& graph, const LongSeqCache& cache,
                                  const TrainConfig& cfg, const Example& ex,
                                  size_t* union_truncations = nullptr) {
    ExampleInputs in;
    in.user = ex.user;
    in.item = ex.item;

    auto empty_long = [&](NodeKind kind) {
        InterestSequence s;
        s.anchor = NodeId{kind, 0};
        s.horizon = Horizon::long_term;
        s.aspect_ids.assign(cfg.K, 0);
        s.valid.assign(cfg.K, 0);
        return s;
    };
    auto empty_short = [&](NodeKind kind) {
        InterestSequence s;
        s.anchor = NodeId{kind, 0};
        s.horizon = Horizon::short_term;
        s.t_curr = ex.timestamp;
        s.aspect_ids.assign(cfg.N, 0);
        s.valid.assign(cfg.N, 0);
        s.timestamps.assign(cfg.N, 0);
        return s;
    };

    std::vector<int> user_neighbors, item_neighbors;
    if (ex.user) {
        NodeId node{NodeKind::user, *ex.user};
        in.user_long = cache.users.at(*ex.user);
        in.user_short = recent_n(graph.history(node), node, ex.timestamp, cfg.N, cfg.T);
        user_neighbors = graph.neighbor_aspects(node);
    } else {
        in.user_long = empty_long(NodeKind::user);
        in.user_short = empty_short(NodeKind::user);
    }
    if (ex.item) {
        NodeId node{NodeKind::item, *ex.item};
        in.item_long = cache.items.at(*ex.item);
        in.item_short = recent_n(graph.history(node), node, ex.timestamp, cfg.N, cfg.T);
        item_neighbors = graph.neighbor_aspects(node);
    } else {
        in.item_long = empty_long(NodeKind::item);
        in.item_short = empty_short(NodeKind::item);
    }
    in.candidates =
        candidate_aspects(user_neighbors, item_neighbors, cfg.max_union, union_truncations);
    return in;
}

struct ForwardDebug {
    EncoderAttention user_long, user_short, item_long, item_short;
    Mat aggregation_weights;
};

namespace detail {

inline FusionMode fusion_mode(Variant v) {
    switch (v) {
        case Variant::no_fusion: return FusionMode::average;
        case Variant::no_short: return FusionMode::long_only;
        case Variant::no_long: return FusionMode::short_only;
        default: return FusionMode::gated;
    }
}

// One side (user or item) of the tower: encode, fuse, build p = MLP(y) ++ e.
inline ad::Var side_representation(ad::Tape& tape, const ParamCtx& ctx,
                                   const InterestSequence& long_seq,
                                   const InterestSequence& short_seq, std::optional<int> index,
                                   bool is_user, Variant variant, EncoderAttention* attn_long,
                                   EncoderAttention* attn_short) {
    const ModelParams& P = *ctx.params;
    const GateIdx& gate = is_user ? P.gate_user : P.gate_item;
    FusionMode mode = fusion_mode(variant);

    ad::Var e_long, e_short;
    if (mode != FusionMode::short_only)
        e_long = index ? encode_sequence(tape, long_seq, ctx, attn_long)
                       : tape.input(Mat(1, P.dims().d));
    if (mode != FusionMode::long_only)
        e_short = index ? encode_sequence(tape, short_seq, ctx, attn_short)
                        : tape.input(Mat(1, P.dims().d));
    ad::Var fused = gated_fusion(tape, e_long, e_short, gate, ctx, mode);

    ad::Var y = index ? tape.gather_rows(ctx.ref(is_user ? P.pref_user : P.pref_item), {*index})
                      : tape.input(Mat(1, P.dims().d));
    return final_representation(tape, y, fused, gate, ctx);
}

}  // namespace detail

// Full differentiable pipeline: returns the 1x1 predicted rating node.
inline ad::Var predict_example(ad::Tape& tape, const ExampleInputs& in, const ParamCtx& ctx,
                               const TrainConfig& cfg, Variant variant = Variant::full,
                               ForwardDebug* debug = nullptr) {
    ad::Var p_u = detail::side_representation(
        tape, ctx, in.user_long, in.user_short, in.user, true, variant,
        debug ? &debug->user_long : nullptr, debug ? &debug->user_short : nullptr);
    ad::Var q_i = detail::side_representation(
        tape, ctx, in.item_long, in.item_short, in.item, false, variant,
        debug ? &debug->item_long : nullptr, debug ? &debug->item_short : nullptr);

    ad::Var h_a;
    if (cfg.lambda == 0.0 || in.candidates.empty()) {
        // lambda = 0 contract: predictions must be bitwise independent of the
        // aspect set, so the aggregation path is not evaluated at all.
        h_a = tape.input(Mat(1, ctx.params->dims().d));
    } else {
        ad::Var f_ui = context_fusion(tape, p_u, q_i, ctx);
        h_a = aggregate_aspects(tape, f_ui, in.candidates, ctx,
                                variant == Variant::no_aspect_attention,
                                debug ? &debug->aggregation_weights : nullptr);
    }
    return fm_predict(tape, p_u, q_i, h_a, cfg.lambda, in.user, in.item, ctx);
}

inline double clamp_rating(double r) { return std::clamp(r, 1.0, 5.0); }

}  // namespace lsa
