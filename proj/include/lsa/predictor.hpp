#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "lsa/autodiff.hpp"
#include "lsa/params.hpp"

// Interest-aware aspect aggregation over the union of user and item aspect
// neighbors, followed by factorization-machine scoring on
// x = p_u ++ q_i ++ lambda * h_a.

namespace lsa {

// Ascending-id set union, truncated at max_union. `truncated` counts dropped
// aspects so runs can record when the cap bites.
inline std::vector<int> candidate_aspects(const std::vector<int>& user_aspects,
                                          const std::vector<int>& item_aspects, int max_union,
                                          size_t* truncated = nullptr) {
    std::vector<int> merged;
    merged.reserve(user_aspects.size() + item_aspects.size());
    std::set_union(user_aspects.begin(), user_aspects.end(), item_aspects.begin(),
                   item_aspects.end(), std::back_inserter(merged));
    if (max_union > 0 && int(merged.size()) > max_union) {
        if (truncated) *truncated += merged.size() - size_t(max_union);
        merged.resize(max_union);
    }
    return merged;
}

// f_ui = ReLU(W_f [p_u ++ q_i] + b_f)
inline ad::Var context_fusion(ad::Tape& tape, ad::Var p_u, ad::Var q_i, const ParamCtx& ctx) {
    const AggIdx& agg = ctx.params->agg;
    return tape.relu(tape.add(
        tape.matmul_nt(tape.concat_cols(p_u, q_i), tape.param(ctx.ref(agg.w_f))),
        tape.param(ctx.ref(agg.b_f))));
}

// Attention over candidate aspects queried by the fused context. Empty
// candidate list yields the zero vector. `uniform` drops the attention and
// averages the value vectors instead (the no-aspect-attention ablation).
inline ad::Var aggregate_aspects(ad::Tape& tape, ad::Var f_ui, const std::vector<int>& aspects,
                                 const ParamCtx& ctx, bool uniform = false,
                                 Mat* attn_out = nullptr) {
    const ModelParams& P = *ctx.params;
    if (aspects.empty()) return tape.input(Mat(1, P.dims().d));
    ad::Var e_a = tape.gather_rows(ctx.ref(P.emb_aspect), aspects);
    ad::Var values = tape.matmul_nt(e_a, tape.param(ctx.ref(P.agg.w_v)));
    if (uniform) return tape.mean_rows(values);

    ad::Var keys = tape.matmul_nt(e_a, tape.param(ctx.ref(P.agg.w_k)));
    ad::Var query = tape.matmul_nt(f_ui, tape.param(ctx.ref(P.agg.w_q)));
    ad::Var scores = tape.matmul_nt(query, keys);  // 1 x m
    ad::Var alpha = tape.softmax_rows(scores, std::vector<char>(aspects.size(), 1));
    if (attn_out) *attn_out = tape.value(alpha);
    return tape.matmul(alpha, values);
}

// rhat = b0 + b_u + b_i + x w^T + sum_{i<j} <v_i, v_j> x_i x_j, with the
// pairwise term computed via the O(d' k) identity
//   1/2 sum_f [ (sum_i V_if x_i)^2 - sum_i V_if^2 x_i^2 ].
// Unknown user or item falls back to a zero bias.
inline ad::Var fm_predict(ad::Tape& tape, ad::Var p_u, ad::Var q_i, ad::Var h_a, double lambda,
                          std::optional<int> user, std::optional<int> item, const ParamCtx& ctx) {
    const FmIdx& fm = ctx.params->fm;
    ad::Var x = tape.concat_cols(tape.concat_cols(p_u, q_i), tape.scale(h_a, lambda));

    ad::Var out = tape.param(ctx.ref(fm.b0));
    if (user) out = tape.add(out, tape.gather_rows(ctx.ref(fm.b_user), {*user}));
    if (item) out = tape.add(out, tape.gather_rows(ctx.ref(fm.b_item), {*item}));

    out = tape.add(out, tape.matmul_nt(x, tape.param(ctx.ref(fm.w))));

    ad::Var v = tape.param(ctx.ref(fm.v));
    ad::Var projected = tape.matmul(x, v);  // 1 x k
    ad::Var sum_sq = tape.sum(tape.square(projected));
    ad::Var sq_sum = tape.sum(tape.matmul(tape.square(x), tape.square(v)));
    ad::Var pairwise = tape.scale(tape.sub(sum_sq, sq_sum), 0.5);
    return tape.add(out, pairwise);
}

}  // namespace lsa
