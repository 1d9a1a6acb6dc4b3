#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "lsa/autodiff.hpp"
#include "lsa/params.hpp"
#include "lsa/selection.hpp"

// Transformer encoder over an interest sequence, with GATv2 attention in
// place of dot-product self-attention and a pre-norm residual arrangement:
//   x = x + MHA(LN1(x));  x = x + FFN(LN2(x))
// Per head: score(i,j) = a . leaky_relu(W_l h_i + W_r h_j), softmax over the
// unmasked positions, output_i = sum_j alpha_ij (W_r h_j).
//
// The long-term branch is a set encoder: tokens are canonically reordered by
// aspect id and carry no positional signal, so the anchor output is invariant
// to input token permutation. The short-term branch adds a recency-rank
// positional embedding plus a log-bucketed elapsed-day embedding.

namespace lsa {

constexpr double kLeakySlope = 0.2;

// Row-stochastic attention maps captured for inspection, one per (layer, head).
struct EncoderAttention {
    std::vector<Mat> weights;
    std::vector<char> key_valid;  // which sequence positions were attendable
};

inline ad::Var encode_sequence(ad::Tape& tape, const InterestSequence& seq, const ParamCtx& ctx,
                               EncoderAttention* attn_out = nullptr) {
    const ModelParams& P = *ctx.params;
    const ModelDims& dims = P.dims();
    const EncoderIdx& enc = seq.horizon == Horizon::long_term ? P.enc_long : P.enc_short;
    int d = dims.d, H = dims.H, dh = dims.d_head();
    int slots = seq.slot_count();
    int S = slots + 1;

    // slot order: canonical (ascending aspect id) for the set-semantics
    // long-term branch, given order for the time-ordered short-term branch
    std::vector<int> order(slots);
    std::iota(order.begin(), order.end(), 0);
    if (seq.horizon == Horizon::long_term) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (seq.valid[a] != seq.valid[b]) return seq.valid[a] > seq.valid[b];
            return seq.aspect_ids[a] < seq.aspect_ids[b];
        });
    }

    std::vector<int> token_ids(slots, 0);
    std::vector<char> token_valid(slots, 0);
    for (int k = 0; k < slots; ++k) {
        token_ids[k] = seq.valid[order[k]] ? seq.aspect_ids[order[k]] : 0;
        token_valid[k] = seq.valid[order[k]];
    }
    std::vector<char> pos_valid(S, 0);
    pos_valid[0] = 1;
    for (int k = 0; k < slots; ++k) pos_valid[k + 1] = token_valid[k];

    int anchor_table = seq.anchor.kind == NodeKind::user ? P.emb_user : P.emb_item;
    ad::Var anchor = tape.gather_rows(ctx.ref(anchor_table), {seq.anchor.index});
    ad::Var aspects = tape.mask_rows(tape.gather_rows(ctx.ref(P.emb_aspect), token_ids),
                                     token_valid);
    ad::Var x = tape.concat_rows(anchor, aspects);

    if (seq.horizon == Horizon::short_term) {
        std::vector<int> pos_idx(S, 0);
        for (int k = 0; k < slots; ++k) pos_idx[k + 1] = std::min(k + 1, dims.n_positions - 1);
        x = tape.add(x, tape.mask_rows(tape.gather_rows(ctx.ref(enc.pos), pos_idx), pos_valid));

        std::vector<int> bucket_idx(S, 0);
        std::vector<char> aspect_only(S, 0);
        for (int k = 0; k < slots; ++k) {
            if (!token_valid[k]) continue;
            bucket_idx[k + 1] = time_bucket(seq.t_curr - seq.timestamps[order[k]]);
            aspect_only[k + 1] = 1;
        }
        x = tape.add(x,
                     tape.mask_rows(tape.gather_rows(ctx.ref(enc.time), bucket_idx), aspect_only));
    }

    for (int l = 0; l < dims.L; ++l) {
        const EncoderIdx::Layer& layer = enc.layers[l];
        ad::Var normed = tape.layer_norm_rows(x, tape.param(ctx.ref(layer.ln1_g)),
                                              tape.param(ctx.ref(layer.ln1_b)));
        ad::Var heads;
        for (int h = 0; h < H; ++h) {
            ad::Var xh = tape.slice_cols(normed, h * dh, (h + 1) * dh);
            ad::Var w_att = tape.param(ctx.ref(layer.att_w[h]));
            ad::Var w_left = tape.slice_cols(w_att, 0, dh);
            ad::Var w_right = tape.slice_cols(w_att, dh, 2 * dh);
            ad::Var u = tape.matmul_nt(xh, w_left);
            ad::Var v = tape.matmul_nt(xh, w_right);
            ad::Var scores =
                tape.pair_scores(u, v, tape.param(ctx.ref(layer.att_a[h])), kLeakySlope);
            ad::Var alpha = tape.softmax_rows(scores, pos_valid);
            if (attn_out) {
                attn_out->weights.push_back(tape.value(alpha));
                attn_out->key_valid = pos_valid;
            }
            ad::Var out = tape.matmul(alpha, v);
            heads = h == 0 ? out : tape.concat_cols(heads, out);
        }
        x = tape.add(x, heads);

        ad::Var normed2 = tape.layer_norm_rows(x, tape.param(ctx.ref(layer.ln2_g)),
                                               tape.param(ctx.ref(layer.ln2_b)));
        ad::Var hidden = tape.relu(tape.add_rowvec(
            tape.matmul_nt(normed2, tape.param(ctx.ref(layer.ffn_w1))),
            tape.param(ctx.ref(layer.ffn_b1))));
        ad::Var ffn = tape.add_rowvec(tape.matmul_nt(hidden, tape.param(ctx.ref(layer.ffn_w2))),
                                      tape.param(ctx.ref(layer.ffn_b2)));
        x = tape.add(x, ffn);
    }
    return tape.slice_rows(x, 0, 1);  // anchor readout
}

enum class FusionMode { gated, average, long_only, short_only };

// e_l' = W_l e_l, e_s' = W_s e_s, g = sigmoid(W_g [e_l' || e_s'] + b_g),
// fused = g (.) e_l' + (1-g) (.) e_s' + e_l'.
// The ablation modes rewire exactly one thing: `average` replaces the gate
// with the plain mean of the projections (no residual), `long_only` /
// `short_only` bypass fusion with the corresponding projection.
inline ad::Var gated_fusion(ad::Tape& tape, ad::Var e_long, ad::Var e_short, const GateIdx& gate,
                            const ParamCtx& ctx, FusionMode mode = FusionMode::gated) {
    if (mode == FusionMode::long_only)
        return tape.matmul_nt(e_long, tape.param(ctx.ref(gate.w_l)));
    if (mode == FusionMode::short_only)
        return tape.matmul_nt(e_short, tape.param(ctx.ref(gate.w_s)));

    ad::Var el = tape.matmul_nt(e_long, tape.param(ctx.ref(gate.w_l)));
    ad::Var es = tape.matmul_nt(e_short, tape.param(ctx.ref(gate.w_s)));
    if (mode == FusionMode::average) return tape.scale(tape.add(el, es), 0.5);

    ad::Var g = tape.sigmoid(tape.add(
        tape.matmul_nt(tape.concat_cols(el, es), tape.param(ctx.ref(gate.w_g))),
        tape.param(ctx.ref(gate.b_g))));
    ad::Var blended = tape.add(tape.hadamard(g, el), tape.hadamard(tape.affine(g, -1.0, 1.0), es));
    return tape.add(blended, el);  // long-term residual
}

// p = ReLU(y W3 + b) ++ e_fused, dimension 2d.
inline ad::Var final_representation(ad::Tape& tape, ad::Var y, ad::Var e_fused,
                                    const GateIdx& gate, const ParamCtx& ctx) {
    ad::Var transformed = tape.relu(tape.add(tape.matmul_nt(y, tape.param(ctx.ref(gate.w3))),
                                             tape.param(ctx.ref(gate.b))));
    return tape.concat_cols(transformed, e_fused);
}

}  // namespace lsa
