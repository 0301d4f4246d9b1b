#pragma once

#include "mdi/nn/graph.hpp"

namespace mdi::nn {

struct AttentionOut {
    Var context; // [B x D]
    Var weights; // [B x T], rows on the simplex
};

// Learned-query dot-product pooling over per-timestep states H_t [B x D]:
// weights = softmax_t(H_t . q), context = sum_t w_t H_t.
AttentionOut attention_pool(Graph& g, const std::vector<Var>& states, Parameter& query);

struct MhaParams {
    // Per-head projections [D x d_head] plus a shared output projection.
    std::vector<Parameter> Wq, Wk, Wv;
    Parameter bq, bk, bv; // [1 x D], sliced per head
    Parameter Wo, bo;
    int model_dim = 0;
    int heads = 0;

    static MhaParams init(const std::string& prefix, int model_dim, int heads, RngStream& rng);
    std::vector<Parameter*> parameters();
    int param_count() const;
};

struct MhaOut {
    Var output;                    // [T x D]
    std::vector<Var> head_weights; // per head [Tq x Tk]
};

// Scaled dot-product attention per head (scale 1/sqrt(d_head)), heads
// concatenated then linearly projected. Self-attention passes q = k = v.
MhaOut multi_head_attention(Graph& g, Var q_in, Var k_in, Var v_in, MhaParams& params);

} // namespace mdi::nn
