#include "mdi/nn/attention.hpp"

#include <cmath>

namespace mdi::nn {

AttentionOut attention_pool(Graph& g, const std::vector<Var>& states, Parameter& query) {
    if (states.empty()) throw DataError(ErrCode::empty_input, "attention over empty sequence");
    Var q = g.param(query); // [1 x D]
    std::vector<Var> scores;
    scores.reserve(states.size());
    for (Var h : states) scores.push_back(g.matmul_nt(h, q)); // [B x 1]
    Var weights = g.softmax_rows(g.concat_cols(scores));      // [B x T]
    std::vector<Var> weighted;
    weighted.reserve(states.size());
    for (std::size_t t = 0; t < states.size(); ++t)
        weighted.push_back(
            g.mul_colvec(states[t], g.slice_cols(weights, static_cast<int>(t), static_cast<int>(t) + 1)));
    return AttentionOut{g.add_n(weighted), weights};
}

MhaParams MhaParams::init(const std::string& prefix, int model_dim, int heads, RngStream& rng) {
    if (heads < 1 || model_dim % heads != 0)
        throw DataError(ErrCode::invalid_config, "model_dim must be divisible by heads");
    MhaParams p;
    p.model_dim = model_dim;
    p.heads = heads;
    int dh = model_dim / heads;
    for (int h = 0; h < heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        p.Wq.push_back(Parameter::normal(hp + ".Wq", model_dim, dh, rng));
        p.Wk.push_back(Parameter::normal(hp + ".Wk", model_dim, dh, rng));
        p.Wv.push_back(Parameter::normal(hp + ".Wv", model_dim, dh, rng));
    }
    p.bq = Parameter::zeros(prefix + ".bq", 1, model_dim);
    p.bk = Parameter::zeros(prefix + ".bk", 1, model_dim);
    p.bv = Parameter::zeros(prefix + ".bv", 1, model_dim);
    p.Wo = Parameter::normal(prefix + ".Wo", model_dim, model_dim, rng);
    p.bo = Parameter::zeros(prefix + ".bo", 1, model_dim);
    return p;
}

std::vector<Parameter*> MhaParams::parameters() {
    std::vector<Parameter*> ps;
    for (Parameter& p : Wq) ps.push_back(&p);
    for (Parameter& p : Wk) ps.push_back(&p);
    for (Parameter& p : Wv) ps.push_back(&p);
    ps.push_back(&bq);
    ps.push_back(&bk);
    ps.push_back(&bv);
    ps.push_back(&Wo);
    ps.push_back(&bo);
    return ps;
}

int MhaParams::param_count() const {
    return 3 * model_dim * model_dim + 3 * model_dim + model_dim * model_dim + model_dim;
}

MhaOut multi_head_attention(Graph& g, Var q_in, Var k_in, Var v_in, MhaParams& params) {
    int dh = params.model_dim / params.heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> contexts;
    MhaOut out;
    for (int h = 0; h < params.heads; ++h) {
        Var bq = g.slice_cols(g.param(params.bq), h * dh, (h + 1) * dh);
        Var bk = g.slice_cols(g.param(params.bk), h * dh, (h + 1) * dh);
        Var bv = g.slice_cols(g.param(params.bv), h * dh, (h + 1) * dh);
        Var qh = g.add_row_bias(g.matmul(q_in, g.param(params.Wq[h])), bq); // [Tq x dh]
        Var kh = g.add_row_bias(g.matmul(k_in, g.param(params.Wk[h])), bk); // [Tk x dh]
        Var vh = g.add_row_bias(g.matmul(v_in, g.param(params.Wv[h])), bv); // [Tk x dh]
        Var att = g.softmax_rows(g.affine(g.matmul_nt(qh, kh), scale, 0.0)); // [Tq x Tk]
        out.head_weights.push_back(att);
        contexts.push_back(g.matmul(att, vh)); // [Tq x dh]
    }
    Var cat = g.concat_cols(contexts); // [Tq x D]
    out.output = g.add_row_bias(g.matmul(cat, g.param(params.Wo)), g.param(params.bo));
    return out;
}

} // namespace mdi::nn
