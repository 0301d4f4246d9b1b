#include "mdi/nn/gru.hpp"

namespace mdi::nn {

GruDirection GruDirection::init(const std::string& prefix, int input_dim, int hidden_dim,
                                RngStream& rng) {
    GruDirection d;
    d.input_dim = input_dim;
    d.hidden_dim = hidden_dim;
    d.Wz = Parameter::normal(prefix + ".Wz", input_dim, hidden_dim, rng);
    d.Uz = Parameter::normal(prefix + ".Uz", hidden_dim, hidden_dim, rng);
    d.bz = Parameter::zeros(prefix + ".bz", 1, hidden_dim);
    d.Wr = Parameter::normal(prefix + ".Wr", input_dim, hidden_dim, rng);
    d.Ur = Parameter::normal(prefix + ".Ur", hidden_dim, hidden_dim, rng);
    d.br = Parameter::zeros(prefix + ".br", 1, hidden_dim);
    d.Wc = Parameter::normal(prefix + ".Wc", input_dim, hidden_dim, rng);
    d.Uc = Parameter::normal(prefix + ".Uc", hidden_dim, hidden_dim, rng);
    d.bc = Parameter::zeros(prefix + ".bc", 1, hidden_dim);
    return d;
}

Var GruDirection::step(Graph& g, Var x, Var h_prev) {
    Var z = g.sigmoid(g.add_row_bias(
        g.add(g.matmul(x, g.param(Wz)), g.matmul(h_prev, g.param(Uz))), g.param(bz)));
    Var r = g.sigmoid(g.add_row_bias(
        g.add(g.matmul(x, g.param(Wr)), g.matmul(h_prev, g.param(Ur))), g.param(br)));
    Var c = g.tanh(g.add_row_bias(
        g.add(g.matmul(x, g.param(Wc)), g.matmul(g.mul(r, h_prev), g.param(Uc))), g.param(bc)));
    // h' = z*h + (1-z)*c
    return g.add(g.mul(z, h_prev), g.mul(g.affine(z, -1.0, 1.0), c));
}

std::vector<Var> GruDirection::run(Graph& g, const std::vector<Var>& xs, bool reverse) {
    if (xs.empty()) throw DataError(ErrCode::empty_input, "gru on empty sequence");
    int batch = g.val(xs[0]).rows;
    Var h = g.constant(Tensor::zeros(batch, hidden_dim));
    std::vector<Var> out(xs.size());
    int n = static_cast<int>(xs.size());
    for (int i = 0; i < n; ++i) {
        int t = reverse ? n - 1 - i : i;
        h = step(g, xs[t], h);
        out[t] = h;
    }
    return out;
}

std::vector<Parameter*> GruDirection::parameters() {
    return {&Wz, &Uz, &bz, &Wr, &Ur, &br, &Wc, &Uc, &bc};
}

int GruDirection::param_count() const {
    return 3 * (input_dim * hidden_dim + hidden_dim * hidden_dim + hidden_dim);
}

BiGruLayer BiGruLayer::init(const std::string& prefix, int input_dim, int units_total,
                            RngStream& rng) {
    if (units_total % 2 != 0)
        throw DataError(ErrCode::invalid_config, "BiGRU units_total must be even");
    BiGruLayer l;
    l.units_total = units_total;
    l.fw = GruDirection::init(prefix + ".fw", input_dim, units_total / 2, rng);
    l.bw = GruDirection::init(prefix + ".bw", input_dim, units_total / 2, rng);
    return l;
}

std::vector<Var> BiGruLayer::run(Graph& g, const std::vector<Var>& xs) {
    std::vector<Var> hf = fw.run(g, xs, false);
    std::vector<Var> hb = bw.run(g, xs, true);
    std::vector<Var> out(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) out[t] = g.concat_cols({hf[t], hb[t]});
    return out;
}

std::vector<Parameter*> BiGruLayer::parameters() {
    std::vector<Parameter*> ps = fw.parameters();
    for (Parameter* p : bw.parameters()) ps.push_back(p);
    return ps;
}

int BiGruLayer::param_count() const { return fw.param_count() + bw.param_count(); }

Tensor gru_cell_forward(const Tensor& x, const Tensor& h_prev, GruDirection& params) {
    Graph g(false, false);
    Var out = params.step(g, g.constant(x), g.constant(h_prev));
    return g.val(out);
}

} // namespace mdi::nn
