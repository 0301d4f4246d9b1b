#pragma once

#include "mdi/nn/graph.hpp"

namespace mdi::nn {

// One direction of a GRU layer, cho2014 convention:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wc + (r*h) Uc + bc)
//   h' = z*h + (1-z)*c
struct GruDirection {
    Parameter Wz, Uz, bz, Wr, Ur, br, Wc, Uc, bc;
    int input_dim = 0;
    int hidden_dim = 0;

    static GruDirection init(const std::string& prefix, int input_dim, int hidden_dim,
                             RngStream& rng);

    Var step(Graph& g, Var x, Var h_prev);

    // Runs over the sequence; when reverse, iterates from the end but returns
    // states aligned with the input order. h0 is zeros [B x hidden].
    std::vector<Var> run(Graph& g, const std::vector<Var>& xs, bool reverse);

    std::vector<Parameter*> parameters();
    int param_count() const;
};

// Forward and backward passes concatenated per timestep; output dim is
// units_total (= 2 * per-direction hidden size, so units_total must be even).
struct BiGruLayer {
    GruDirection fw, bw;
    int units_total = 0;

    static BiGruLayer init(const std::string& prefix, int input_dim, int units_total,
                           RngStream& rng);

    std::vector<Var> run(Graph& g, const std::vector<Var>& xs);

    std::vector<Parameter*> parameters();
    int param_count() const;
};

// Standalone cell entry point mirroring the layer internals; used by tests.
Tensor gru_cell_forward(const Tensor& x, const Tensor& h_prev, GruDirection& params);

} // namespace mdi::nn
