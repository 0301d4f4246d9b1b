#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "mdi/nn/tensor.hpp"

namespace mdi::nn {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Define-by-run tape. Nodes are created in topological order; backward walks
// the tape in reverse. Parameter leaves are deduplicated so gradients land in
// Parameter::grad exactly once per backward call. Constructing with
// record=false skips closure allocation for forward-only evaluation
// (finite differences).
class Graph {
  public:
    explicit Graph(bool training = false, bool record = true)
        : training_(training), record_(record) {}

    bool training() const { return training_; }

    Var constant(Tensor t);
    Var param(Parameter& p);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_n(const std::vector<Var>& xs);
    // alpha * x + beta, elementwise
    Var affine(Var x, double alpha, double beta);
    Var add_row_bias(Var x, Var bias);  // [B x D] + [1 x D]
    Var mul_colvec(Var x, Var col);     // [B x D] scaled per row by [B x 1]
    Var matmul(Var a, Var b);           // [m x k] . [k x n]
    Var matmul_nt(Var a, Var b);        // [m x k] . [n x k]^T -> [m x n]
    Var sigmoid(Var x);
    Var tanh(Var x);
    Var relu(Var x);
    Var softmax_rows(Var x);
    Var embedding_rows(Var table, const std::vector<int>& ids);
    Var gather_rows(Var x, const std::vector<int>& rows);
    Var concat_cols(const std::vector<Var>& xs);
    Var concat_rows(const std::vector<Var>& xs);
    Var slice_cols(Var x, int from, int to);
    Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
    // Inverted dropout; identity when not training or rate == 0. rate in [0,1).
    Var dropout(Var x, double rate, RngStream& rng);
    // Mean over rows of -log softmax(logits)[target]; numerically stable.
    Var cross_entropy_logits(Var logits, const std::vector<int>& targets);
    // Mean over elements of (pred - target)^2 against a constant target.
    Var mse_against(Var pred, const Tensor& target);

    const Tensor& val(Var v) const { return nodes_[v.id].val; }
    const Tensor& grad_of(Var v) const { return nodes_[v.id].grad; }

    // Seeds d(loss)=1 and accumulates into Parameter::grad for every param
    // leaf. loss must be scalar.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void()> back; // empty for leaves / unrecorded
        Parameter* pref = nullptr;
        bool needs_grad = false;
    };

    Var push(Tensor val, bool needs_grad, std::function<void()> back);
    bool any_needs(const std::vector<Var>& xs) const;
    Tensor& g(Var v) { return nodes_[v.id].grad; }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> param_nodes_;
    bool training_;
    bool record_;
};

} // namespace mdi::nn
