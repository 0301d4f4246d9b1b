#include "mdi/nn/graph.hpp"

#include <cmath>

namespace mdi::nn {

Var Graph::push(Tensor val, bool needs_grad, std::function<void()> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad && record_;
    if (n.needs_grad) {
        n.grad = Tensor(n.val.rows, n.val.cols);
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_needs(const std::vector<Var>& xs) const {
    for (Var x : xs) {
        if (nodes_[x.id].needs_grad) return true;
    }
    return false;
}

Var Graph::constant(Tensor t) { return push(std::move(t), false, {}); }

Var Graph::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    Var v = push(p.value, true, {});
    nodes_[v.id].pref = &p;
    param_nodes_[&p] = v.id;
    return v;
}

Var Graph::add(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) require_shape(tb, ta.rows, ta.cols, "add");
    Tensor out = ta;
    for (int i = 0; i < out.numel(); ++i) out.v[i] += tb.v[i];
    bool ng = any_needs({a, b});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, a, b, o] {
            const Tensor& go = g(o);
            if (nodes_[a.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(a).v[i] += go.v[i];
            if (nodes_[b.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(b).v[i] += go.v[i];
        };
    return o;
}

Var Graph::sub(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) require_shape(tb, ta.rows, ta.cols, "sub");
    Tensor out = ta;
    for (int i = 0; i < out.numel(); ++i) out.v[i] -= tb.v[i];
    bool ng = any_needs({a, b});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, a, b, o] {
            const Tensor& go = g(o);
            if (nodes_[a.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(a).v[i] += go.v[i];
            if (nodes_[b.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(b).v[i] -= go.v[i];
        };
    return o;
}

Var Graph::mul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) require_shape(tb, ta.rows, ta.cols, "mul");
    Tensor out = ta;
    for (int i = 0; i < out.numel(); ++i) out.v[i] *= tb.v[i];
    bool ng = any_needs({a, b});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, a, b, o] {
            const Tensor& go = g(o);
            const Tensor& ta2 = val(a);
            const Tensor& tb2 = val(b);
            if (nodes_[a.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(a).v[i] += go.v[i] * tb2.v[i];
            if (nodes_[b.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(b).v[i] += go.v[i] * ta2.v[i];
        };
    return o;
}

Var Graph::add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw DataError(ErrCode::empty_input, "add_n of nothing");
    Tensor out = val(xs[0]);
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const Tensor& t = val(xs[k]);
        if (!t.same_shape(out)) require_shape(t, out.rows, out.cols, "add_n");
        for (int i = 0; i < out.numel(); ++i) out.v[i] += t.v[i];
    }
    bool ng = any_needs(xs);
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, xs, o] {
            const Tensor& go = g(o);
            for (Var x : xs) {
                if (!nodes_[x.id].needs_grad) continue;
                for (int i = 0; i < go.numel(); ++i) g(x).v[i] += go.v[i];
            }
        };
    return o;
}

Var Graph::affine(Var x, double alpha, double beta) {
    Tensor out = val(x);
    for (double& v : out.v) v = alpha * v + beta;
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o, alpha] {
            const Tensor& go = g(o);
            for (int i = 0; i < go.numel(); ++i) g(x).v[i] += alpha * go.v[i];
        };
    return o;
}

Var Graph::add_row_bias(Var x, Var bias) {
    const Tensor& tx = val(x);
    const Tensor& tb = val(bias);
    require_shape(tb, 1, tx.cols, "add_row_bias bias");
    Tensor out = tx;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) += tb.v[c];
    bool ng = any_needs({x, bias});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, bias, o] {
            const Tensor& go = g(o);
            if (nodes_[x.id].needs_grad)
                for (int i = 0; i < go.numel(); ++i) g(x).v[i] += go.v[i];
            if (nodes_[bias.id].needs_grad) {
                Tensor& gb = g(bias);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) gb.v[c] += go.at(r, c);
            }
        };
    return o;
}

Var Graph::mul_colvec(Var x, Var col) {
    const Tensor& tx = val(x);
    const Tensor& tc = val(col);
    require_shape(tc, tx.rows, 1, "mul_colvec column");
    Tensor out = tx;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) *= tc.v[r];
    bool ng = any_needs({x, col});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, col, o] {
            const Tensor& go = g(o);
            const Tensor& tx2 = val(x);
            const Tensor& tc2 = val(col);
            if (nodes_[x.id].needs_grad) {
                Tensor& gx = g(x);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) gx.at(r, c) += go.at(r, c) * tc2.v[r];
            }
            if (nodes_[col.id].needs_grad) {
                Tensor& gc = g(col);
                for (int r = 0; r < go.rows; ++r) {
                    double s = 0.0;
                    for (int c = 0; c < go.cols; ++c) s += go.at(r, c) * tx2.at(r, c);
                    gc.v[r] += s;
                }
            }
        };
    return o;
}

namespace {

// C += A . B with (m x k)(k x n); ikj loop order for locality.
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            double av = a.at(i, k);
            if (av == 0.0) continue;
            const double* brow = &b.v[static_cast<std::size_t>(k) * b.cols];
            double* crow = &c.v[static_cast<std::size_t>(i) * c.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A^T . B with A (m x k), B (m x n) -> (k x n)
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.v[static_cast<std::size_t>(i) * a.cols];
        const double* brow = &b.v[static_cast<std::size_t>(i) * b.cols];
        for (int k = 0; k < a.cols; ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            double* crow = &c.v[static_cast<std::size_t>(k) * c.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A . B^T with A (m x k), B (n x k) -> (m x n)
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.v[static_cast<std::size_t>(i) * a.cols];
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = &b.v[static_cast<std::size_t>(j) * b.cols];
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c.at(i, j) += s;
        }
    }
}

} // namespace

Var Graph::matmul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.cols != tb.rows)
        throw DataError(ErrCode::shape_mismatch, "matmul inner dimensions differ");
    Tensor out(ta.rows, tb.cols);
    matmul_acc(ta, tb, out);
    bool ng = any_needs({a, b});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, a, b, o] {
            const Tensor& go = g(o);
            if (nodes_[a.id].needs_grad) matmul_nt_acc(go, val(b), g(a)); // dA = G . B^T
            if (nodes_[b.id].needs_grad) matmul_tn_acc(val(a), go, g(b)); // dB = A^T . G
        };
    return o;
}

Var Graph::matmul_nt(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.cols != tb.cols)
        throw DataError(ErrCode::shape_mismatch, "matmul_nt inner dimensions differ");
    Tensor out(ta.rows, tb.rows);
    matmul_nt_acc(ta, tb, out);
    bool ng = any_needs({a, b});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, a, b, o] {
            const Tensor& go = g(o);
            if (nodes_[a.id].needs_grad) matmul_acc(go, val(b), g(a));    // dA = G . B
            if (nodes_[b.id].needs_grad) matmul_tn_acc(go, val(a), g(b)); // dB = G^T . A
        };
    return o;
}

Var Graph::sigmoid(Var x) {
    Tensor out = val(x);
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o] {
            const Tensor& go = g(o);
            const Tensor& y = val(o);
            for (int i = 0; i < go.numel(); ++i) g(x).v[i] += go.v[i] * y.v[i] * (1.0 - y.v[i]);
        };
    return o;
}

Var Graph::tanh(Var x) {
    Tensor out = val(x);
    for (double& v : out.v) v = std::tanh(v);
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o] {
            const Tensor& go = g(o);
            const Tensor& y = val(o);
            for (int i = 0; i < go.numel(); ++i) g(x).v[i] += go.v[i] * (1.0 - y.v[i] * y.v[i]);
        };
    return o;
}

Var Graph::relu(Var x) {
    Tensor out = val(x);
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o] {
            const Tensor& go = g(o);
            const Tensor& tx = val(x);
            for (int i = 0; i < go.numel(); ++i)
                if (tx.v[i] > 0.0) g(x).v[i] += go.v[i];
        };
    return o;
}

Var Graph::softmax_rows(Var x) {
    Tensor out = val(x);
    for (int r = 0; r < out.rows; ++r) {
        double mx = out.at(r, 0);
        for (int c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < out.cols; ++c) {
            double e = std::exp(out.at(r, c) - mx);
            out.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < out.cols; ++c) out.at(r, c) /= sum;
    }
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o] {
            const Tensor& go = g(o);
            const Tensor& y = val(o);
            Tensor& gx = g(x);
            for (int r = 0; r < go.rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < go.cols; ++c) dot += go.at(r, c) * y.at(r, c);
                for (int c = 0; c < go.cols; ++c)
                    gx.at(r, c) += y.at(r, c) * (go.at(r, c) - dot);
            }
        };
    return o;
}

Var Graph::embedding_rows(Var table, const std::vector<int>& ids) {
    const Tensor& tt = val(table);
    Tensor out(static_cast<int>(ids.size()), tt.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tt.rows)
            throw DataError(ErrCode::out_of_range, "embedding id out of range");
        for (int c = 0; c < tt.cols; ++c) out.at(static_cast<int>(i), c) = tt.at(ids[i], c);
    }
    bool ng = nodes_[table.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, table, ids, o] {
            const Tensor& go = g(o);
            Tensor& gt = g(table);
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (int c = 0; c < go.cols; ++c)
                    gt.at(ids[i], c) += go.at(static_cast<int>(i), c);
        };
    return o;
}

Var Graph::gather_rows(Var x, const std::vector<int>& rows) {
    const Tensor& tx = val(x);
    Tensor out(static_cast<int>(rows.size()), tx.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= tx.rows)
            throw DataError(ErrCode::out_of_range, "gather row out of range");
        for (int c = 0; c < tx.cols; ++c) out.at(static_cast<int>(i), c) = tx.at(rows[i], c);
    }
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, rows, o] {
            const Tensor& go = g(o);
            Tensor& gx = g(x);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int c = 0; c < go.cols; ++c)
                    gx.at(rows[i], c) += go.at(static_cast<int>(i), c);
        };
    return o;
}

Var Graph::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw DataError(ErrCode::empty_input, "concat_cols of nothing");
    int rows = val(xs[0]).rows;
    int cols = 0;
    for (Var x : xs) {
        if (val(x).rows != rows)
            throw DataError(ErrCode::shape_mismatch, "concat_cols row counts differ");
        cols += val(x).cols;
    }
    Tensor out(rows, cols);
    int off = 0;
    for (Var x : xs) {
        const Tensor& t = val(x);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < t.cols; ++c) out.at(r, off + c) = t.at(r, c);
        off += t.cols;
    }
    bool ng = any_needs(xs);
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, xs, o] {
            const Tensor& go = g(o);
            int off2 = 0;
            for (Var x : xs) {
                const Tensor& t = val(x);
                if (nodes_[x.id].needs_grad) {
                    Tensor& gx = g(x);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < t.cols; ++c) gx.at(r, c) += go.at(r, off2 + c);
                }
                off2 += t.cols;
            }
        };
    return o;
}

Var Graph::concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw DataError(ErrCode::empty_input, "concat_rows of nothing");
    int cols = val(xs[0]).cols;
    int rows = 0;
    for (Var x : xs) {
        if (val(x).cols != cols)
            throw DataError(ErrCode::shape_mismatch, "concat_rows column counts differ");
        rows += val(x).rows;
    }
    Tensor out(rows, cols);
    int off = 0;
    for (Var x : xs) {
        const Tensor& t = val(x);
        for (int r = 0; r < t.rows; ++r)
            for (int c = 0; c < cols; ++c) out.at(off + r, c) = t.at(r, c);
        off += t.rows;
    }
    bool ng = any_needs(xs);
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, xs, o] {
            const Tensor& go = g(o);
            int off2 = 0;
            for (Var x : xs) {
                const Tensor& t = val(x);
                if (nodes_[x.id].needs_grad) {
                    Tensor& gx = g(x);
                    for (int r = 0; r < t.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) gx.at(r, c) += go.at(off2 + r, c);
                }
                off2 += t.rows;
            }
        };
    return o;
}

Var Graph::slice_cols(Var x, int from, int to) {
    const Tensor& tx = val(x);
    if (from < 0 || to > tx.cols || from >= to)
        throw DataError(ErrCode::out_of_range, "slice_cols bounds");
    Tensor out(tx.rows, to - from);
    for (int r = 0; r < tx.rows; ++r)
        for (int c = from; c < to; ++c) out.at(r, c - from) = tx.at(r, c);
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, from, o] {
            const Tensor& go = g(o);
            Tensor& gx = g(x);
            for (int r = 0; r < go.rows; ++r)
                for (int c = 0; c < go.cols; ++c) gx.at(r, from + c) += go.at(r, c);
        };
    return o;
}

Var Graph::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    const Tensor& tx = val(x);
    require_shape(val(gain), 1, tx.cols, "layer_norm gain");
    require_shape(val(bias), 1, tx.cols, "layer_norm bias");
    int d = tx.cols;
    Tensor xhat(tx.rows, d);
    Tensor inv_std(tx.rows, 1);
    Tensor out(tx.rows, d);
    const Tensor& tg = val(gain);
    const Tensor& tb = val(bias);
    for (int r = 0; r < tx.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += tx.at(r, c);
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) {
            double dd = tx.at(r, c) - mean;
            var += dd * dd;
        }
        var /= d;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std.v[r] = is;
        for (int c = 0; c < d; ++c) {
            xhat.at(r, c) = (tx.at(r, c) - mean) * is;
            out.at(r, c) = tg.v[c] * xhat.at(r, c) + tb.v[c];
        }
    }
    bool ng = any_needs({x, gain, bias});
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, gain, bias, o, xhat, inv_std] {
            const Tensor& go = g(o);
            const Tensor& tg2 = val(gain);
            int d2 = go.cols;
            if (nodes_[gain.id].needs_grad || nodes_[bias.id].needs_grad) {
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < d2; ++c) {
                        if (nodes_[gain.id].needs_grad)
                            g(gain).v[c] += go.at(r, c) * xhat.at(r, c);
                        if (nodes_[bias.id].needs_grad) g(bias).v[c] += go.at(r, c);
                    }
            }
            if (nodes_[x.id].needs_grad) {
                Tensor& gx = g(x);
                for (int r = 0; r < go.rows; ++r) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (int c = 0; c < d2; ++c) {
                        double dxh = go.at(r, c) * tg2.v[c];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat.at(r, c);
                    }
                    mean_dxhat /= d2;
                    mean_dxhat_xhat /= d2;
                    for (int c = 0; c < d2; ++c) {
                        double dxh = go.at(r, c) * tg2.v[c];
                        gx.at(r, c) += inv_std.v[r] *
                                       (dxh - mean_dxhat - xhat.at(r, c) * mean_dxhat_xhat);
                    }
                }
            }
        };
    return o;
}

Var Graph::dropout(Var x, double rate, RngStream& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw DataError(ErrCode::out_of_range, "dropout rate must be in [0,1)");
    if (!training_ || rate == 0.0) return x;
    const Tensor& tx = val(x);
    Tensor mask(tx.rows, tx.cols);
    double keep = 1.0 - rate;
    for (int i = 0; i < mask.numel(); ++i)
        mask.v[i] = rng.next_double() < rate ? 0.0 : 1.0 / keep;
    Tensor out = tx;
    for (int i = 0; i < out.numel(); ++i) out.v[i] *= mask.v[i];
    bool ng = nodes_[x.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, x, o, mask] {
            const Tensor& go = g(o);
            for (int i = 0; i < go.numel(); ++i) g(x).v[i] += go.v[i] * mask.v[i];
        };
    return o;
}

Var Graph::cross_entropy_logits(Var logits, const std::vector<int>& targets) {
    const Tensor& tl = val(logits);
    if (static_cast<int>(targets.size()) != tl.rows)
        throw DataError(ErrCode::shape_mismatch, "cross_entropy targets/rows differ");
    if (targets.empty()) throw DataError(ErrCode::empty_input, "cross_entropy on empty batch");
    double total = 0.0;
    for (int r = 0; r < tl.rows; ++r) {
        if (targets[r] < 0 || targets[r] >= tl.cols)
            throw DataError(ErrCode::out_of_range, "cross_entropy target out of range");
        double mx = tl.at(r, 0);
        for (int c = 1; c < tl.cols; ++c) mx = std::max(mx, tl.at(r, c));
        double lse = 0.0;
        for (int c = 0; c < tl.cols; ++c) lse += std::exp(tl.at(r, c) - mx);
        lse = mx + std::log(lse);
        total += lse - tl.at(r, targets[r]);
    }
    Tensor out(1, 1);
    out.v[0] = total / tl.rows;
    bool ng = nodes_[logits.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, logits, targets, o] {
            double gscale = g(o).v[0] / static_cast<double>(targets.size());
            const Tensor& tl2 = val(logits);
            Tensor& gl = g(logits);
            for (int r = 0; r < tl2.rows; ++r) {
                double mx = tl2.at(r, 0);
                for (int c = 1; c < tl2.cols; ++c) mx = std::max(mx, tl2.at(r, c));
                double sum = 0.0;
                for (int c = 0; c < tl2.cols; ++c) sum += std::exp(tl2.at(r, c) - mx);
                for (int c = 0; c < tl2.cols; ++c) {
                    double p = std::exp(tl2.at(r, c) - mx) / sum;
                    gl.at(r, c) += gscale * (p - (c == targets[r] ? 1.0 : 0.0));
                }
            }
        };
    return o;
}

Var Graph::mse_against(Var pred, const Tensor& target) {
    const Tensor& tp = val(pred);
    if (!tp.same_shape(target)) require_shape(target, tp.rows, tp.cols, "mse target");
    double total = 0.0;
    for (int i = 0; i < tp.numel(); ++i) {
        double d = tp.v[i] - target.v[i];
        total += d * d;
    }
    Tensor out(1, 1);
    out.v[0] = total / tp.numel();
    bool ng = nodes_[pred.id].needs_grad;
    Var o = push(std::move(out), ng, {});
    if (ng)
        nodes_[o.id].back = [this, pred, target, o] {
            double gscale = g(o).v[0] * 2.0 / static_cast<double>(val(pred).numel());
            const Tensor& tp2 = val(pred);
            for (int i = 0; i < tp2.numel(); ++i)
                g(pred).v[i] += gscale * (tp2.v[i] - target.v[i]);
        };
    return o;
}

void Graph::backward(Var loss) {
    if (!record_) throw DataError(ErrCode::invalid_config, "backward on a non-recording graph");
    const Tensor& tl = val(loss);
    if (tl.numel() != 1) throw DataError(ErrCode::shape_mismatch, "backward needs a scalar loss");
    if (!nodes_[loss.id].needs_grad) return;
    nodes_[loss.id].grad.v[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
    }
    for (auto& [p, id] : param_nodes_) {
        Parameter* param = nodes_[id].pref;
        const Tensor& gn = nodes_[id].grad;
        for (int i = 0; i < gn.numel(); ++i) param->grad.v[i] += gn.v[i];
    }
}

} // namespace mdi::nn
