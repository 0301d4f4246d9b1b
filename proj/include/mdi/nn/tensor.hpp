#pragma once

#include <string>
#include <vector>

#include "mdi/error.hpp"
#include "mdi/rng.hpp"

namespace mdi::nn {

// Dense row-major matrix of doubles. All model math runs in 64-bit; vectors
// are 1xN rows, scalars 1x1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
    static Tensor full(int r, int c, double x) {
        Tensor t(r, c);
        std::fill(t.v.begin(), t.v.end(), x);
        return t;
    }
    static Tensor row(std::vector<double> xs) {
        Tensor t;
        t.rows = 1;
        t.cols = static_cast<int>(xs.size());
        t.v = std::move(xs);
        return t;
    }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    int numel() const { return rows * cols; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

inline void require_shape(const Tensor& t, int r, int c, const char* what) {
    if (t.rows != r || t.cols != c)
        throw DataError(ErrCode::shape_mismatch,
                        std::string(what) + ": expected " + std::to_string(r) + "x" +
                            std::to_string(c) + ", got " + std::to_string(t.rows) + "x" +
                            std::to_string(t.cols));
}

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    // W ~ N(mu, sigma), the paper-default embedding/weight init.
    static Parameter normal(std::string name, int r, int c, RngStream& rng, double mu = 0.0,
                            double sigma = 0.05);
    static Parameter zeros(std::string name, int r, int c);

    void zero_grad() { grad.fill(0.0); }
};

} // namespace mdi::nn
