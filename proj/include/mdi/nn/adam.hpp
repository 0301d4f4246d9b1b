#pragma once

#include <unordered_map>

#include "mdi/nn/tensor.hpp"

namespace mdi::nn {

struct AdamConfig {
    double lr = 1e-3; // fixed, the paper default
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moment slots are allocated on first sight of a
// parameter; gradients are consumed from Parameter::grad and zeroed.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<Parameter*>& params);
    long steps_taken() const { return t_; }

  private:
    struct Slot {
        Tensor m, v;
    };
    AdamConfig cfg_;
    long t_ = 0;
    std::unordered_map<Parameter*, Slot> slots_;
};

} // namespace mdi::nn
