#include "mdi/nn/adam.hpp"

#include <cmath>

namespace mdi::nn {

void Adam::step(const std::vector<Parameter*>& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
        Slot& s = slots_[p];
        if (s.m.numel() == 0) {
            s.m = Tensor(p->value.rows, p->value.cols);
            s.v = Tensor(p->value.rows, p->value.cols);
        }
        if (!s.m.same_shape(p->value))
            throw DataError(ErrCode::shape_mismatch, "adam state shape drifted: " + p->name);
        for (int i = 0; i < p->value.numel(); ++i) {
            double gi = p->grad.v[i];
            s.m.v[i] = cfg_.beta1 * s.m.v[i] + (1.0 - cfg_.beta1) * gi;
            s.v.v[i] = cfg_.beta2 * s.v.v[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = s.m.v[i] / bc1;
            double vhat = s.v.v[i] / bc2;
            p->value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p->zero_grad();
    }
}

} // namespace mdi::nn
