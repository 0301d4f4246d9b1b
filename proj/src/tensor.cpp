#include "mdi/nn/tensor.hpp"

namespace mdi::nn {

Parameter Parameter::normal(std::string name, int r, int c, RngStream& rng, double mu,
                            double sigma) {
    Parameter p;
    p.name = std::move(name);
    p.value = Tensor(r, c);
    p.grad = Tensor(r, c);
    RngStream stream = rng.split(p.name);
    for (double& x : p.value.v) x = stream.next_normal(mu, sigma);
    return p;
}

Parameter Parameter::zeros(std::string name, int r, int c) {
    Parameter p;
    p.name = std::move(name);
    p.value = Tensor(r, c);
    p.grad = Tensor(r, c);
    return p;
}

} // namespace mdi::nn
