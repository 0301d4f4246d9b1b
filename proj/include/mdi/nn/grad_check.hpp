#pragma once

#include <functional>

#include "mdi/nn/graph.hpp"

namespace mdi::nn {

struct GradCheckOptions {
    double eps = 1e-5;
    // When a model has more coordinates than this, a seeded subsample is
    // checked instead of the full sweep.
    std::size_t max_coords = SIZE_MAX;
    std::uint64_t sample_seed = 17;
};

// Compares analytic gradients against central differences
// (f(t+eps) - f(t-eps)) / (2 eps) per parameter coordinate. build_loss must
// rebuild the same deterministic scalar loss on every call (64-bit mode,
// dropout off). Returns the max of |a-n| / max(1, |a|+|n|).
double grad_check(const std::vector<Parameter*>& params,
                  const std::function<Var(Graph&)>& build_loss,
                  const GradCheckOptions& opts = {});

} // namespace mdi::nn
