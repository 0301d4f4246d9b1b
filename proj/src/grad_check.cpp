#include "mdi/nn/grad_check.hpp"

#include <cmath>

namespace mdi::nn {

namespace {

double eval_loss(const std::function<Var(Graph&)>& build_loss) {
    Graph g(false, false);
    Var loss = build_loss(g);
    double v = g.val(loss).v[0];
    if (!std::isfinite(v)) throw NumericError("non-finite loss in gradient check");
    return v;
}

} // namespace

double grad_check(const std::vector<Parameter*>& params,
                  const std::function<Var(Graph&)>& build_loss, const GradCheckOptions& opts) {
    for (Parameter* p : params) p->zero_grad();
    {
        Graph g(false, true);
        Var loss = build_loss(g);
        if (!std::isfinite(g.val(loss).v[0]))
            throw NumericError("non-finite loss in gradient check");
        g.backward(loss);
    }

    // Enumerate (param, coord) pairs, optionally subsampled.
    std::vector<std::pair<Parameter*, int>> coords;
    std::size_t total = 0;
    for (Parameter* p : params) total += static_cast<std::size_t>(p->value.numel());
    if (total <= opts.max_coords) {
        coords.reserve(total);
        for (Parameter* p : params)
            for (int i = 0; i < p->value.numel(); ++i) coords.push_back({p, i});
    } else {
        RngStream rng(opts.sample_seed, "grad_check_sample");
        for (Parameter* p : params) {
            // Proportional share per parameter, at least one coordinate.
            std::size_t share = std::max<std::size_t>(
                1, opts.max_coords * static_cast<std::size_t>(p->value.numel()) / total);
            for (std::size_t k = 0; k < share; ++k)
                coords.push_back(
                    {p, static_cast<int>(rng.next_below(static_cast<std::uint64_t>(p->value.numel())))});
        }
    }

    double max_rel = 0.0;
    for (auto& [p, i] : coords) {
        double saved = p->value.v[i];
        p->value.v[i] = saved + opts.eps;
        double f_plus = eval_loss(build_loss);
        p->value.v[i] = saved - opts.eps;
        double f_minus = eval_loss(build_loss);
        p->value.v[i] = saved;
        double numeric = (f_plus - f_minus) / (2.0 * opts.eps);
        double analytic = p->grad.v[i];
        double rel = std::abs(analytic - numeric) /
                     std::max(1.0, std::abs(analytic) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace mdi::nn
