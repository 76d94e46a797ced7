#include "cpm/optim.hpp"

#include <cmath>

#include "cpm/errors.hpp"

namespace cpm::ad {

double global_norm(const ParamMap& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    return std::sqrt(sq);
}

void AdamState::step(ParamMap& params, const ParamMap& grads) {
    double scale = 1.0;
    if (cfg_.clip > 0.0) {
        double norm = global_norm(grads);
        if (norm > cfg_.clip) scale = cfg_.clip / norm;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // unreached parameter: no update
        const Array& g = git->second;
        if (!p.same_shape(g))
            throw ShapeMismatchError("adam_step: param " + name + " shape " +
                                     shape_str(p.shape()) + " vs grad " + shape_str(g.shape()));
        Array& m = m_.try_emplace(name, Array(p.shape(), 0.0)).first->second;
        Array& v = v_.try_emplace(name, Array(p.shape(), 0.0)).first->second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = g[i] * scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace cpm::ad
