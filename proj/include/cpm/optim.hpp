#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cpm/array.hpp"

namespace cpm::ad {

// Named parameters, ordered so that every iteration is deterministic.
using ParamMap = std::map<std::string, Array>;

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip = 1.0;  // global-norm gradient clip; <= 0 disables
};

class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Clips the gradients to global norm cfg.clip, then applies one
    // bias-corrected Adam update in place. Moment buffers are created on
    // first sight of each parameter.
    void step(ParamMap& params, const ParamMap& grads);

    const AdamConfig& config() const { return cfg_; }
    std::int64_t steps() const { return t_; }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    ParamMap m_, v_;
};

double global_norm(const ParamMap& grads);

}  // namespace cpm::ad
