#pragma once

#include <vector>

#include <json.hpp>

namespace cpm {

// Linear beta schedule with the derived per-step quantities precomputed.
// All accessors are 1-based in the step index t in [1, T].
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{i<=t} alpha_i
    std::vector<double> sigma;      // sqrt(beta_t)

    double beta_t(int t) const { return beta[static_cast<std::size_t>(t - 1)]; }
    double alpha_t(int t) const { return alpha[static_cast<std::size_t>(t - 1)]; }
    double alpha_bar_t(int t) const { return alpha_bar[static_cast<std::size_t>(t - 1)]; }
    double sigma_t(int t) const { return sigma[static_cast<std::size_t>(t - 1)]; }

    // Throws InvalidRangeError unless 0 < beta_start < beta_end < 1, T >= 2.
    static NoiseSchedule make(int T = 200, double beta_start = 1e-4, double beta_end = 0.02);

    nlohmann::json to_json() const;
    static NoiseSchedule from_json(const nlohmann::json& j);
};

}  // namespace cpm
