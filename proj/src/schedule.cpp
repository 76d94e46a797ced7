#include "cpm/schedule.hpp"

#include <cmath>

#include "cpm/errors.hpp"

namespace cpm {

NoiseSchedule NoiseSchedule::make(int T, double beta_start, double beta_end) {
    if (T < 2) throw InvalidRangeError("schedule: need T >= 2, got " + std::to_string(T));
    if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0))
        throw InvalidRangeError("schedule: need 0 < beta_start < beta_end < 1, got " +
                                std::to_string(beta_start) + ".." + std::to_string(beta_end));
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));
    s.sigma.resize(static_cast<std::size_t>(T));
    double running = 1.0;
    for (int t = 1; t <= T; ++t) {
        const std::size_t i = static_cast<std::size_t>(t - 1);
        s.beta[i] = beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) /
                                     static_cast<double>(T - 1);
        s.alpha[i] = 1.0 - s.beta[i];
        running *= s.alpha[i];
        s.alpha_bar[i] = running;
        s.sigma[i] = std::sqrt(s.beta[i]);
    }
    return s;
}

nlohmann::json NoiseSchedule::to_json() const {
    return {{"T", T}, {"beta_start", beta.front()}, {"beta_end", beta.back()}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
    return make(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                j.at("beta_end").get<double>());
}

}  // namespace cpm
