#pragma once

// Test-only reference implementations. These stay deliberately naive and
// independent of the library code paths they are used to check.

#include <Eigen/Core>

#include <vector>

#include "cpm/se3.hpp"

namespace cpm::testing {

// 4x4 homogeneous-matrix route for frame products.
inline Eigen::Matrix4d to_homogeneous(const Pose& p) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = p.rotation;
    m.block<3, 1>(0, 3) = p.translation;
    return m;
}

inline Eigen::Matrix4d homogeneous_to_world(const Pose& t_wa, const Pose& t_af,
                                            const Pose& t_wf) {
    return to_homogeneous(t_wa) * to_homogeneous(t_af) * to_homogeneous(t_wf).inverse();
}

// Triple-loop matmul.
inline std::vector<double> naive_matmul(const std::vector<double>& a,
                                        const std::vector<double>& b, std::size_t m,
                                        std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < k; ++l) c[i * n + j] += a[i * k + l] * b[l * n + j];
    return c;
}

// Product-loop cumulative schedule.
inline double product_loop_alpha_bar(int t, int T, double beta_start, double beta_end) {
    double prod = 1.0;
    for (int i = 1; i <= t; ++i) {
        double beta = beta_start + (beta_end - beta_start) * (i - 1) / static_cast<double>(T - 1);
        prod *= 1.0 - beta;
    }
    return prod;
}

}  // namespace cpm::testing
