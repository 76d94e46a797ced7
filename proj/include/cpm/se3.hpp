#pragma once

#include <Eigen/Core>

#include <array>
#include <span>

namespace cpm {

// Tangent coordinates of a rigid transform: rotation vector omega (radians)
// and translation part v (meters). Noise for the diffusion models lives in
// this space. Canonical representatives satisfy |omega| <= pi.
struct Twist {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();

    static Twist Zero() { return {}; }

    Eigen::Matrix<double, 6, 1> coords() const {
        Eigen::Matrix<double, 6, 1> x;
        x << omega, v;
        return x;
    }
    static Twist from_coords(const Eigen::Matrix<double, 6, 1>& x) {
        return {x.head<3>(), x.tail<3>()};
    }
    bool allFinite() const { return omega.allFinite() && v.allFinite(); }
};

// Rigid transform in SE(3). Rotations are stored as matrices; after long
// composition chains call orthonormalized() if drift exceeds 1e-9.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose Identity() { return {}; }

    // R^T R = I and det R = +1, both within tol elementwise.
    bool is_valid(double tol = 1e-9) const;

    // Nearest rotation in Frobenius norm (polar projection).
    Pose orthonormalized() const;

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

    // Wire layout: 9 rotation entries row-major, then the translation.
    std::array<double, 12> flat() const;
    static Pose from_flat(const std::array<double, 12>& d);
};

// Start and end waypoints of the manipulated object, expressed as T_AF.
struct TrajectorySpec {
    std::array<Pose, 2> poses;

    const Pose& start() const { return poses[0]; }
    const Pose& end() const { return poses[1]; }
    Pose& start() { return poses[0]; }
    Pose& end() { return poses[1]; }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

// Closed-form SE(3) exponential (Rodrigues rotation plus V-matrix coupling
// of the translation). Total function; switches to a 2nd-order Taylor
// expansion below angle 1e-8 to avoid cancellation.
Pose exp_map(const Twist& xi);

// Inverse of exp_map; returns the canonical representative. Throws
// AngleNearPiError within 1e-6 of pi where the log branch is ambiguous.
Twist log_map(const Pose& p);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

// Geodesic: compose(start, exp(s * log(start^-1 * end))).
Pose interpolate(const Pose& start, const Pose& end, double s);

// World-aligned frame at the arithmetic mean of the points.
Pose centroid_frame(std::span<const Eigen::Vector3d> points);

// (T_{A P_A})^-1 * T_AF * T_{F P_F}: the relative pose re-expressed between
// the two part frames.
Pose to_part_frame(const Pose& t_af, const Pose& t_a_pa, const Pose& t_f_pf);

// T_W = T_WA * T_AF * (T_WF)^-1: the world-frame motion of the function
// object implied by the relative pose.
Pose to_world(const Pose& t_wa, const Pose& t_af, const Pose& t_wf);

}  // namespace cpm
