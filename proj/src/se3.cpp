#include "cpm/se3.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

#include "cpm/errors.hpp"

namespace cpm {

namespace {
constexpr double kSmallAngle = 1e-8;
constexpr double kPiMargin = 1e-6;
}  // namespace

bool Pose::is_valid(double tol) const {
    Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

Pose Pose::orthonormalized() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    return {r, translation};
}

std::array<double, 12> Pose::flat() const {
    std::array<double, 12> d;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) d[3 * r + c] = rotation(r, c);
    for (int i = 0; i < 3; ++i) d[9 + i] = translation(i);
    return d;
}

Pose Pose::from_flat(const std::array<double, 12>& d) {
    Pose p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.rotation(r, c) = d[3 * r + c];
    for (int i = 0; i < 3; ++i) p.translation(i) = d[9 + i];
    return p;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

Pose exp_map(const Twist& xi) {
    const double theta = xi.omega.norm();
    const Eigen::Matrix3d wx = skew(xi.omega);
    const Eigen::Matrix3d wx2 = wx * wx;

    // R = I + a*[w] + b*[w]^2, V = I + b*[w] + c*[w]^2 with
    //   a = sin(t)/t, b = (1-cos(t))/t^2, c = (t-sin(t))/t^3.
    // 1-cos is computed as 2*sin^2(t/2), which does not cancel.
    double a, b, c;
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
        c = 1.0 / 6.0 - t2 / 120.0;
    } else {
        const double t2 = theta * theta;
        const double half_sin = std::sin(0.5 * theta);
        a = std::sin(theta) / theta;
        b = 2.0 * half_sin * half_sin / t2;
        c = (theta - std::sin(theta)) / (t2 * theta);
    }

    Pose out;
    out.rotation = Eigen::Matrix3d::Identity() + a * wx + b * wx2;
    out.translation = (Eigen::Matrix3d::Identity() + b * wx + c * wx2) * xi.v;
    return out;
}

Twist log_map(const Pose& p) {
    const double cos_theta = std::clamp((p.rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta >= std::numbers::pi - kPiMargin)
        throw AngleNearPiError("log_map: rotation angle within 1e-6 of pi");

    Eigen::Vector3d axis_part(p.rotation(2, 1) - p.rotation(1, 2),
                              p.rotation(0, 2) - p.rotation(2, 0),
                              p.rotation(1, 0) - p.rotation(0, 1));

    Twist xi;
    if (theta < kSmallAngle) {
        xi.omega = 0.5 * axis_part;
        const Eigen::Matrix3d wx = skew(xi.omega);
        // V^-1 ~ I - [w]/2 + [w]^2/12 for small angles.
        Eigen::Matrix3d vinv =
            Eigen::Matrix3d::Identity() - 0.5 * wx + (1.0 / 12.0) * (wx * wx);
        xi.v = vinv * p.translation;
        return xi;
    }

    xi.omega = (theta / (2.0 * std::sin(theta))) * axis_part;
    const Eigen::Matrix3d wx = skew(xi.omega);
    const double t2 = theta * theta;
    const double half_sin = std::sin(0.5 * theta);
    const double coef = (1.0 - 0.25 * theta * std::sin(theta) / (half_sin * half_sin)) / t2;
    Eigen::Matrix3d vinv = Eigen::Matrix3d::Identity() - 0.5 * wx + coef * (wx * wx);
    xi.v = vinv * p.translation;
    return xi;
}

Pose compose(const Pose& a, const Pose& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& a) {
    Eigen::Matrix3d rt = a.rotation.transpose();
    return {rt, -(rt * a.translation)};
}

Pose interpolate(const Pose& start, const Pose& end, double s) {
    Twist delta = log_map(compose(inverse(start), end));
    delta.omega *= s;
    delta.v *= s;
    return compose(start, exp_map(delta));
}

Pose centroid_frame(std::span<const Eigen::Vector3d> points) {
    if (points.empty()) throw EmptyCloudError("centroid_frame: empty point list");
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& p : points) sum += p;
    Pose out;
    out.translation = sum / static_cast<double>(points.size());
    return out;
}

Pose to_part_frame(const Pose& t_af, const Pose& t_a_pa, const Pose& t_f_pf) {
    return compose(compose(inverse(t_a_pa), t_af), t_f_pf);
}

Pose to_world(const Pose& t_wa, const Pose& t_af, const Pose& t_wf) {
    return compose(compose(t_wa, t_af), inverse(t_wf));
}

}  // namespace cpm
