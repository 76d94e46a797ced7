#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "cpm/errors.hpp"
#include "cpm/rng.hpp"
#include "cpm/se3.hpp"
#include "support/oracles.hpp"

using namespace cpm;

namespace {

constexpr double kPi = std::numbers::pi;

Twist random_canonical_twist(Rng& rng, double max_angle = kPi - 0.1) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    Twist xi;
    xi.omega = axis * rng.uniform(0.0, max_angle);
    xi.v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    return xi;
}

double max_abs_diff(const Twist& a, const Twist& b) {
    return std::max((a.omega - b.omega).cwiseAbs().maxCoeff(),
                    (a.v - b.v).cwiseAbs().maxCoeff());
}

double pose_diff(const Pose& a, const Pose& b) {
    return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                    (a.translation - b.translation).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("exp_map of zero twist is identity") {
    Pose p = exp_map(Twist::Zero());
    CHECK(pose_diff(p, Pose::Identity()) == 0.0);
}

TEST_CASE("exp_map of pure translation") {
    Twist xi;
    xi.v = {1, 2, 3};
    Pose p = exp_map(xi);
    CHECK(pose_diff(p, Pose{Eigen::Matrix3d::Identity(), {1, 2, 3}}) < 1e-15);
}

TEST_CASE("exp_map of quarter turn about z") {
    Twist xi;
    xi.omega = {0, 0, kPi / 2};
    Pose p = exp_map(xi);
    Eigen::Matrix3d expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((p.rotation - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.translation.norm() == 0.0);
}

TEST_CASE("log_map of identity is the zero twist") {
    Twist xi = log_map(Pose::Identity());
    CHECK(xi.omega.norm() == 0.0);
    CHECK(xi.v.norm() == 0.0);
}

TEST_CASE("log_map inverts the quarter turn") {
    Twist q;
    q.omega = {0, 0, kPi / 2};
    Twist xi = log_map(exp_map(q));
    CHECK(max_abs_diff(xi, q) < 1e-12);
}

TEST_CASE("log_map rejects angles within 1e-6 of pi") {
    Twist xi;
    xi.omega = {0, 0, kPi - 1e-9};
    CHECK_THROWS_AS(log_map(exp_map(xi)), AngleNearPiError);
}

TEST_CASE("exp/log roundtrip over 10000 seeded canonical twists") {
    Rng rng(20240811);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        Twist xi = random_canonical_twist(rng);
        worst = std::max(worst, max_abs_diff(log_map(exp_map(xi)), xi));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("roundtrip stays accurate near the small-angle threshold") {
    Rng rng(7);
    for (double mag : {0.0, 1e-12, 1e-9, 1e-8, 2e-8, 1e-6, 1e-4}) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        axis.normalize();
        Twist xi;
        xi.omega = axis * mag;
        xi.v = {0.3, -0.2, 0.9};
        CHECK(max_abs_diff(log_map(exp_map(xi)), xi) < 1e-12);
    }
}

TEST_CASE("group axioms") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        Pose a = exp_map(random_canonical_twist(rng));
        Pose b = exp_map(random_canonical_twist(rng));
        Pose c = exp_map(random_canonical_twist(rng));
        CHECK(pose_diff(compose(a, inverse(a)), Pose::Identity()) < 1e-9);
        CHECK(pose_diff(compose(Pose::Identity(), b), b) == 0.0);
        CHECK(pose_diff(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-9);
        CHECK(compose(a, b).is_valid(1e-12));
    }
}

TEST_CASE("interpolate endpoints and midpoint") {
    Rng rng(31);
    Pose start = exp_map(random_canonical_twist(rng, 2.0));
    Pose end = exp_map(random_canonical_twist(rng, 2.0));
    CHECK(pose_diff(interpolate(start, end, 0.0), start) < 1e-12);
    CHECK(pose_diff(interpolate(start, end, 1.0), end) < 1e-9);

    Twist quarter;
    quarter.omega = {0, 0, kPi / 2};
    Pose half = interpolate(Pose::Identity(), exp_map(quarter), 0.5);
    Twist eighth;
    eighth.omega = {0, 0, kPi / 4};
    CHECK(pose_diff(half, exp_map(eighth)) < 1e-12);
}

TEST_CASE("interpolate is geodesic in the rotation angle") {
    Rng rng(32);
    Pose start = exp_map(random_canonical_twist(rng, 1.5));
    Pose end = exp_map(random_canonical_twist(rng, 1.5));
    double total = log_map(compose(inverse(start), end)).omega.norm();
    for (double s : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        Pose mid = interpolate(start, end, s);
        double part = log_map(compose(inverse(start), mid)).omega.norm();
        CHECK(std::abs(part - s * total) < 1e-9);
    }
}

TEST_CASE("centroid_frame") {
    std::vector<Eigen::Vector3d> single{{1, 1, 1}};
    Pose p = centroid_frame(single);
    CHECK(pose_diff(p, Pose{Eigen::Matrix3d::Identity(), {1, 1, 1}}) == 0.0);

    std::vector<Eigen::Vector3d> cube;
    for (int x = 0; x <= 1; ++x)
        for (int y = 0; y <= 1; ++y)
            for (int z = 0; z <= 1; ++z) cube.emplace_back(x, y, z);
    Pose c = centroid_frame(cube);
    CHECK((c.translation - Eigen::Vector3d(0.5, 0.5, 0.5)).norm() < 1e-15);
    CHECK(c.rotation == Eigen::Matrix3d::Identity());

    std::vector<Eigen::Vector3d> none;
    CHECK_THROWS_AS(centroid_frame(none), EmptyCloudError);
}

TEST_CASE("to_part_frame") {
    Rng rng(55);
    Pose t_af = exp_map(random_canonical_twist(rng, 2.0));

    SUBCASE("identity offsets return the input") {
        Pose out = to_part_frame(t_af, Pose::Identity(), Pose::Identity());
        CHECK(pose_diff(out, t_af) == 0.0);
    }
    SUBCASE("pure translation offsets shift the translation") {
        Pose t_a_pa{Eigen::Matrix3d::Identity(), {0.1, -0.2, 0.3}};
        Pose shift{Eigen::Matrix3d::Identity(), {1.0, 2.0, 3.0}};
        Pose out = to_part_frame(shift, t_a_pa, Pose::Identity());
        CHECK((out.translation - Eigen::Vector3d(0.9, 2.2, 2.7)).norm() < 1e-15);
    }
    SUBCASE("inverse offsets recover the input") {
        Pose t_a_pa = exp_map(random_canonical_twist(rng, 2.0));
        Pose t_f_pf = exp_map(random_canonical_twist(rng, 2.0));
        Pose part = to_part_frame(t_af, t_a_pa, t_f_pf);
        Pose back = compose(compose(t_a_pa, part), inverse(t_f_pf));
        CHECK(pose_diff(back, t_af) < 1e-9);
    }
}

TEST_CASE("to_world matches the homogeneous-matrix oracle") {
    Rng rng(77);
    CHECK(pose_diff(to_world(Pose::Identity(), Pose::Identity(), Pose::Identity()),
                    Pose::Identity()) == 0.0);

    Pose shared = exp_map(random_canonical_twist(rng, 2.0));
    CHECK(pose_diff(to_world(shared, Pose::Identity(), shared), Pose::Identity()) < 1e-12);

    for (int i = 0; i < 200; ++i) {
        Pose t_wa = exp_map(random_canonical_twist(rng, 2.0));
        Pose t_af = exp_map(random_canonical_twist(rng, 2.0));
        Pose t_wf = exp_map(random_canonical_twist(rng, 2.0));
        Pose got = to_world(t_wa, t_af, t_wf);
        Eigen::Matrix4d want = testing::homogeneous_to_world(t_wa, t_af, t_wf);
        CHECK((testing::to_homogeneous(got) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("pose wire layout round-trips") {
    Rng rng(3);
    Pose p = exp_map(random_canonical_twist(rng, 2.0));
    Pose q = Pose::from_flat(p.flat());
    CHECK(pose_diff(p, q) == 0.0);
}

TEST_CASE("orthonormalized projects drifted rotations back to SO(3)") {
    Rng rng(4);
    Pose p = exp_map(random_canonical_twist(rng, 2.0));
    p.rotation(0, 1) += 1e-4;
    CHECK_FALSE(p.is_valid());
    CHECK(p.orthonormalized().is_valid(1e-12));
}
