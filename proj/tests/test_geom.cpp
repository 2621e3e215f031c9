#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "azil/geom.hpp"
#include "azil/rng.hpp"

using namespace azil;

namespace {

// Rotation matrix exponential (Rodrigues), used as an independent oracle for
// the quaternion update: R_next = exp([w dt]_x) * R_prev.
RotationMatrix rodrigues(const Vec3& w, double dt) {
    double theta = w.norm() * dt;
    RotationMatrix r = RotationMatrix::identity();
    if (theta < 1e-14) return r;
    Vec3 u{w.x / w.norm(), w.y / w.norm(), w.z / w.norm()};
    double c = std::cos(theta), s = std::sin(theta), v = 1.0 - c;
    r.m = {{{c + u.x * u.x * v, u.x * u.y * v - u.z * s, u.x * u.z * v + u.y * s},
            {u.y * u.x * v + u.z * s, c + u.y * u.y * v, u.y * u.z * v - u.x * s},
            {u.z * u.x * v - u.y * s, u.z * u.y * v + u.x * s, c + u.z * u.z * v}}};
    return r;
}

double frobenius_diff(const RotationMatrix& a, const RotationMatrix& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double d = a.m[i][j] - b.m[i][j];
            s += d * d;
        }
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("wrap_deg maps into (-180, 180]") {
    REQUIRE(wrap_deg(190.0) == Catch::Approx(-170.0));
    REQUIRE(wrap_deg(-190.0) == Catch::Approx(170.0));
    REQUIRE(wrap_deg(180.0) == Catch::Approx(180.0));
    REQUIRE(wrap_deg(-180.0) == Catch::Approx(180.0));
    REQUIRE(wrap_deg(540.0) == Catch::Approx(180.0));
    REQUIRE(wrap_deg(0.0) == Catch::Approx(0.0));
}

TEST_CASE("omega_matrix layout") {
    Mat4 om = omega_matrix({1.0, 2.0, 3.0});
    Mat4 expected{{{0, -1, -2, -3}, {1, 0, -3, 2}, {2, 3, 0, -1}, {3, -2, 1, 0}}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) REQUIRE(om[i][j] == expected[i][j]);
}

TEST_CASE("omega_matrix times q equals pure-quaternion left product") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        Vec3 w{rng.normal(), rng.normal(), rng.normal()};
        Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        Quaternion wq = Quaternion{0.0, w.x, w.y, w.z} * q;

        Mat4 om = omega_matrix(w);
        std::array<double, 4> qv{q.w, q.x, q.y, q.z};
        std::array<double, 4> prod{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) prod[i] += om[i][j] * qv[j];

        REQUIRE(prod[0] == Catch::Approx(wq.w).margin(1e-12));
        REQUIRE(prod[1] == Catch::Approx(wq.x).margin(1e-12));
        REQUIRE(prod[2] == Catch::Approx(wq.y).margin(1e-12));
        REQUIRE(prod[3] == Catch::Approx(wq.z).margin(1e-12));
    }
}

TEST_CASE("single update: quarter-turn yaw") {
    Quaternion q = quaternion_update(Quaternion::identity(), {0.0, 0.0, kPi / 2.0}, 1.0);
    double r = std::sqrt(0.5);
    REQUIRE(q.w == Catch::Approx(r).margin(1e-12));
    REQUIRE(q.x == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(q.y == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(q.z == Catch::Approx(r).margin(1e-12));

    auto d = head_orientation(q);
    REQUIRE(d.azimuth_deg == Catch::Approx(90.0).margin(1e-9));
    REQUIRE(d.elevation_deg == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("update matches rotation-matrix exponential oracle") {
    Rng rng(11);
    Quaternion q = Quaternion::identity();
    RotationMatrix r = RotationMatrix::identity();
    double dt = 0.01;
    for (int step = 0; step < 500; ++step) {
        double t = step * dt;
        Vec3 w{0.8 * std::sin(1.7 * t), -1.1 * std::cos(0.9 * t),
               1.4 * std::sin(0.4 * t + 0.3)};
        q = quaternion_update(q, w, dt);
        r = rodrigues(w, dt) * r;
        REQUIRE(q.norm() == Catch::Approx(1.0).margin(1e-12));
    }
    REQUIRE(frobenius_diff(q.to_rotation_matrix(), r) < 1e-9);
    REQUIRE(r.orthonormality_error() < 1e-9);
}

TEST_CASE("small-rate guard avoids division blowup") {
    Quaternion q0 = Quaternion::from_axis_angle({0, 0, 1}, deg2rad(30.0));
    Quaternion q = quaternion_update(q0, {1e-15, 0.0, 0.0}, 0.01);
    REQUIRE(std::isfinite(q.w));
    REQUIRE(q.norm() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(q.w == Catch::Approx(q0.w).margin(1e-12));
    REQUIRE(q.z == Catch::Approx(q0.z).margin(1e-12));

    // continuity across the guard threshold
    Quaternion a = quaternion_update(q0, {2e-12, 0.0, 0.0}, 0.01);
    Quaternion b = quaternion_update(q0, {5e-13, 0.0, 0.0}, 0.01);
    REQUIRE(std::abs(a.w - b.w) < 1e-12);
    REQUIRE(std::abs(a.x - b.x) < 1e-12);
}

TEST_CASE("unit norm holds over a long random walk") {
    Rng rng(3);
    Quaternion q = Quaternion::identity();
    for (int i = 0; i < 2000; ++i) {
        Vec3 w{4.0 * rng.normal(), 4.0 * rng.normal(), 4.0 * rng.normal()};
        q = quaternion_update(q, w, 0.01);
    }
    REQUIRE(q.norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("integrate_gyro: constant yaw ramp") {
    std::vector<AngularVelocitySample> samples;
    for (int i = 0; i < 100; ++i)
        samples.push_back({{0.0, 0.0, kPi / 2.0}, 0.01 * i});
    auto qs = integrate_gyro(samples);
    REQUIRE(qs.size() == 100);

    auto first = head_orientation(qs.front());
    REQUIRE(first.azimuth_deg == Catch::Approx(0.9).margin(1e-9));
    auto last = head_orientation(qs.back());
    REQUIRE(last.azimuth_deg == Catch::Approx(90.0).margin(1e-9));
    REQUIRE(last.elevation_deg == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("integrate_gyro rejects non-increasing timestamps") {
    std::vector<AngularVelocitySample> bad1 = {{{0, 0, 1}, 0.0}, {{0, 0, 1}, 0.0}};
    REQUIRE_THROWS_AS(integrate_gyro(bad1), std::invalid_argument);
    std::vector<AngularVelocitySample> bad2 = {
        {{0, 0, 1}, 0.0}, {{0, 0, 1}, 0.01}, {{0, 0, 1}, 0.005}};
    REQUIRE_THROWS_AS(integrate_gyro(bad2), std::invalid_argument);
    REQUIRE(integrate_gyro({}).empty());
}

TEST_CASE("reference calibration conjugates the rotation") {
    // reference frame: device yawed 90 deg left relative to the head
    RotationMatrix r_ref = Quaternion::from_axis_angle({0, 0, 1}, kPi / 2).to_rotation_matrix();
    Quaternion q = Quaternion::from_axis_angle({0, 1, 0}, deg2rad(-30.0));
    RotationMatrix out = apply_reference_calibration(q, r_ref);

    RotationMatrix expected = r_ref * q.to_rotation_matrix() * r_ref.transpose();
    REQUIRE(frobenius_diff(out, expected) < 1e-12);
    REQUIRE(out.orthonormality_error() < 1e-12);

    RotationMatrix junk;
    junk.m = {{{1, 0, 0}, {0, 2, 0}, {0, 0, 1}}};
    REQUIRE_THROWS_AS(apply_reference_calibration(q, junk), std::invalid_argument);
}

TEST_CASE("spherical and cartesian conversions") {
    auto v = sph_to_cart({90.0, 0.0});
    REQUIRE(v.x == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(v.y == Catch::Approx(1.0).margin(1e-12));

    auto frontal = sph_to_cart({0.0, 0.0});
    REQUIRE(frontal.x == Catch::Approx(1.0).margin(1e-12));

    auto up = cart_to_sph({0.0, 0.0, 3.0});
    REQUIRE(up.elevation_deg == Catch::Approx(90.0).margin(1e-12));

    auto back = cart_to_sph({-1.0, 0.0, 0.0});
    REQUIRE(back.azimuth_deg == Catch::Approx(180.0).margin(1e-12));

    REQUIRE_THROWS_AS(cart_to_sph({0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("spherical round trip") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        SphericalDirection d{rng.uniform(-179.9, 180.0), rng.uniform(-89.9, 89.9)};
        auto back = cart_to_sph(sph_to_cart(d));
        REQUIRE(back.azimuth_deg == Catch::Approx(d.azimuth_deg).margin(1e-9));
        REQUIRE(back.elevation_deg == Catch::Approx(d.elevation_deg).margin(1e-9));
    }
}

TEST_CASE("head orientation of composed yaw and pitch") {
    Quaternion yaw = Quaternion::from_axis_angle({0, 0, 1}, deg2rad(40.0));
    Quaternion pitch_up = Quaternion::from_axis_angle({0, 1, 0}, deg2rad(-25.0));
    auto d = head_orientation(yaw * pitch_up);
    REQUIRE(d.azimuth_deg == Catch::Approx(40.0).margin(1e-9));
    REQUIRE(d.elevation_deg == Catch::Approx(25.0).margin(1e-9));

    auto idle = head_orientation(Quaternion::identity());
    REQUIRE(idle.azimuth_deg == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(idle.elevation_deg == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("quaternion log inverts axis-angle") {
    Rng rng(23);
    for (int i = 0; i < 100; ++i) {
        Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
        if (axis.norm() < 1e-6) continue;
        double angle = rng.uniform(0.01, kPi - 0.01);
        Quaternion q = Quaternion::from_axis_angle(axis, angle);
        Vec3 v = q.log();
        REQUIRE(v.norm() == Catch::Approx(angle).margin(1e-9));
        double d = v.dot(axis) / (v.norm() * axis.norm());
        REQUIRE(d == Catch::Approx(1.0).margin(1e-9));

        // negated quaternion is the same rotation; log takes the short arc
        Quaternion neg{-q.w, -q.x, -q.y, -q.z};
        Vec3 v2 = neg.log();
        REQUIRE(v2.x == Catch::Approx(v.x).margin(1e-9));
        REQUIRE(v2.y == Catch::Approx(v.y).margin(1e-9));
        REQUIRE(v2.z == Catch::Approx(v.z).margin(1e-9));
    }
}

TEST_CASE("downsample keeps the last sample of each stride") {
    std::vector<int> series;
    for (int i = 0; i < 10; ++i) series.push_back(i);
    auto out = downsample(series, 10, 5);
    REQUIRE(out == std::vector<int>{1, 3, 5, 7, 9});

    std::vector<int> hundred;
    for (int i = 0; i < 100; ++i) hundred.push_back(i);
    auto five = downsample(hundred, 100, 5);
    REQUIRE(five.size() == 5);
    REQUIRE(five.front() == 19);
    REQUIRE(five.back() == 99);

    REQUIRE_THROWS_AS(downsample(series, 10, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(downsample(series, 0, 5), std::invalid_argument);
}
