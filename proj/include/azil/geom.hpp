// Quaternion attitude integration from gyroscope streams and conversion of
// the integrated orientation to head-locked spherical coordinates.
//
// Conventions (fixed for the whole library):
//   x forward, y left, z up.  Azimuth = atan2(y, x) in degrees, positive to
//   the left, in (-180, 180].  Elevation = asin(z/|v|) in degrees, positive
//   up, in [-90, 90].  The frontal direction is (az, el) = (0, 0).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace azil {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle in degrees to (-180, 180].
inline double wrap_deg(double a) {
    a = std::fmod(a, 360.0);
    if (a <= -180.0) a += 360.0;
    if (a > 180.0) a -= 360.0;
    return a;
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
};

/// One gyroscope reading: body-frame angular velocity in rad/s at time t (s).
struct AngularVelocitySample {
    Vec3 omega;
    double t = 0.0;
};

using Mat4 = std::array<std::array<double, 4>, 4>;

struct RotationMatrix {
    std::array<std::array<double, 3>, 3> m{};

    static RotationMatrix identity() {
        RotationMatrix r;
        r.m = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
        return r;
    }

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    RotationMatrix operator*(const RotationMatrix& o) const {
        RotationMatrix r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }

    RotationMatrix transpose() const {
        RotationMatrix r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }

    double trace() const { return m[0][0] + m[1][1] + m[2][2]; }

    /// Max-norm of R^T R - I; zero for an orthonormal matrix.
    double orthonormality_error() const {
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[k][i] * m[k][j];
                s -= (i == j) ? 1.0 : 0.0;
                worst = std::max(worst, std::abs(s));
            }
        return worst;
    }

    double det() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
};

/// Unit quaternion, w-first component order.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        double n = norm();
        if (n == 0.0) throw std::domain_error("cannot normalize zero quaternion");
        return {w / n, x / n, y / n, z / n};
    }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }

    /// Hamilton product.
    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    static Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
        double n = axis.norm();
        if (n == 0.0) return identity();
        double h = 0.5 * angle_rad;
        double s = std::sin(h) / n;
        return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
    }

    /// Rotation angle about the quaternion's axis, in [0, pi].
    double angle() const {
        double v = std::sqrt(x * x + y * y + z * z);
        return 2.0 * std::atan2(v, std::abs(w));
    }

    /// Log map: axis-angle vector u*theta with theta in [0, pi].
    Vec3 log() const {
        Quaternion q = *this;
        if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};  // same rotation, short arc
        double v = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
        if (v < 1e-15) return {2.0 * q.x, 2.0 * q.y, 2.0 * q.z};
        double theta = 2.0 * std::atan2(v, q.w);
        double s = theta / v;
        return {q.x * s, q.y * s, q.z * s};
    }

    RotationMatrix to_rotation_matrix() const {
        Quaternion q = normalized();
        double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
        RotationMatrix r;
        r.m[0][0] = ww + xx - yy - zz;
        r.m[0][1] = 2.0 * (q.x * q.y - q.w * q.z);
        r.m[0][2] = 2.0 * (q.x * q.z + q.w * q.y);
        r.m[1][0] = 2.0 * (q.x * q.y + q.w * q.z);
        r.m[1][1] = ww - xx + yy - zz;
        r.m[1][2] = 2.0 * (q.y * q.z - q.w * q.x);
        r.m[2][0] = 2.0 * (q.x * q.z - q.w * q.y);
        r.m[2][1] = 2.0 * (q.y * q.z + q.w * q.x);
        r.m[2][2] = ww - xx - yy + zz;
        return r;
    }
};

/// Direction on the unit sphere; the radius is fixed at 1.
struct SphericalDirection {
    double azimuth_deg = 0.0;    // (-180, 180], left positive
    double elevation_deg = 0.0;  // [-90, 90], up positive

    static constexpr double radius() { return 1.0; }
};

/// 4x4 skew operator mapping a rate vector to the quaternion-derivative
/// matrix; first row is [0, -wx, -wy, -wz].
inline Mat4 omega_matrix(const Vec3& w) {
    return Mat4{{{0.0, -w.x, -w.y, -w.z},
                 {w.x, 0.0, -w.z, w.y},
                 {w.y, w.z, 0.0, -w.x},
                 {w.z, -w.y, w.x, 0.0}}};
}

/// One closed-form attitude update:
///   q <- [cos(|w|dt/2) I + sin(|w|dt/2)/|w| Omega(w)] q_prev, renormalized.
/// For |w| below eps the sin/|w| factor is replaced by its limit dt/2.
inline Quaternion quaternion_update(const Quaternion& q_prev, const Vec3& omega,
                                    double dt, double eps = 1e-12) {
    double w = omega.norm();
    double half = 0.5 * w * dt;
    double c = std::cos(half);
    double s = (w < eps) ? 0.5 * dt : std::sin(half) / w;

    Mat4 om = omega_matrix(omega);
    std::array<double, 4> qv{q_prev.w, q_prev.x, q_prev.y, q_prev.z};
    std::array<double, 4> out{};
    for (int i = 0; i < 4; ++i) {
        double acc = c * qv[i];
        for (int j = 0; j < 4; ++j) acc += s * om[i][j] * qv[j];
        out[i] = acc;
    }
    return Quaternion{out[0], out[1], out[2], out[3]}.normalized();
}

/// Integrate a gyro stream into one quaternion per sample.
/// dt is taken from consecutive timestamps; the first sample reuses the
/// first interval (a single-sample stream integrates with dt = 0).
inline std::vector<Quaternion> integrate_gyro(
    std::span<const AngularVelocitySample> samples,
    const Quaternion& q0 = Quaternion::identity()) {
    std::vector<Quaternion> out;
    out.reserve(samples.size());
    if (samples.empty()) return out;

    double dt0 = samples.size() > 1 ? samples[1].t - samples[0].t : 0.0;
    if (samples.size() > 1 && dt0 <= 0.0)
        throw std::invalid_argument("timestamps must be strictly increasing");
    Quaternion q = quaternion_update(q0, samples[0].omega, dt0);
    out.push_back(q);
    for (size_t n = 1; n < samples.size(); ++n) {
        double dt = samples[n].t - samples[n - 1].t;
        if (dt <= 0.0) throw std::invalid_argument("timestamps must be strictly increasing");
        q = quaternion_update(q, samples[n].omega, dt);
        out.push_back(q);
    }
    return out;
}

/// Conjugate the quaternion's rotation by a device reference frame:
/// R_final = R_ref * R(q) * R_ref^-1.
inline RotationMatrix apply_reference_calibration(const Quaternion& q,
                                                  const RotationMatrix& r_ref) {
    if (r_ref.orthonormality_error() > 1e-6)
        throw std::invalid_argument("reference rotation is not orthonormal");
    return r_ref * q.to_rotation_matrix() * r_ref.transpose();
}

inline Vec3 sph_to_cart(const SphericalDirection& d) {
    double az = deg2rad(d.azimuth_deg);
    double el = deg2rad(d.elevation_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

inline SphericalDirection cart_to_sph(const Vec3& v) {
    double n = v.norm();
    if (n == 0.0) throw std::invalid_argument("cannot convert zero vector to spherical");
    SphericalDirection d;
    d.azimuth_deg = rad2deg(std::atan2(v.y, v.x));
    if (d.azimuth_deg <= -180.0) d.azimuth_deg += 360.0;
    d.elevation_deg = rad2deg(std::asin(std::clamp(v.z / n, -1.0, 1.0)));
    return d;
}

/// Rotate the frontal unit vector by the final rotation and read off the
/// head orientation as (azimuth, elevation).
inline SphericalDirection head_orientation(const RotationMatrix& r_final) {
    return cart_to_sph(r_final.apply(Vec3{1.0, 0.0, 0.0}));
}

inline SphericalDirection head_orientation(const Quaternion& q) {
    return head_orientation(q.to_rotation_matrix());
}

/// Decimate a frame sequence from rate_in to rate_out by keeping the last
/// sample of each stride. rate_in must be an integer multiple of rate_out.
template <typename T>
std::vector<T> downsample(const std::vector<T>& series, int rate_in, int rate_out) {
    if (rate_in <= 0 || rate_out <= 0 || rate_in % rate_out != 0)
        throw std::invalid_argument("rate_in must be a positive multiple of rate_out");
    size_t stride = static_cast<size_t>(rate_in / rate_out);
    std::vector<T> out;
    out.reserve(series.size() / stride);
    for (size_t i = stride - 1; i < series.size(); i += stride) out.push_back(series[i]);
    return out;
}

}  // namespace azil
