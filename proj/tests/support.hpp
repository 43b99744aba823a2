#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "clonemator/geometry.hpp"
#include "clonemator/world.hpp"

namespace clonemator::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g_); }
    bool coin() { return integer(0, 1) == 1; }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(g_); }

private:
    std::mt19937_64 g_;
};

inline Vec3 random_vec(Rng& r, double extent) {
    return {r.uniform(-extent, extent), r.uniform(-extent, extent), r.uniform(-extent, extent)};
}

inline Vec3 random_ground(Rng& r, double extent) { return {r.uniform(-extent, extent), 0.0, r.uniform(-extent, extent)}; }

inline Quat random_quat(Rng& r) {
    Quat q{r.normal(), r.normal(), r.normal(), r.normal()};
    return q.normalized();
}

inline RigidTransform random_transform(Rng& r, double extent = 10.0) { return {random_vec(r, extent), random_quat(r)}; }

inline RigidTransform random_yaw_transform(Rng& r, double extent = 10.0) {
    return RigidTransform::from_yaw(random_ground(r, extent), r.uniform(-180.0, 180.0));
}

inline Pose random_pose(Rng& r, double extent = 10.0) { return {random_vec(r, extent), random_quat(r)}; }

// Root-local tracked body within arm's reach of a standing head.
inline BodyFrame random_local_body(Rng& r) {
    BodyFrame b;
    b.head = {{r.uniform(-0.2, 0.2), r.uniform(1.4, 1.7), r.uniform(-0.2, 0.2)}, Quat::from_yaw_deg(r.uniform(-60, 60))};
    b.left_hand = {b.head.position + Vec3{r.uniform(0.0, 0.5), r.uniform(-0.7, 0.3), r.uniform(-0.2, 0.5)},
                   random_quat(r)};
    b.right_hand = {b.head.position + Vec3{r.uniform(-0.5, 0.0), r.uniform(-0.7, 0.3), r.uniform(-0.2, 0.5)},
                    random_quat(r)};
    return b;
}

// Independent rotation oracle: row-major 3x3 matrices.
struct Mat3 {
    double m[3][3]{};

    static Mat3 yaw(double degrees) {
        const double t = degrees * std::numbers::pi / 180.0;
        const double c = std::cos(t);
        const double s = std::sin(t);
        return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
    }
    static Mat3 diag(double a, double b, double c) { return {{{a, 0, 0}, {0, b, 0}, {0, 0, c}}}; }
    static Mat3 from_quat(const Quat& q) {
        const double w = q.w, x = q.x, y = q.y, z = q.z;
        return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                 {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                 {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                for (int k = 0; k < 3; ++k) {
                    r.m[i][j] += m[i][k] * o.m[k][j];
                }
            }
        }
        return r;
    }
    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 transpose() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r.m[i][j] = m[j][i];
            }
        }
        return r;
    }
    double max_diff(const Mat3& o) const {
        double d = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                d = std::max(d, std::abs(m[i][j] - o.m[i][j]));
            }
        }
        return d;
    }
};

// Homogeneous rigid map evaluated with the matrix oracle.
struct MatTransform {
    Mat3 r;
    Vec3 t;

    static MatTransform of(const RigidTransform& x) { return {Mat3::from_quat(x.rotation), x.translation}; }
    MatTransform operator*(const MatTransform& o) const { return {r * o.r, r * o.t + t}; }
    MatTransform inverse() const {
        const Mat3 rt = r.transpose();
        return {rt, -(rt * t)};
    }
    Vec3 apply(const Vec3& p) const { return r * p + t; }
};

inline bool matches(const RigidTransform& x, const MatTransform& o, double tol) {
    const MatTransform m = MatTransform::of(x);
    return m.r.max_diff(o.r) <= tol && approx_equal(m.t, o.t, tol);
}

}  // namespace clonemator::testing
