#include "clonemator/geometry.hpp"

#include <algorithm>
#include <numbers>

#include "clonemator/error.hpp"

namespace clonemator {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

double horizontal_distance(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.z - b.z);
}

Quat Quat::from_axis_angle(const Vec3& axis, double radians) {
    const double n = axis.norm();
    if (n == 0.0) {
        return identity();
    }
    const double s = std::sin(radians * 0.5) / n;
    return Quat{std::cos(radians * 0.5), axis.x * s, axis.y * s, axis.z * s}.normalized();
}

Quat Quat::from_yaw_deg(double degrees) {
    const double half = degrees * kDegToRad * 0.5;
    return {std::cos(half), 0.0, std::sin(half), 0.0};
}

Quat Quat::operator*(const Quat& o) const {
    Quat r{w * o.w - x * o.x - y * o.y - z * o.z,
           w * o.x + x * o.w + y * o.z - z * o.y,
           w * o.y - x * o.z + y * o.w + z * o.x,
           w * o.z + x * o.y - y * o.x + z * o.w};
    return r.normalized();
}

Quat Quat::normalized() const {
    const double n = norm();
    if (n == 0.0) {
        return identity();
    }
    return {w / n, x / n, y / n, z / n};
}

Vec3 Quat::rotate(const Vec3& v) const {
    // v' = v + 2w(u x v) + 2 u x (u x v), u = (x, y, z)
    const Vec3 u{x, y, z};
    const Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
}

double Quat::yaw_deg() const {
    // Heading of the rotated forward axis projected on the ground plane.
    const Vec3 f = rotate(Vec3::unit_z());
    if (std::abs(f.x) < 1e-12 && std::abs(f.z) < 1e-12) {
        // Forward points straight up or down; fall back to the rotated right axis.
        const Vec3 r = rotate(Vec3::unit_x());
        return std::atan2(-r.z, r.x) * kRadToDeg;
    }
    return std::atan2(f.x, f.z) * kRadToDeg;
}

Quat slerp(const Quat& a, const Quat& b, double u) {
    double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    Quat end = b;
    if (d < 0.0) {
        d = -d;
        end = {-b.w, -b.x, -b.y, -b.z};
    }
    if (d > 0.9995) {
        Quat r{a.w + (end.w - a.w) * u, a.x + (end.x - a.x) * u, a.y + (end.y - a.y) * u,
               a.z + (end.z - a.z) * u};
        return r.normalized();
    }
    const double theta = std::acos(std::clamp(d, -1.0, 1.0));
    const double s = std::sin(theta);
    const double ka = std::sin((1.0 - u) * theta) / s;
    const double kb = std::sin(u * theta) / s;
    return Quat{a.w * ka + end.w * kb, a.x * ka + end.x * kb, a.y * ka + end.y * kb,
                a.z * ka + end.z * kb}
        .normalized();
}

double angle_between(const Quat& a, const Quat& b) {
    const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
    return 2.0 * std::acos(std::clamp(d, 0.0, 1.0));
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation.rotate(b.translation) + a.translation, a.rotation * b.rotation};
}

RigidTransform inverse(const RigidTransform& a) {
    const Quat inv = a.rotation.conjugate().normalized();
    return {-inv.rotate(a.translation), inv};
}

Pose apply(const RigidTransform& a, const Pose& p) {
    return {a.rotation.rotate(p.position) + a.translation, a.rotation * p.orientation};
}

RigidTransform yaw_frame(const Pose& p) { return {p.position, p.orientation.yaw_only()}; }

RigidTransform yaw_frame(const RigidTransform& t) { return {t.translation, t.rotation.yaw_only()}; }

Pose mirror_pose(const Pose& p, const MirrorPlane& plane) {
    const Pose local = apply(inverse(plane.anchor), p);
    const Pose reflected{
        {-local.position.x, local.position.y, local.position.z},
        Quat{local.orientation.w, local.orientation.x, -local.orientation.y, -local.orientation.z}
            .normalized()};
    return apply(plane.anchor, reflected);
}

Pose scale_position_about(const Pose& p, const RigidTransform& anchor, double s) {
    if (!(s >= kMinScale && s <= kMaxScale)) {
        throw EngineError(ErrorCode::ScaleOutOfRange, "scale " + std::to_string(s) + " outside [0.1, 10]");
    }
    if (s == 1.0) {
        return p;
    }
    const Vec3 local = inverse(anchor).apply_point(p.position);
    return {anchor.apply_point(local * s), p.orientation};
}

Pose interp_pose(const Pose& a, const Pose& b, double u) {
    if (u <= 0.0) {
        return a;
    }
    if (u >= 1.0) {
        return b;
    }
    return {a.position + (b.position - a.position) * u, slerp(a.orientation, b.orientation, u)};
}

Vec3 snap_to_grid(const Vec3& p, double cell) {
    if (!(cell > 0.0)) {
        throw EngineError(ErrorCode::InvalidArgument, "grid cell must be positive");
    }
    const auto snap = [cell](double v) {
        const double r = std::floor(v / cell + 0.5) * cell;
        return r == 0.0 ? 0.0 : r;  // drop negative zero
    };
    return {snap(p.x), p.y, snap(p.z)};
}

bool approx_equal(const Vec3& a, const Vec3& b, double tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol && std::abs(a.z - b.z) <= tol;
}

bool approx_equal(const Quat& a, const Quat& b, double tol) {
    const auto close = [tol](const Quat& p, const Quat& q, double sign) {
        return std::abs(p.w - sign * q.w) <= tol && std::abs(p.x - sign * q.x) <= tol &&
               std::abs(p.y - sign * q.y) <= tol && std::abs(p.z - sign * q.z) <= tol;
    };
    return close(a, b, 1.0) || close(a, b, -1.0);
}

bool approx_equal(const Pose& a, const Pose& b, double tol) {
    return approx_equal(a.position, b.position, tol) && approx_equal(a.orientation, b.orientation, tol);
}

bool approx_equal(const RigidTransform& a, const RigidTransform& b, double tol) {
    return approx_equal(a.translation, b.translation, tol) && approx_equal(a.rotation, b.rotation, tol);
}

double max_deviation(const Pose& a, const Pose& b) {
    double d = std::max({std::abs(a.position.x - b.position.x), std::abs(a.position.y - b.position.y),
                         std::abs(a.position.z - b.position.z)});
    const Quat& p = a.orientation;
    const Quat& q = b.orientation;
    const double same = std::max({std::abs(p.w - q.w), std::abs(p.x - q.x), std::abs(p.y - q.y), std::abs(p.z - q.z)});
    const double flip = std::max({std::abs(p.w + q.w), std::abs(p.x + q.x), std::abs(p.y + q.y), std::abs(p.z + q.z)});
    return std::max(d, std::min(same, flip));
}

}  // namespace clonemator
