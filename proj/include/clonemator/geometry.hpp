#pragma once

#include <cmath>

namespace clonemator {

// Conventions: right-handed, +y up, ground plane y = 0, yaw is rotation about
// +y, a body's forward axis is local +z. Points transform as p' = R*p + t.

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    static constexpr Vec3 zero() { return {}; }
    static constexpr Vec3 unit_x() { return {1.0, 0.0, 0.0}; }
    static constexpr Vec3 unit_y() { return {0.0, 1.0, 0.0}; }
    static constexpr Vec3 unit_z() { return {0.0, 0.0, 1.0}; }

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    constexpr bool operator==(const Vec3&) const = default;

    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

double distance(const Vec3& a, const Vec3& b);
// Distance in the ground plane, ignoring y.
double horizontal_distance(const Vec3& a, const Vec3& b);

struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Quat() = default;
    constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    static constexpr Quat identity() { return {}; }
    static Quat from_axis_angle(const Vec3& axis, double radians);
    static Quat from_yaw_deg(double degrees);

    Quat operator*(const Quat& o) const;  // Hamilton product, renormalized
    constexpr bool operator==(const Quat&) const = default;

    constexpr Quat conjugate() const { return {w, -x, -y, -z}; }
    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const;
    Vec3 rotate(const Vec3& v) const;

    // Heading about +y in degrees, range (-180, 180]. Pitch and roll are ignored.
    double yaw_deg() const;
    Quat yaw_only() const { return from_yaw_deg(yaw_deg()); }
    bool finite() const {
        return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

Quat slerp(const Quat& a, const Quat& b, double u);
// Angle of the relative rotation between a and b, sign-insensitive.
double angle_between(const Quat& a, const Quat& b);

struct Pose {
    Vec3 position;
    Quat orientation;

    constexpr bool operator==(const Pose&) const = default;
};

struct RigidTransform {
    Vec3 translation;
    Quat rotation;

    static constexpr RigidTransform identity() { return {}; }
    static RigidTransform translate(const Vec3& t) { return {t, Quat::identity()}; }
    static RigidTransform yaw_deg(double degrees) { return {Vec3::zero(), Quat::from_yaw_deg(degrees)}; }
    // Rotation by yaw followed by translation: p' = R_yaw * p + t.
    static RigidTransform from_yaw(const Vec3& t, double degrees) { return {t, Quat::from_yaw_deg(degrees)}; }

    Vec3 apply_point(const Vec3& p) const { return rotation.rotate(p) + translation; }
    constexpr bool operator==(const RigidTransform&) const = default;
};

inline RigidTransform to_transform(const Pose& p) { return {p.position, p.orientation}; }
inline Pose to_pose(const RigidTransform& t) { return {t.translation, t.rotation}; }

// (a ∘ b)(p) = a(b(p))
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& a);
Pose apply(const RigidTransform& a, const Pose& p);

// Position plus heading; used wherever a prop or body acts as a frame.
RigidTransform yaw_frame(const Pose& p);
RigidTransform yaw_frame(const RigidTransform& t);

// Reflection plane: the vertical plane x = 0 of the anchor's local frame.
struct MirrorPlane {
    RigidTransform anchor;
};

Pose mirror_pose(const Pose& p, const MirrorPlane& plane);

inline constexpr double kMinScale = 0.1;
inline constexpr double kMaxScale = 10.0;

// Throws EngineError(ScaleOutOfRange) when s is outside [0.1, 10].
Pose scale_position_about(const Pose& p, const RigidTransform& anchor, double s);

Pose interp_pose(const Pose& a, const Pose& b, double u);

// x and z rounded to the nearest multiple of cell (ties toward +inf); y kept.
Vec3 snap_to_grid(const Vec3& p, double cell);

// Approximate comparisons used by tests and scenario assertions.
bool approx_equal(const Vec3& a, const Vec3& b, double tol);
bool approx_equal(const Quat& a, const Quat& b, double tol);  // q and -q compare equal
bool approx_equal(const Pose& a, const Pose& b, double tol);
bool approx_equal(const RigidTransform& a, const RigidTransform& b, double tol);

// Largest component-wise deviation, sign-insensitive for the rotation part.
double max_deviation(const Pose& a, const Pose& b);

}  // namespace clonemator
