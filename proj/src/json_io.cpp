#include "clonemator/json_io.hpp"

#include <cmath>

#include "clonemator/error.hpp"

namespace clonemator {

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
    throw EngineError(ErrorCode::ParseError, path + ": " + what);
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        parse_fail(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        parse_fail(path, "number must be finite");
    }
    return v;
}

std::array<double, 4> canonical_quat(const Quat& q, Precision p) {
    std::array<double, 4> c{quantize(q.w, p), quantize(q.x, p), quantize(q.y, p), quantize(q.z, p)};
    if (p == Precision::Exact) {
        return c;
    }
    // q and -q are the same rotation; keep the first non-zero component positive.
    for (double v : c) {
        if (v > 0.0) {
            break;
        }
        if (v < 0.0) {
            for (double& x : c) {
                x = x == 0.0 ? 0.0 : -x;
            }
            break;
        }
    }
    return c;
}

}  // namespace

double quantize(double v, Precision p) {
    double step = 0.0;
    switch (p) {
        case Precision::Exact: return v;
        case Precision::Hash: step = 1e6; break;
        case Precision::Wire: step = 1e4; break;
    }
    const double r = std::round(v * step) / step;
    return r == 0.0 ? 0.0 : r;
}

json vec3_json(const Vec3& v, Precision p) {
    return json::array({quantize(v.x, p), quantize(v.y, p), quantize(v.z, p)});
}

json quat_json(const Quat& q, Precision p) {
    const auto c = canonical_quat(q, p);
    return json::array({c[0], c[1], c[2], c[3]});
}

json pose_json(const Pose& pose, Precision p) {
    return json{{"p", vec3_json(pose.position, p)}, {"q", quat_json(pose.orientation, p)}};
}

json transform_json(const RigidTransform& t, Precision p) {
    return json{{"t", vec3_json(t.translation, p)}, {"q", quat_json(t.rotation, p)}};
}

json body_json(const BodyFrame& b, Precision p) {
    return json{{"head", pose_json(b.head, p)},
                {"left_hand", pose_json(b.left_hand, p)},
                {"right_hand", pose_json(b.right_hand, p)},
                {"left_grab", b.left_grab},
                {"right_grab", b.right_grab}};
}

Vec3 vec3_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) {
        parse_fail(path, "expected [x, y, z]");
    }
    return {as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]"), as_number(j[2], path + "[2]")};
}

Quat quat_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 4) {
        parse_fail(path, "expected [w, x, y, z]");
    }
    Quat q{as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]"), as_number(j[2], path + "[2]"),
           as_number(j[3], path + "[3]")};
    if (q.norm() < 1e-12) {
        parse_fail(path, "quaternion must be non-zero");
    }
    return q.normalized();
}

Pose pose_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"p", "q", "yaw"}, path);
    Pose pose;
    pose.position = vec3_from_json(require(j, "p", path), path + ".p");
    if (j.contains("q") && j.contains("yaw")) {
        parse_fail(path, "give either q or yaw, not both");
    }
    if (j.contains("q")) {
        pose.orientation = quat_from_json(j["q"], path + ".q");
    } else if (j.contains("yaw")) {
        pose.orientation = Quat::from_yaw_deg(as_number(j["yaw"], path + ".yaw"));
    }
    return pose;
}

RigidTransform transform_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"t", "q", "yaw"}, path);
    RigidTransform t;
    if (j.contains("t")) {
        t.translation = vec3_from_json(j["t"], path + ".t");
    }
    if (j.contains("q") && j.contains("yaw")) {
        parse_fail(path, "give either q or yaw, not both");
    }
    if (j.contains("q")) {
        t.rotation = quat_from_json(j["q"], path + ".q");
    } else if (j.contains("yaw")) {
        t.rotation = Quat::from_yaw_deg(as_number(j["yaw"], path + ".yaw"));
    }
    return t;
}

BodyFrame body_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"head", "left_hand", "right_hand", "left_grab", "right_grab"}, path);
    BodyFrame b;
    b.head = pose_from_json(require(j, "head", path), path + ".head");
    b.left_hand = pose_from_json(require(j, "left_hand", path), path + ".left_hand");
    b.right_hand = pose_from_json(require(j, "right_hand", path), path + ".right_hand");
    b.left_grab = bool_or(j, "left_grab", false, path);
    b.right_grab = bool_or(j, "right_grab", false, path);
    return b;
}

std::string_view hand_name(Hand h) { return h == Hand::Left ? "left" : "right"; }

Hand hand_from_json(const json& j, const std::string& path) {
    if (j == "left") {
        return Hand::Left;
    }
    if (j == "right") {
        return Hand::Right;
    }
    parse_fail(path, "expected \"left\" or \"right\"");
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        parse_fail(path, "expected an object");
    }
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& path) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            parse_fail(path + "." + key, "unknown field");
        }
    }
}

const json& require(const json& j, std::string_view key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) {
        parse_fail(path + "." + std::string(key), "missing required field");
    }
    return *it;
}

double number_at(const json& j, std::string_view key, const std::string& path) {
    return as_number(require(j, key, path), path + "." + std::string(key));
}

double number_or(const json& j, std::string_view key, double fallback, const std::string& path) {
    auto it = j.find(key);
    return it == j.end() ? fallback : as_number(*it, path + "." + std::string(key));
}

bool bool_or(const json& j, std::string_view key, bool fallback, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        parse_fail(path + "." + std::string(key), "expected a boolean");
    }
    return it->get<bool>();
}

std::string string_at(const json& j, std::string_view key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_string()) {
        parse_fail(path + "." + std::string(key), "expected a string");
    }
    return v.get<std::string>();
}

}  // namespace clonemator
