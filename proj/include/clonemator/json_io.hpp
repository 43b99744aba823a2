#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "clonemator/geometry.hpp"
#include "clonemator/world.hpp"

namespace clonemator {

using json = nlohmann::json;

// Output precision for serialized scalars. Exact keeps full doubles; the
// quantized forms round to a fixed grid so equal states hash equally.
enum class Precision { Exact, Hash, Wire };

double quantize(double v, Precision p);

json vec3_json(const Vec3& v, Precision p = Precision::Exact);
json quat_json(const Quat& q, Precision p = Precision::Exact);
json pose_json(const Pose& pose, Precision p = Precision::Exact);
json transform_json(const RigidTransform& t, Precision p = Precision::Exact);
json body_json(const BodyFrame& b, Precision p = Precision::Exact);

// Readers throw EngineError(ParseError) naming the offending path.
Vec3 vec3_from_json(const json& j, const std::string& path);
Quat quat_from_json(const json& j, const std::string& path);
// Accepts {"p":[x,y,z]} with optional "q":[w,x,y,z] or "yaw":degrees.
Pose pose_from_json(const json& j, const std::string& path);
RigidTransform transform_from_json(const json& j, const std::string& path);
BodyFrame body_from_json(const json& j, const std::string& path);

std::string_view hand_name(Hand h);
Hand hand_from_json(const json& j, const std::string& path);

// Strict-schema helpers.
void require_object(const json& j, const std::string& path);
void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& path);
const json& require(const json& j, std::string_view key, const std::string& path);
double number_at(const json& j, std::string_view key, const std::string& path);
double number_or(const json& j, std::string_view key, double fallback, const std::string& path);
bool bool_or(const json& j, std::string_view key, bool fallback, const std::string& path);
std::string string_at(const json& j, std::string_view key, const std::string& path);

}  // namespace clonemator
