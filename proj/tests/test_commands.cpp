#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "clonemator/commands.hpp"
#include "clonemator/error.hpp"
#include "support.hpp"

using namespace clonemator;
using namespace clonemator::testing;

namespace {

std::vector<json> samples() {
    return {
        {{"op", "spawn_direct"}},
        {{"op", "spawn_indirect"}, {"target", {{"p", {1, 0, 2}}, {"yaw", 90}}}, {"snap", "grid"}, {"scale", 2.0}},
        {{"op", "spawn_auto"}, {"selected", 4}},
        {{"op", "spawn_relative"}, {"reference", 4}, {"target", 5}},
        {{"op", "set_mode"}, {"clone", 7}, {"mode", "replayed"}, {"recording", 1}, {"phase", 0.5}},
        {{"op", "set_mirror"}, {"clone", 7}, {"on", true}},
        {{"op", "set_scale"}, {"clone", 7}, {"scale", 3.0}},
        {{"op", "switch_control"}, {"target", 7}},
        {{"op", "set_group"}, {"members", {7, 8}}},
        {{"op", "move"}, {"target", 7}, {"new_root", {{"t", {1, 0, 1}}, {"yaw", 45}}}},
        {{"op", "duplicate"}, {"group", 2}, {"placement", {{"t", {5, 0, 0}}}}},
        {{"op", "remove_clone"}, {"target", 7}},
        {{"op", "undo"}},
        {{"op", "avatar_locomote"}, {"kind", "rotate"}, {"yaw_delta", 90}},
        {{"op", "step_onto"}, {"target", 7}},
        {{"op", "start_recording"}, {"scope", "extended"}},
        {{"op", "stop_recording"}},
        {{"op", "apply_recording"}, {"recording", 1}, {"target", {{"group", 2}, {"delta", 0.5}}}},
    };
}

ErrorCode parse_code(const json& j) {
    try {
        command_from_json(j, numeric_ids());
    } catch (const EngineError& e) {
        return e.code();
    }
    FAIL("expected a parse failure");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("every op parses and round-trips") {
    std::set<std::string> seen;
    for (const json& j : samples()) {
        const EngineCommand c = command_from_json(j, numeric_ids());
        seen.insert(std::string(command_name(c)));
        CHECK(command_name(c) == j["op"].get<std::string>());
        const json back = command_to_json(c);
        CHECK(command_to_json(command_from_json(back, numeric_ids())) == back);
    }
    const auto& names = command_names();
    CHECK(std::set<std::string>(names.begin(), names.end()) == seen);
}

TEST_CASE("apply_recording targets") {
    const auto self = command_from_json({{"op", "apply_recording"}, {"recording", 1}, {"target", "self"}}, numeric_ids());
    CHECK(std::holds_alternative<ApplyToSelf>(std::get<cmd::ApplyRecording>(self).target));
    const auto clone =
        command_from_json({{"op", "apply_recording"}, {"recording", 1}, {"target", {{"clone", 9}}}}, numeric_ids());
    CHECK(std::get<ApplyToClone>(std::get<cmd::ApplyRecording>(clone).target).clone == EntityId{9});
}

TEST_CASE("malformed commands name the failing field") {
    CHECK(parse_code({{"op", "fly"}}) == ErrorCode::ParseError);
    CHECK(parse_code({{"op", "spawn_auto"}}) == ErrorCode::ParseError);
    CHECK(parse_code({{"op", "set_mirror"}, {"clone", 1}, {"on", true}, {"extra", 1}}) == ErrorCode::ParseError);
    CHECK(parse_code(json::array()) == ErrorCode::ParseError);
    try {
        command_from_json({{"op", "spawn_indirect"}, {"target", {{"p", {1, "x", 0}}}}}, numeric_ids());
        FAIL("expected a parse failure");
    } catch (const EngineError& e) {
        CHECK(e.detail().find("target") != std::string::npos);
    }
}

TEST_CASE("root-relative conversion is reversible and moves spatial arguments only") {
    Rng rng(51);
    for (int i = 0; i < 100; ++i) {
        const RigidTransform root = random_yaw_transform(rng);
        const EngineCommand c = cmd::SpawnIndirect{{random_ground(rng, 5.0), Quat::from_yaw_deg(rng.uniform(-180, 180))},
                                                   SnapChoice::None, 1.0};
        const EngineCommand rel = to_root_relative(c, root);
        const auto back = std::get<cmd::SpawnIndirect>(from_root_relative(rel, root));
        CHECK(approx_equal(back.target, std::get<cmd::SpawnIndirect>(c).target, 1e-9));
    }
    const EngineCommand sel = cmd::SpawnAuto{EntityId{3}};
    CHECK(command_to_json(to_root_relative(sel, RigidTransform::translate({1, 2, 3}))) == command_to_json(sel));
}

TEST_CASE("visit_ids walks every id slot in order") {
    EngineCommand c = cmd::SetGroup{{EntityId{4}, EntityId{2}, EntityId{9}}};
    std::vector<std::uint64_t> ids;
    visit_ids(c, [&](auto& id) { ids.push_back(id.value); });
    CHECK(ids == std::vector<std::uint64_t>{4, 2, 9});
}

TEST_CASE("the published schema lists exactly the engine's commands") {
    std::ifstream in(std::filesystem::path(CLONEMATOR_SCHEMA_DIR) / "scenario.schema.json");
    REQUIRE(in);
    const json schema = json::parse(in);
    std::set<std::string> ops;
    for (const auto& alt : schema["$defs"]["command"]["oneOf"]) {
        ops.insert(alt["properties"]["op"]["const"].get<std::string>());
    }
    const auto& names = command_names();
    CHECK(ops == std::set<std::string>(names.begin(), names.end()));
}
