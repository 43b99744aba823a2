#include <doctest.h>

#include <fstream>

#include "clonemator/scenario.hpp"

using namespace clonemator;

namespace {

const std::filesystem::path kDir = CLONEMATOR_SCENARIO_DIR;

json minimal() { return {{"version", "clonemator-scenario/1"}, {"name", "tiny"}, {"ticks", 1}}; }

ErrorCode load_code(const json& doc, std::string* detail = nullptr) {
    try {
        load_scenario(doc);
    } catch (const EngineError& e) {
        if (detail) {
            *detail = e.detail();
        }
        return e.code();
    }
    FAIL("expected a load failure");
    return ErrorCode::InvalidArgument;
}

json peg_world(double depth) {
    json doc = minimal();
    doc["ticks"] = 3;
    doc["objects"] = json::array({{{"name", "peg"}, {"tag", "peg"}, {"pose", {{"p", {0, 0, 1}}}}, {"scalar_state", {{"depth", depth}}}}});
    return doc;
}

}  // namespace

TEST_CASE("a minimal document loads and runs") {
    const ScenarioScript s = load_scenario(minimal());
    CHECK(s.ticks == 1);
    const RunReport r = run_scenario(s);
    CHECK(r.passed);
    CHECK(r.ticks_executed == 1);
}

TEST_CASE("loader rejections") {
    json unsorted = minimal();
    unsorted["ticks"] = 10;
    unsorted["timeline"] = json::array({{{"tick", 5}, {"command", {{"op", "spawn_direct"}}}},
                                        {{"tick", 2}, {"command", {{"op", "spawn_direct"}}}}});
    CHECK(load_code(unsorted) == ErrorCode::ValidationError);

    json kind = minimal();
    kind["assertions"] = json::array({{{"tick", 0}, {"kind", "vibes_ok"}}});
    std::string detail;
    CHECK(load_code(kind, &detail) == ErrorCode::ParseError);
    CHECK(detail.find("kind") != std::string::npos);

    json extra = minimal();
    extra["colour"] = "red";
    CHECK(load_code(extra) == ErrorCode::ParseError);

    json version = minimal();
    version["version"] = "clonemator-scenario/0";
    CHECK(load_code(version) != ErrorCode::InvalidArgument);

    json unresolved = minimal();
    unresolved["ticks"] = 10;
    unresolved["timeline"] = json::array({{{"tick", 1}, {"command", {{"op", "remove_clone"}, {"target", "ghost"}}}}});
    CHECK(load_code(unresolved) == ErrorCode::UnresolvedName);

    json late = minimal();
    late["timeline"] = json::array({{{"tick", 1}, {"command", {{"op", "undo"}}}}});
    CHECK(load_code(late) == ErrorCode::ValidationError);
}

TEST_CASE("scalar assertion reports the measured value on failure") {
    json doc = peg_world(0.1);
    doc["assertions"] = json::array({{{"tick", 1}, {"kind", "scalar_state_at_least"}, {"entity", "peg"}, {"key", "depth"}, {"min", 0.2}}});
    const RunReport r = run_scenario(load_scenario(doc));
    CHECK_FALSE(r.passed);
    REQUIRE(r.assertions.size() == 1);
    CHECK(r.assertions[0].measured.dump() == json::array({0.1}).dump());
}

TEST_CASE("hash assertion against a stored golden value") {
    json doc = peg_world(0.0);
    const std::string h = run_scenario(load_scenario(doc)).final_hash;
    doc["assertions"] = json::array({{{"tick", 2}, {"kind", "hash_equals"}, {"expected", h}}});
    CHECK(run_scenario(load_scenario(doc)).passed);
    doc["assertions"][0]["expected"] = std::string(64, '0');
    CHECK_FALSE(run_scenario(load_scenario(doc)).passed);
}

TEST_CASE("grouped clones keep their relative transform through a move") {
    json doc = minimal();
    doc["ticks"] = 10;
    const auto at = [](int tick, json command) { return json{{"tick", tick}, {"command", std::move(command)}}; };
    json a = at(1, {{"op", "spawn_indirect"}, {"target", {{"p", {1, 0, 1}}, {"yaw", 30}}}});
    a["bind"] = "a";
    json b = at(1, {{"op", "spawn_indirect"}, {"target", {{"p", {3, 0, 2}}, {"yaw", -40}}}});
    b["bind"] = "b";
    doc["timeline"] = json::array({a, b, at(2, {{"op", "set_group"}, {"members", {"a", "b"}}}),
                                   at(5, {{"op", "move"}, {"target", "b"}, {"new_root", {{"t", {-4, 0, 6}}, {"yaw", 100}}}})});
    doc["assertions"] = json::array({
        {{"tick", 3}, {"kind", "relative_transform_equals"}, {"a", "a"}, {"b", "b"}, {"capture_as", "rel"}},
        {{"tick", 6}, {"kind", "relative_transform_equals"}, {"a", "a"}, {"b", "b"}, {"expected_capture", "rel"}, {"tolerance", 1e-6}},
        {{"tick", 6}, {"kind", "entity_count"}, {"what", "groups"}, {"expected", 1}},
    });
    const RunReport r = run_scenario(load_scenario(doc));
    CHECK(r.passed);
}

TEST_CASE("failed commands abort the run with the tick and op") {
    json doc = minimal();
    doc["ticks"] = 5;
    doc["timeline"] = json::array({{{"tick", 2}, {"command", {{"op", "undo"}}}}});
    doc["assertions"] = json::array({{{"tick", 4}, {"kind", "entity_count"}, {"what", "clones"}, {"expected", 0}}});
    const RunReport r = run_scenario(load_scenario(doc));
    CHECK_FALSE(r.passed);
    REQUIRE(r.error.has_value());
    CHECK(r.error->tick == 2);
    CHECK(r.error->command == "undo");
    CHECK(r.error->code == "EmptyUndoStack");
    CHECK(r.assertions[0].detail == "not evaluated");
}

TEST_CASE("hammering: all pegs reach 0.2 m on the same tick") {
    const ScenarioScript s = load_scenario_file(kDir / "hammering.json");
    const RunReport r = run_scenario(s);
    CHECK(r.passed);
    bool found = false;
    for (const auto& a : r.assertions) {
        if (a.kind == "scalar_state_at_least") {
            found = true;
            CHECK(a.passed);
        }
    }
    CHECK(found);
}

TEST_CASE("teleport automator ends with no clones and a displaced avatar") {
    const RunReport r = run_scenario(load_scenario_file(kDir / "teleport_automator.json"));
    CHECK(r.passed);
}

TEST_CASE("bundled scenarios run identically twice and match their golden hashes") {
    std::ifstream in(kDir / "golden_hashes.json");
    REQUIRE(in);
    const json golden = json::parse(in);
    const auto files = list_scenarios(kDir);
    CHECK(files.size() == golden.size());
    for (const auto& f : files) {
        const ScenarioScript s = load_scenario_file(f);
        const RunReport a = run_scenario(s);
        const RunReport b = run_scenario(s);
        CHECK_MESSAGE(a.passed, f.filename().string());
        CHECK(report_to_json(a).dump() == report_to_json(b).dump());
        CHECK(a.final_hash == golden.value(f.filename().string(), std::string()));
    }
}

TEST_CASE("reports omit timing unless asked") {
    const RunReport r = run_scenario(load_scenario(minimal()));
    CHECK_FALSE(report_to_json(r).contains("wall_clock_ms"));
    CHECK(report_to_json(r, true).contains("wall_clock_ms"));
}
