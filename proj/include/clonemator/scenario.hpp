#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clonemator/engine.hpp"

namespace clonemator {

inline constexpr const char* kScenarioVersion = "clonemator-scenario/1";

// Entity reference as written in a scenario: an object name, a bound result
// ("c", "c[2]"), "$avatar", "$original", or a raw integer id.
using NameRef = json;

struct ObjectSpec {
    std::string name;
    std::string tag;
    Pose pose;
    bool grabbable = false;
    std::map<std::string, double> scalar_state;
};

// Missing fields carry over from the previous keyframe.
struct InputKeyframe {
    std::optional<Pose> head;
    std::optional<Pose> left_hand;
    std::optional<Pose> right_hand;
    std::optional<bool> left_grab;
    std::optional<bool> right_grab;
};

struct CommandStep {
    json command;
    std::optional<std::string> bind;
};

struct TimedStep {
    std::uint64_t tick = 0;
    std::variant<InputKeyframe, CommandStep> action;
};

struct PoseEqualsSpec {
    NameRef entity;
    std::string joint = "pose";  // pose (objects), root, head, left_hand, right_hand
    bool root_frame = false;     // measure relative to the body's own root
    bool position_only = false;
    Pose expected;
    double tolerance = 1e-6;
};

struct RelativeTransformSpec {
    NameRef a;
    NameRef b;
    std::optional<RigidTransform> expected;
    std::optional<std::string> expected_capture;
    std::optional<std::string> capture_as;
    bool position_only = false;
    double tolerance = 1e-6;
};

struct ScalarAtLeastSpec {
    std::vector<NameRef> entities;
    std::string key;
    double min = 0.0;
    double tolerance = 1e-9;
};

struct EntityCountSpec {
    std::string what = "clones";  // clones, objects, groups, bodies
    std::optional<std::string> tag;
    std::optional<std::pair<Vec3, Vec3>> region;
    std::optional<NameRef> held_by;
    std::optional<std::int64_t> expected;
    std::optional<std::int64_t> min;
};

struct HashEqualsSpec {
    std::optional<std::string> expected;
    std::optional<std::string> expected_capture;
    std::optional<std::string> capture_as;
};

struct EventCountSpec {
    std::string rule;
    std::optional<NameRef> actor;
    std::optional<NameRef> target;
    bool this_tick_only = false;  // window "tick" vs "cumulative"
    std::uint64_t from_tick = 0;
    std::optional<std::int64_t> expected;
    std::optional<std::int64_t> min;
};

using AssertionBody = std::variant<PoseEqualsSpec, RelativeTransformSpec, ScalarAtLeastSpec, EntityCountSpec,
                                   HashEqualsSpec, EventCountSpec>;

struct AssertionSpec {
    std::uint64_t tick = 0;
    std::optional<std::string> label;
    AssertionBody body;
};

std::string_view assertion_kind(const AssertionBody& b);

struct RecordingFixture {
    std::string name;
    Recording recording;
};

struct ScenarioScript {
    std::string name;
    std::string description;
    WorldConfig config;
    std::uint64_t ticks = 1;
    RigidTransform avatar_root;
    BodyFrame avatar_body;  // root-local starting input
    std::vector<ObjectSpec> objects;
    std::vector<ContactRule> contact_rules;
    std::vector<RecordingFixture> recordings;
    std::vector<TimedStep> timeline;
    std::vector<AssertionSpec> assertions;
};

// Strict: unknown fields raise ParseError naming the path; inconsistent
// content raises ValidationError or UnresolvedName.
ScenarioScript load_scenario(const json& doc);
ScenarioScript load_scenario_file(const std::filesystem::path& path);

struct AssertionResult {
    std::size_t index = 0;
    std::uint64_t tick = 0;
    std::string kind;
    std::optional<std::string> label;
    bool passed = false;
    json measured;
    json expected;
    std::string detail;
};

struct RunError {
    std::uint64_t tick = 0;
    std::string command;
    std::string code;
    std::string detail;
};

struct RunReport {
    std::string scenario;
    std::uint64_t ticks_executed = 0;
    bool passed = false;
    std::vector<AssertionResult> assertions;
    std::string final_hash;
    std::optional<RunError> error;
    double wall_clock_ms = 0.0;
};

// Wall-clock time is left out unless asked for, so equal runs give equal bytes.
json report_to_json(const RunReport& r, bool include_timing = false);

// Name bindings and observations of one run, available to assertions.
class RunContext {
public:
    explicit RunContext(Engine& engine) : engine_(engine) {}

    Engine& engine() { return engine_; }
    const Engine& engine() const { return engine_; }

    void bind_object(const std::string& name, EntityId id) { objects_[name] = id; }
    void bind_result(const std::string& name, const CommandResult& r) { results_[name] = r; }
    void record_contacts(const std::vector<ContactEvent>& events);

    EntityId entity(const NameRef& ref, const std::string& path) const;
    GroupId group(const NameRef& ref, const std::string& path) const;
    RecordingId recording(const NameRef& ref, const std::string& path) const;
    IdResolver resolver() const;

    const std::vector<ContactEvent>& contacts() const { return contacts_; }
    std::map<std::string, json>& captures() { return captures_; }

private:
    Engine& engine_;
    std::map<std::string, EntityId> objects_;
    std::map<std::string, CommandResult> results_;
    std::vector<ContactEvent> contacts_;
    std::map<std::string, json> captures_;
};

AssertionResult check_assertion(const AssertionSpec& a, RunContext& ctx);

// Applies the scenario's avatar, objects, contact rules and recording fixtures
// to a fresh engine built from s.config. Names are bound in ctx when given.
Engine build_engine(const ScenarioScript& s, RunContext* ctx = nullptr);

RunReport run_scenario(const ScenarioScript& s);

// Scenario files (*.json) in a directory, sorted by file name.
std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir);

}  // namespace clonemator
