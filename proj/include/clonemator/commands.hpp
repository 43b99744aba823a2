#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clonemator/json_io.hpp"
#include "clonemator/world.hpp"

namespace clonemator {

enum class SnapChoice { None, Grid, NearestObject };
enum class RecordingScope { PosesAndGrabs, Extended };
enum class ModeKind { Static, Synchronous, Replayed };

struct ModeRequest {
    ModeKind kind = ModeKind::Static;
    RecordingId recording;  // Replayed only
    double phase = 0.0;     // Replayed only, seconds of delay
};

struct ApplyToClone {
    EntityId clone;
};
struct ApplyToGroup {
    GroupId group;
    double delta = 0.0;  // seconds of extra delay per member
};
struct ApplyToSelf {};
using ApplyTarget = std::variant<ApplyToClone, ApplyToGroup, ApplyToSelf>;

struct Teleport {
    Vec3 to;
};
struct Rotate {
    double yaw_delta_deg = 0.0;
};
using Locomotion = std::variant<Teleport, Rotate>;

// Viewpoint handoff emitted by switch_control; clients animate it, the engine does not.
struct SwitchTransition {
    EntityId from_body;
    EntityId to_body;
    Pose from;
    Pose to;
    double duration = 0.3;
};

namespace cmd {

struct SpawnDirect {};
struct SpawnIndirect {
    Pose target;
    SnapChoice snap = SnapChoice::None;
    double scale = 1.0;
};
struct SpawnAuto {
    EntityId selected;
};
struct SpawnRelative {
    EntityId reference;
    EntityId target;
};
struct SetMode {
    EntityId clone;
    ModeRequest mode;
};
struct SetMirror {
    EntityId clone;
    bool on = false;
};
struct SetScale {
    EntityId clone;
    double scale = 1.0;
};
struct SwitchControl {
    EntityId target;
};
struct SetGroup {
    std::vector<EntityId> members;
};
struct Move {
    EntityId target;
    RigidTransform new_root;
};
struct Duplicate {
    std::variant<EntityId, GroupId> target;
    RigidTransform placement;
};
struct RemoveClone {
    EntityId target;
};
struct Undo {};
struct AvatarLocomote {
    Locomotion kind;
};
struct StepOnto {
    EntityId target;
};
struct StartRecording {
    RecordingScope scope = RecordingScope::PosesAndGrabs;
};
struct StopRecording {};
struct ApplyRecording {
    RecordingId recording;
    ApplyTarget target;
};

}  // namespace cmd

using EngineCommand =
    std::variant<cmd::SpawnDirect, cmd::SpawnIndirect, cmd::SpawnAuto, cmd::SpawnRelative, cmd::SetMode,
                 cmd::SetMirror, cmd::SetScale, cmd::SwitchControl, cmd::SetGroup, cmd::Move, cmd::Duplicate,
                 cmd::RemoveClone, cmd::Undo, cmd::AvatarLocomote, cmd::StepOnto, cmd::StartRecording,
                 cmd::StopRecording, cmd::ApplyRecording>;

struct CommandResult {
    std::vector<EntityId> entities;
    std::optional<GroupId> group;
    std::optional<RecordingId> recording;
    std::optional<SwitchTransition> transition;
};

std::string_view command_name(const EngineCommand& c);
// Every op name accepted by command_from_json, in declaration order.
const std::vector<std::string>& command_names();

// Visits every entity and group id field in a fixed order. The visitor is
// called with EntityId& or GroupId&.
template <typename F>
void visit_ids(EngineCommand& c, F&& f);

// Spatial arguments re-expressed relative to / from an avatar root.
EngineCommand to_root_relative(const EngineCommand& c, const RigidTransform& root);
EngineCommand from_root_relative(const EngineCommand& c, const RigidTransform& root);

// Resolves an entity/group reference field. The default accepts integer ids only.
struct IdResolver {
    std::function<EntityId(const json&, const std::string&)> entity;
    std::function<GroupId(const json&, const std::string&)> group;
    std::function<RecordingId(const json&, const std::string&)> recording;
};
IdResolver numeric_ids();

std::string_view scope_name(RecordingScope s);

json command_to_json(const EngineCommand& c);
// Throws EngineError(ParseError) with the field path on malformed input.
EngineCommand command_from_json(const json& j, const IdResolver& ids, const std::string& path = "command");

json result_to_json(const CommandResult& r);
json transition_json(const SwitchTransition& t, Precision p = Precision::Exact);

// ---------------------------------------------------------------------------

template <typename F>
void visit_ids(EngineCommand& c, F&& f) {
    std::visit(
        [&f](auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SpawnAuto>) {
                f(x.selected);
            } else if constexpr (std::is_same_v<T, cmd::SpawnRelative>) {
                f(x.reference);
                f(x.target);
            } else if constexpr (std::is_same_v<T, cmd::SetMode> || std::is_same_v<T, cmd::SetMirror> ||
                                 std::is_same_v<T, cmd::SetScale>) {
                f(x.clone);
            } else if constexpr (std::is_same_v<T, cmd::SwitchControl> || std::is_same_v<T, cmd::Move> ||
                                 std::is_same_v<T, cmd::RemoveClone> || std::is_same_v<T, cmd::StepOnto>) {
                f(x.target);
            } else if constexpr (std::is_same_v<T, cmd::SetGroup>) {
                for (auto& m : x.members) {
                    f(m);
                }
            } else if constexpr (std::is_same_v<T, cmd::Duplicate>) {
                std::visit([&f](auto& id) { f(id); }, x.target);
            } else if constexpr (std::is_same_v<T, cmd::ApplyRecording>) {
                if (auto* c = std::get_if<ApplyToClone>(&x.target)) {
                    f(c->clone);
                } else if (auto* g = std::get_if<ApplyToGroup>(&x.target)) {
                    f(g->group);
                }
            }
        },
        c);
}

}  // namespace clonemator
