#include "clonemator/commands.hpp"

#include "clonemator/error.hpp"

namespace clonemator {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw EngineError(ErrorCode::ParseError, path + ": " + what);
}

std::uint64_t id_number(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() > 0)) {
        bad(path, "expected a positive integer id");
    }
    return j.get<std::uint64_t>();
}

std::string_view snap_name(SnapChoice s) {
    switch (s) {
        case SnapChoice::None: return "none";
        case SnapChoice::Grid: return "grid";
        case SnapChoice::NearestObject: return "nearest_object";
    }
    return "none";
}

std::string_view mode_kind_name(ModeKind k) {
    switch (k) {
        case ModeKind::Static: return "static";
        case ModeKind::Synchronous: return "synchronous";
        case ModeKind::Replayed: return "replayed";
    }
    return "static";
}

}  // namespace

std::string_view scope_name(RecordingScope s) {
    return s == RecordingScope::Extended ? "extended" : "poses_and_grabs";
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{
        "spawn_direct", "spawn_indirect", "spawn_auto", "spawn_relative", "set_mode",
        "set_mirror", "set_scale", "switch_control", "set_group", "move",
        "duplicate", "remove_clone", "undo", "avatar_locomote", "step_onto",
        "start_recording", "stop_recording", "apply_recording"};
    return names;
}

std::string_view command_name(const EngineCommand& c) { return command_names()[c.index()]; }

IdResolver numeric_ids() {
    IdResolver r;
    r.entity = [](const json& j, const std::string& path) { return EntityId{id_number(j, path)}; };
    r.group = [](const json& j, const std::string& path) { return GroupId{id_number(j, path)}; };
    r.recording = [](const json& j, const std::string& path) { return RecordingId{id_number(j, path)}; };
    return r;
}

EngineCommand to_root_relative(const EngineCommand& c, const RigidTransform& root) {
    const RigidTransform inv = inverse(root);
    EngineCommand out = c;
    std::visit(
        [&](auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SpawnIndirect>) {
                x.target = apply(inv, x.target);
            } else if constexpr (std::is_same_v<T, cmd::Move>) {
                x.new_root = compose(inv, x.new_root);
            } else if constexpr (std::is_same_v<T, cmd::Duplicate>) {
                x.placement = compose(inv, compose(x.placement, root));
            } else if constexpr (std::is_same_v<T, cmd::AvatarLocomote>) {
                if (auto* t = std::get_if<Teleport>(&x.kind)) {
                    t->to = inv.apply_point(t->to);
                }
            }
        },
        out);
    return out;
}

EngineCommand from_root_relative(const EngineCommand& c, const RigidTransform& root) {
    const RigidTransform inv = inverse(root);
    EngineCommand out = c;
    std::visit(
        [&](auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SpawnIndirect>) {
                x.target = apply(root, x.target);
                x.target.position.y = 0.0;  // indirect spawns always land on the ground
            } else if constexpr (std::is_same_v<T, cmd::Move>) {
                x.new_root = compose(root, x.new_root);
            } else if constexpr (std::is_same_v<T, cmd::Duplicate>) {
                x.placement = compose(root, compose(x.placement, inv));
            } else if constexpr (std::is_same_v<T, cmd::AvatarLocomote>) {
                if (auto* t = std::get_if<Teleport>(&x.kind)) {
                    t->to = root.apply_point(t->to);
                }
            }
        },
        out);
    return out;
}

json command_to_json(const EngineCommand& c) {
    json j{{"op", std::string(command_name(c))}};
    std::visit(
        [&j](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SpawnIndirect>) {
                j["target"] = pose_json(x.target);
                j["snap"] = std::string(snap_name(x.snap));
                j["scale"] = x.scale;
            } else if constexpr (std::is_same_v<T, cmd::SpawnAuto>) {
                j["selected"] = x.selected.value;
            } else if constexpr (std::is_same_v<T, cmd::SpawnRelative>) {
                j["reference"] = x.reference.value;
                j["target"] = x.target.value;
            } else if constexpr (std::is_same_v<T, cmd::SetMode>) {
                j["clone"] = x.clone.value;
                j["mode"] = std::string(mode_kind_name(x.mode.kind));
                if (x.mode.kind == ModeKind::Replayed) {
                    j["recording"] = x.mode.recording.value;
                    j["phase"] = x.mode.phase;
                }
            } else if constexpr (std::is_same_v<T, cmd::SetMirror>) {
                j["clone"] = x.clone.value;
                j["on"] = x.on;
            } else if constexpr (std::is_same_v<T, cmd::SetScale>) {
                j["clone"] = x.clone.value;
                j["scale"] = x.scale;
            } else if constexpr (std::is_same_v<T, cmd::SwitchControl> || std::is_same_v<T, cmd::RemoveClone> ||
                                 std::is_same_v<T, cmd::StepOnto>) {
                j["target"] = x.target.value;
            } else if constexpr (std::is_same_v<T, cmd::SetGroup>) {
                json m = json::array();
                for (auto id : x.members) {
                    m.push_back(id.value);
                }
                j["members"] = m;
            } else if constexpr (std::is_same_v<T, cmd::Move>) {
                j["target"] = x.target.value;
                j["new_root"] = transform_json(x.new_root);
            } else if constexpr (std::is_same_v<T, cmd::Duplicate>) {
                if (auto* e = std::get_if<EntityId>(&x.target)) {
                    j["clone"] = e->value;
                } else {
                    j["group"] = std::get<GroupId>(x.target).value;
                }
                j["placement"] = transform_json(x.placement);
            } else if constexpr (std::is_same_v<T, cmd::AvatarLocomote>) {
                if (auto* t = std::get_if<Teleport>(&x.kind)) {
                    j["kind"] = "teleport";
                    j["to"] = vec3_json(t->to);
                } else {
                    j["kind"] = "rotate";
                    j["yaw_delta"] = std::get<Rotate>(x.kind).yaw_delta_deg;
                }
            } else if constexpr (std::is_same_v<T, cmd::StartRecording>) {
                j["scope"] = std::string(scope_name(x.scope));
            } else if constexpr (std::is_same_v<T, cmd::ApplyRecording>) {
                j["recording"] = x.recording.value;
                if (auto* c = std::get_if<ApplyToClone>(&x.target)) {
                    j["target"] = json{{"clone", c->clone.value}};
                } else if (auto* g = std::get_if<ApplyToGroup>(&x.target)) {
                    j["target"] = json{{"group", g->group.value}, {"delta", g->delta}};
                } else {
                    j["target"] = "self";
                }
            }
        },
        c);
    return j;
}

EngineCommand command_from_json(const json& j, const IdResolver& ids, const std::string& path) {
    require_object(j, path);
    const std::string op = string_at(j, "op", path);
    const auto entity = [&](std::string_view key) {
        return ids.entity(require(j, key, path), path + "." + std::string(key));
    };

    if (op == "spawn_direct") {
        check_keys(j, {"op"}, path);
        return cmd::SpawnDirect{};
    }
    if (op == "spawn_indirect") {
        check_keys(j, {"op", "target", "snap", "scale"}, path);
        cmd::SpawnIndirect c;
        c.target = pose_from_json(require(j, "target", path), path + ".target");
        if (j.contains("snap")) {
            const json& s = j["snap"];
            if (s == "none") {
                c.snap = SnapChoice::None;
            } else if (s == "grid") {
                c.snap = SnapChoice::Grid;
            } else if (s == "nearest_object") {
                c.snap = SnapChoice::NearestObject;
            } else {
                bad(path + ".snap", "expected none, grid or nearest_object");
            }
        }
        c.scale = number_or(j, "scale", 1.0, path);
        return c;
    }
    if (op == "spawn_auto") {
        check_keys(j, {"op", "selected"}, path);
        return cmd::SpawnAuto{entity("selected")};
    }
    if (op == "spawn_relative") {
        check_keys(j, {"op", "reference", "target"}, path);
        return cmd::SpawnRelative{entity("reference"), entity("target")};
    }
    if (op == "set_mode") {
        check_keys(j, {"op", "clone", "mode", "recording", "phase"}, path);
        cmd::SetMode c;
        c.clone = entity("clone");
        const std::string mode = string_at(j, "mode", path);
        if (mode == "static") {
            c.mode.kind = ModeKind::Static;
        } else if (mode == "synchronous") {
            c.mode.kind = ModeKind::Synchronous;
        } else if (mode == "replayed") {
            c.mode.kind = ModeKind::Replayed;
            c.mode.recording = ids.recording(require(j, "recording", path), path + ".recording");
            c.mode.phase = number_or(j, "phase", 0.0, path);
        } else {
            bad(path + ".mode", "expected static, synchronous or replayed");
        }
        return c;
    }
    if (op == "set_mirror") {
        check_keys(j, {"op", "clone", "on"}, path);
        if (!require(j, "on", path).is_boolean()) {
            bad(path + ".on", "expected a boolean");
        }
        return cmd::SetMirror{entity("clone"), j["on"].get<bool>()};
    }
    if (op == "set_scale") {
        check_keys(j, {"op", "clone", "scale"}, path);
        return cmd::SetScale{entity("clone"), number_at(j, "scale", path)};
    }
    if (op == "switch_control") {
        check_keys(j, {"op", "target"}, path);
        return cmd::SwitchControl{entity("target")};
    }
    if (op == "set_group") {
        check_keys(j, {"op", "members"}, path);
        const json& m = require(j, "members", path);
        if (!m.is_array()) {
            bad(path + ".members", "expected an array");
        }
        cmd::SetGroup c;
        for (std::size_t i = 0; i < m.size(); ++i) {
            c.members.push_back(ids.entity(m[i], path + ".members[" + std::to_string(i) + "]"));
        }
        return c;
    }
    if (op == "move") {
        check_keys(j, {"op", "target", "new_root"}, path);
        return cmd::Move{entity("target"), transform_from_json(require(j, "new_root", path), path + ".new_root")};
    }
    if (op == "duplicate") {
        check_keys(j, {"op", "clone", "group", "placement"}, path);
        cmd::Duplicate c;
        if (j.contains("clone") == j.contains("group")) {
            bad(path, "duplicate needs exactly one of clone or group");
        }
        if (j.contains("clone")) {
            c.target = entity("clone");
        } else {
            c.target = ids.group(j["group"], path + ".group");
        }
        c.placement = transform_from_json(require(j, "placement", path), path + ".placement");
        return c;
    }
    if (op == "remove_clone") {
        check_keys(j, {"op", "target"}, path);
        return cmd::RemoveClone{entity("target")};
    }
    if (op == "undo") {
        check_keys(j, {"op"}, path);
        return cmd::Undo{};
    }
    if (op == "avatar_locomote") {
        check_keys(j, {"op", "kind", "to", "yaw_delta"}, path);
        const std::string kind = string_at(j, "kind", path);
        if (kind == "teleport") {
            return cmd::AvatarLocomote{Teleport{vec3_from_json(require(j, "to", path), path + ".to")}};
        }
        if (kind == "rotate") {
            return cmd::AvatarLocomote{Rotate{number_at(j, "yaw_delta", path)}};
        }
        bad(path + ".kind", "expected teleport or rotate");
    }
    if (op == "step_onto") {
        check_keys(j, {"op", "target"}, path);
        return cmd::StepOnto{entity("target")};
    }
    if (op == "start_recording") {
        check_keys(j, {"op", "scope"}, path);
        cmd::StartRecording c;
        if (j.contains("scope")) {
            if (j["scope"] == "extended") {
                c.scope = RecordingScope::Extended;
            } else if (j["scope"] == "poses_and_grabs") {
                c.scope = RecordingScope::PosesAndGrabs;
            } else {
                bad(path + ".scope", "expected poses_and_grabs or extended");
            }
        }
        return c;
    }
    if (op == "stop_recording") {
        check_keys(j, {"op"}, path);
        return cmd::StopRecording{};
    }
    if (op == "apply_recording") {
        check_keys(j, {"op", "recording", "target"}, path);
        cmd::ApplyRecording c;
        c.recording = ids.recording(require(j, "recording", path), path + ".recording");
        const json& t = require(j, "target", path);
        const std::string tpath = path + ".target";
        if (t == "self") {
            c.target = ApplyToSelf{};
        } else if (t.is_object() && t.contains("clone")) {
            check_keys(t, {"clone"}, tpath);
            c.target = ApplyToClone{ids.entity(t["clone"], tpath + ".clone")};
        } else if (t.is_object() && t.contains("group")) {
            check_keys(t, {"group", "delta"}, tpath);
            c.target = ApplyToGroup{ids.group(t["group"], tpath + ".group"), number_or(t, "delta", 0.0, tpath)};
        } else {
            bad(tpath, "expected \"self\", {\"clone\": id} or {\"group\": id, \"delta\": s}");
        }
        return c;
    }
    bad(path + ".op", "unknown op '" + op + "'");
}

json transition_json(const SwitchTransition& t, Precision p) {
    return json{{"from_body", t.from_body.value},
                {"to_body", t.to_body.value},
                {"from", pose_json(t.from, p)},
                {"to", pose_json(t.to, p)},
                {"duration", t.duration}};
}

json result_to_json(const CommandResult& r) {
    json j = json::object();
    json ents = json::array();
    for (auto id : r.entities) {
        ents.push_back(id.value);
    }
    j["entities"] = ents;
    if (r.group) {
        j["group"] = r.group->value;
    }
    if (r.recording) {
        j["recording"] = r.recording->value;
    }
    if (r.transition) {
        j["transition"] = transition_json(*r.transition);
    }
    return j;
}

}  // namespace clonemator
