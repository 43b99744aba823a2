#include "clonemator/world_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>

#include "clonemator/error.hpp"

namespace clonemator {

namespace {

json mode_json(const CloneMode& mode, Precision p) {
    return std::visit(
        [p](const auto& m) -> json {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, StaticMode>) {
                return json{{"kind", "static"}};
            } else if constexpr (std::is_same_v<M, SynchronousMode>) {
                return json{{"kind", "synchronous"},
                            {"user_anchor", transform_json(m.user_anchor, p)},
                            {"clone_anchor", transform_json(m.clone_anchor, p)}};
            } else {
                return json{{"kind", "replayed"},
                            {"recording", m.recording.value},
                            {"phase", quantize(m.phase, p)},
                            {"started_at_tick", m.started_at_tick},
                            {"anchor", transform_json(m.anchor, p)}};
            }
        },
        mode);
}

CloneMode mode_from_json(const json& j, const std::string& path) {
    const std::string kind = string_at(j, "kind", path);
    if (kind == "static") {
        return StaticMode{};
    }
    if (kind == "synchronous") {
        return SynchronousMode{transform_from_json(require(j, "user_anchor", path), path + ".user_anchor"),
                               transform_from_json(require(j, "clone_anchor", path), path + ".clone_anchor")};
    }
    if (kind == "replayed") {
        ReplayedMode m;
        m.recording = RecordingId{require(j, "recording", path).get<std::uint64_t>()};
        m.phase = number_at(j, "phase", path);
        m.started_at_tick = require(j, "started_at_tick", path).get<std::uint64_t>();
        m.anchor = transform_from_json(require(j, "anchor", path), path + ".anchor");
        return m;
    }
    throw EngineError(ErrorCode::ParseError, path + ".kind: unknown mode '" + kind + "'");
}

json config_json(const WorldConfig& c) {
    return json{{"tick_rate", c.tick_rate},
                {"arm_length", c.arm_length},
                {"grab_radius", c.grab_radius},
                {"backward_offset", c.backward_offset},
                {"snap_search_radius", c.snap_search_radius},
                {"gravity", c.gravity},
                {"max_reach", c.max_reach},
                {"standing_height", c.standing_height},
                {"ballistic", c.ballistic},
                {"allow_pose_self_replay", c.allow_pose_self_replay}};
}

}  // namespace

std::string to_hex(const Digest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : d) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xF]);
    }
    return out;
}

json world_to_json(const World& w, Precision p) {
    json objects = json::array();
    for (const auto& [id, o] : w.objects) {
        json state = json::object();
        for (const auto& [k, v] : o.scalar_state) {
            state[k] = quantize(v, p);
        }
        objects.push_back(json{{"id", id.value},
                               {"tag", o.tag},
                               {"pose", pose_json(o.pose, p)},
                               {"grabbable", o.grabbable},
                               {"scalar_state", state},
                               {"velocity", vec3_json(o.velocity, p)},
                               {"free", o.free}});
    }

    json clones = json::array();
    for (const auto& [id, c] : w.clones) {
        clones.push_back(json{{"id", id.value},
                              {"mode", mode_json(c.mode, p)},
                              {"root", transform_json(c.root, p)},
                              {"body", body_json(c.body, p)},
                              {"mirror", c.mirror},
                              {"scale", quantize(c.scale, p)},
                              {"group", c.group ? json(c.group->value) : json(nullptr)},
                              {"outline_color_index", c.outline_color_index}});
    }

    json groups = json::array();
    for (const auto& [gid, g] : w.groups) {
        json members = json::array();
        for (auto m : g.members) {
            members.push_back(m.value);
        }
        groups.push_back(json{{"id", gid.value}, {"members", members}, {"color_index", g.color_index}});
    }

    std::vector<const Attachment*> sorted;
    for (const auto& a : w.attachments) {
        sorted.push_back(&a);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->object < b->object; });
    json attachments = json::array();
    for (const auto* a : sorted) {
        attachments.push_back(json{{"object", a->object.value},
                                   {"holder", a->holder.value},
                                   {"hand", hand_name(a->hand)},
                                   {"grip", transform_json(a->grip, p)}});
    }

    json avatar{{"body_id", w.avatar.body_id.value},
                {"original_body", w.original_body.value},
                {"root", transform_json(w.avatar.root, p)},
                {"local", body_json(w.avatar.local, p)},
                {"body", body_json(w.avatar.body, p)},
                {"scale", quantize(w.avatar.scale, p)}};

    return json{{"objects", objects},
                {"clones", clones},
                {"groups", groups},
                {"attachments", attachments},
                {"avatar", avatar}};
}

Digest sha256(const std::string& bytes) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
        throw std::runtime_error("sha256 failed");
    }
    return out;
}

Digest world_hash(const World& w) { return sha256(world_to_json(w, Precision::Hash).dump()); }

std::string world_hash_hex(const World& w) { return to_hex(world_hash(w)); }

json save_world(const World& w) {
    json doc = world_to_json(w, Precision::Exact);
    doc["config"] = config_json(w.config);
    return doc;
}

World load_world(const json& doc) {
    const std::string root = "world";
    require_object(doc, root);
    check_keys(doc, {"objects", "clones", "groups", "attachments", "avatar", "config"}, root);

    WorldConfig cfg;
    if (doc.contains("config")) {
        const json& c = doc["config"];
        const std::string path = root + ".config";
        require_object(c, path);
        check_keys(c, {"tick_rate", "arm_length", "grab_radius", "backward_offset", "snap_search_radius", "gravity",
                       "max_reach", "standing_height", "ballistic", "allow_pose_self_replay"},
                   path);
        cfg.tick_rate = number_or(c, "tick_rate", cfg.tick_rate, path);
        cfg.arm_length = number_or(c, "arm_length", cfg.arm_length, path);
        cfg.grab_radius = number_or(c, "grab_radius", cfg.grab_radius, path);
        cfg.backward_offset = number_or(c, "backward_offset", cfg.backward_offset, path);
        cfg.snap_search_radius = number_or(c, "snap_search_radius", cfg.snap_search_radius, path);
        cfg.gravity = number_or(c, "gravity", cfg.gravity, path);
        cfg.max_reach = number_or(c, "max_reach", cfg.max_reach, path);
        cfg.standing_height = number_or(c, "standing_height", cfg.standing_height, path);
        cfg.ballistic = bool_or(c, "ballistic", cfg.ballistic, path);
        cfg.allow_pose_self_replay = bool_or(c, "allow_pose_self_replay", cfg.allow_pose_self_replay, path);
    }
    World w(cfg);
    w.objects.clear();
    std::uint64_t max_id = 0;
    const auto track = [&max_id](std::uint64_t v) {
        max_id = std::max(max_id, v);
        return v;
    };

    const json& av = require(doc, "avatar", root);
    const std::string apath = root + ".avatar";
    w.avatar.body_id = EntityId{track(require(av, "body_id", apath).get<std::uint64_t>())};
    w.original_body = EntityId{track(require(av, "original_body", apath).get<std::uint64_t>())};
    w.avatar.root = transform_from_json(require(av, "root", apath), apath + ".root");
    w.avatar.local = body_from_json(require(av, "local", apath), apath + ".local");
    w.avatar.body = body_from_json(require(av, "body", apath), apath + ".body");
    w.avatar.scale = number_at(av, "scale", apath);

    std::size_t i = 0;
    for (const auto& o : require(doc, "objects", root)) {
        const std::string path = root + ".objects[" + std::to_string(i++) + "]";
        WorldObject obj;
        obj.id = EntityId{track(require(o, "id", path).get<std::uint64_t>())};
        obj.tag = string_at(o, "tag", path);
        obj.pose = pose_from_json(require(o, "pose", path), path + ".pose");
        obj.grabbable = bool_or(o, "grabbable", false, path);
        for (const auto& [k, v] : require(o, "scalar_state", path).items()) {
            obj.scalar_state[k] = v.get<double>();
        }
        obj.velocity = vec3_from_json(require(o, "velocity", path), path + ".velocity");
        obj.free = bool_or(o, "free", false, path);
        w.objects.emplace(obj.id, std::move(obj));
    }

    i = 0;
    for (const auto& c : require(doc, "clones", root)) {
        const std::string path = root + ".clones[" + std::to_string(i++) + "]";
        Clone clone;
        clone.id = EntityId{track(require(c, "id", path).get<std::uint64_t>())};
        clone.mode = mode_from_json(require(c, "mode", path), path + ".mode");
        clone.root = transform_from_json(require(c, "root", path), path + ".root");
        clone.body = body_from_json(require(c, "body", path), path + ".body");
        clone.mirror = bool_or(c, "mirror", false, path);
        clone.scale = number_at(c, "scale", path);
        if (const json& g = require(c, "group", path); !g.is_null()) {
            clone.group = GroupId{g.get<std::uint64_t>()};
        }
        clone.outline_color_index = require(c, "outline_color_index", path).get<int>();
        w.clones.emplace(clone.id, std::move(clone));
    }

    std::uint64_t max_group = 0;
    i = 0;
    for (const auto& g : require(doc, "groups", root)) {
        const std::string path = root + ".groups[" + std::to_string(i++) + "]";
        Group group;
        const GroupId gid{require(g, "id", path).get<std::uint64_t>()};
        max_group = std::max(max_group, gid.value);
        for (const auto& m : require(g, "members", path)) {
            group.members.push_back(EntityId{m.get<std::uint64_t>()});
        }
        group.color_index = require(g, "color_index", path).get<int>();
        w.groups.emplace(gid, std::move(group));
    }

    i = 0;
    for (const auto& a : require(doc, "attachments", root)) {
        const std::string path = root + ".attachments[" + std::to_string(i++) + "]";
        Attachment att;
        att.object = EntityId{require(a, "object", path).get<std::uint64_t>()};
        att.holder = EntityId{require(a, "holder", path).get<std::uint64_t>()};
        att.hand = hand_from_json(require(a, "hand", path), path + ".hand");
        att.grip = transform_from_json(require(a, "grip", path), path + ".grip");
        if (!w.objects.contains(att.object) || !w.is_body(att.holder)) {
            throw EngineError(ErrorCode::ValidationError, path + ": attachment references a missing entity");
        }
        w.attachments.push_back(att);
    }
    for (const auto& [gid, g] : w.groups) {
        for (auto m : g.members) {
            if (!w.clones.contains(m)) {
                throw EngineError(ErrorCode::ValidationError, "group " + std::to_string(gid.value) + " has a missing member");
            }
        }
    }

    w.next_entity = max_id + 1;
    w.next_group = max_group + 1;
    return w;
}

}  // namespace clonemator
