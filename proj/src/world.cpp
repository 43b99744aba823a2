#include "clonemator/world.hpp"

#include <algorithm>
#include <cmath>

#include "clonemator/error.hpp"

namespace clonemator {

BodyFrame apply(const RigidTransform& t, const BodyFrame& body) {
    BodyFrame out = body;
    out.head = apply(t, body.head);
    out.left_hand = apply(t, body.left_hand);
    out.right_hand = apply(t, body.right_hand);
    return out;
}

BodyFrame interp_body(const BodyFrame& a, const BodyFrame& b, double u) {
    BodyFrame out = a;
    out.head = interp_pose(a.head, b.head, u);
    out.left_hand = interp_pose(a.left_hand, b.left_hand, u);
    out.right_hand = interp_pose(a.right_hand, b.right_hand, u);
    return out;
}

bool approx_equal(const BodyFrame& a, const BodyFrame& b, double tol) {
    return a.left_grab == b.left_grab && a.right_grab == b.right_grab && approx_equal(a.head, b.head, tol) &&
           approx_equal(a.left_hand, b.left_hand, tol) && approx_equal(a.right_hand, b.right_hand, tol);
}

double max_deviation(const BodyFrame& a, const BodyFrame& b) {
    return std::max({max_deviation(a.head, b.head), max_deviation(a.left_hand, b.left_hand),
                     max_deviation(a.right_hand, b.right_hand)});
}

BodyFrame neutral_body() {
    BodyFrame b;
    b.head = {{0.0, 1.6, 0.0}, Quat::identity()};
    b.left_hand = {{0.3, 1.0, 0.2}, Quat::identity()};
    b.right_hand = {{-0.3, 1.0, 0.2}, Quat::identity()};
    return b;
}

void WorldConfig::validate() const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw EngineError(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
        }
    };
    positive(tick_rate, "tick_rate");
    positive(arm_length, "arm_length");
    positive(grab_radius, "grab_radius");
    positive(backward_offset, "backward_offset");
    positive(snap_search_radius, "snap_search_radius");
    positive(gravity, "gravity");
    positive(max_reach, "max_reach");
    positive(standing_height, "standing_height");
}

std::string_view mode_name(const CloneMode& mode) {
    switch (mode.index()) {
        case 0: return "static";
        case 1: return "synchronous";
        default: return "replayed";
    }
}

World::World(WorldConfig cfg) : config(cfg) {
    config.validate();
    original_body = allocate_entity();
    avatar.body_id = original_body;
    avatar.local = neutral_body();
    avatar.local.head.position.y = config.standing_height;
    refresh_avatar_body();
}

EntityId World::add_object(const std::string& tag, const Pose& pose, bool grabbable) {
    if (tag.empty()) {
        throw EngineError(ErrorCode::EmptyTag, "object tag must be non-empty");
    }
    if (!pose.position.finite() || !pose.orientation.finite()) {
        throw EngineError(ErrorCode::InvalidArgument, "object pose must be finite");
    }
    const EntityId id = allocate_entity();
    WorldObject obj;
    obj.id = id;
    obj.tag = tag;
    obj.pose = {pose.position, pose.orientation.normalized()};
    obj.grabbable = grabbable;
    objects.emplace(id, std::move(obj));
    return id;
}

std::vector<EntityId> World::objects_by_tag(const std::string& tag) const {
    std::vector<EntityId> out;
    for (const auto& [id, obj] : objects) {
        if (obj.tag == tag) {
            out.push_back(id);
        }
    }
    return out;
}

std::optional<EntityId> World::nearest_object(const Vec3& p, double radius,
                                               const std::optional<std::string>& filter) const {
    if (!(radius > 0.0)) {
        throw EngineError(ErrorCode::InvalidArgument, "search radius must be positive");
    }
    std::optional<EntityId> best;
    double best_d = 0.0;
    for (const auto& [id, obj] : objects) {
        if (filter && obj.tag != *filter) {
            continue;
        }
        const double d = horizontal_distance(p, obj.pose.position);
        // Map iteration is ascending by id, so strict < keeps the lower id on ties.
        if (d <= radius && (!best || d < best_d)) {
            best = id;
            best_d = d;
        }
    }
    return best;
}

std::optional<EntityId> World::controlled_clone() const {
    if (avatar.body_id == original_body) {
        return std::nullopt;
    }
    return avatar.body_id;
}

const WorldObject& World::object(EntityId id) const {
    auto it = objects.find(id);
    if (it == objects.end()) {
        throw EngineError(ErrorCode::UnknownEntity, "no object " + std::to_string(id.value));
    }
    return it->second;
}

WorldObject& World::object(EntityId id) {
    return const_cast<WorldObject&>(std::as_const(*this).object(id));
}

const Clone& World::clone(EntityId id) const {
    auto it = clones.find(id);
    if (it == clones.end()) {
        if (id == avatar.body_id) {
            throw EngineError(ErrorCode::NotAClone, "entity " + std::to_string(id.value) + " is the controlled body");
        }
        if (objects.contains(id)) {
            throw EngineError(ErrorCode::NotAClone, "entity " + std::to_string(id.value) + " is an object");
        }
        throw EngineError(ErrorCode::UnknownEntity, "no clone " + std::to_string(id.value));
    }
    return it->second;
}

Clone& World::clone(EntityId id) { return const_cast<Clone&>(std::as_const(*this).clone(id)); }

const BodyFrame& World::body_of(EntityId holder) const {
    if (holder == avatar.body_id) {
        return avatar.body;
    }
    return clone(holder).body;
}

const Attachment* World::attachment_for(EntityId object) const {
    for (const auto& a : attachments) {
        if (a.object == object) {
            return &a;
        }
    }
    return nullptr;
}

std::optional<EntityId> World::held_by(EntityId holder, Hand hand) const {
    for (const auto& a : attachments) {
        if (a.holder == holder && a.hand == hand) {
            return a.object;
        }
    }
    return std::nullopt;
}

void World::refresh_avatar_body() {
    const double s = avatar.scale;
    const auto place = [&](const Pose& local) {
        return apply(avatar.root, Pose{local.position * s, local.orientation});
    };
    avatar.body.head = place(avatar.local.head);
    avatar.body.left_hand = place(avatar.local.left_hand);
    avatar.body.right_hand = place(avatar.local.right_hand);
    avatar.body.left_grab = avatar.local.left_grab;
    avatar.body.right_grab = avatar.local.right_grab;
}

void World::sync_attached_objects() {
    for (const auto& a : attachments) {
        auto& obj = objects.at(a.object);
        const Pose& hand = body_of(a.holder).hand(a.hand);
        obj.pose = apply(compose(to_transform(hand), a.grip), Pose{});
    }
}

}  // namespace clonemator
