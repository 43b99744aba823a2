#include "clonemator/engine.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace clonemator {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool finite_pose(const Pose& p) { return p.position.finite() && p.orientation.finite() && p.orientation.norm() > 1e-12; }

Pose solve_joint(const Pose& user, const RigidTransform& inv_user_anchor, const RigidTransform& clone_anchor,
                 double scale, bool mirror) {
    Pose local = apply(inv_user_anchor, user);
    if (scale != 1.0) {
        local.position = local.position * scale;
    }
    if (mirror) {
        local.position.x = -local.position.x;
        local.orientation = Quat{local.orientation.w, local.orientation.x, -local.orientation.y, -local.orientation.z};
    }
    return apply(clone_anchor, local);
}

}  // namespace

BodyFrame body_to_local(const BodyFrame& world_body, const RigidTransform& root, double scale) {
    BodyFrame b = apply(inverse(root), world_body);
    b.head.position = b.head.position / scale;
    b.left_hand.position = b.left_hand.position / scale;
    b.right_hand.position = b.right_hand.position / scale;
    return b;
}

Engine::Engine(WorldConfig cfg) : world_(cfg) {}

Engine::Engine(World w) : world_(std::move(w)) { world_.config.validate(); }

void Engine::check_scale(double s) const {
    if (!(s >= kMinScale && s <= kMaxScale)) {
        throw EngineError(ErrorCode::ScaleOutOfRange, "scale " + std::to_string(s) + " outside [0.1, 10]");
    }
}

EntityId Engine::make_clone(Clone c) {
    c.id = world_.allocate_entity();
    const EntityId id = c.id;
    world_.clones.emplace(id, std::move(c));
    return id;
}

void Engine::relocate_avatar(const RigidTransform& new_root, UndoEntry* undo) {
    AvatarState& av = world_.avatar;
    if (new_root == av.root) {
        return;
    }
    const RigidTransform delta = compose(new_root, inverse(av.root));
    for (auto& [id, c] : world_.clones) {
        if (auto* s = std::get_if<SynchronousMode>(&c.mode)) {
            const RigidTransform before = s->user_anchor;
            s->user_anchor = compose(delta, s->user_anchor);
            if (undo) {
                undo->anchors[id] = {before, s->user_anchor};
            }
        }
    }
    av.root = new_root;
    world_.refresh_avatar_body();
}

void Engine::copy_held_objects(EntityId from, EntityId to, const RigidTransform& delta, UndoEntry& undo) {
    for (Hand h : kHands) {
        const auto held = world_.held_by(from, h);
        if (!held) {
            continue;
        }
        const WorldObject src = world_.object(*held);
        const Attachment* a = world_.attachment_for(*held);
        const RigidTransform grip = a->grip;
        const EntityId copy = world_.add_object(src.tag, apply(delta, src.pose), src.grabbable);
        world_.object(copy).scalar_state = src.scalar_state;
        world_.attachments.push_back({copy, to, h, grip});
        undo.created_objects.push_back(copy);
    }
}

void Engine::drop_from_group(EntityId clone) {
    Clone& c = world_.clone(clone);
    if (!c.group) {
        return;
    }
    const GroupId gid = *c.group;
    c.group.reset();
    c.outline_color_index = 0;
    auto it = world_.groups.find(gid);
    if (it == world_.groups.end()) {
        return;
    }
    std::erase(it->second.members, clone);
    if (it->second.members.size() < 2) {
        for (auto m : it->second.members) {
            Clone& rest = world_.clone(m);
            rest.group.reset();
            rest.outline_color_index = 0;
        }
        world_.groups.erase(it);
    }
}

EntityId Engine::spawn_direct() {
    UndoEntry undo;
    undo.kind = "spawn";
    undo.hash_before = world_hash(world_);
    const AvatarState& av = world_.avatar;

    Clone c;
    c.mode = StaticMode{};
    c.root = av.root;
    c.body = av.body;
    c.scale = av.scale;
    const EntityId id = make_clone(std::move(c));
    undo.created_clones.push_back(id);

    for (auto& a : world_.attachments) {
        if (a.holder == av.body_id) {
            undo.prior_attachments.push_back(a);
            undo.prior_objects.emplace(a.object, world_.object(a.object));
            a.holder = id;
        }
    }

    undo.prior_root = av.root;
    const RigidTransform back =
        compose(av.root, RigidTransform::translate({0.0, 0.0, -world_.config.backward_offset}));
    relocate_avatar(back, &undo);
    undo.post_root = world_.avatar.root;
    undo_.push_back(std::move(undo));
    return id;
}

EntityId Engine::spawn_indirect(const Pose& target, SnapChoice snap, double scale) {
    check_scale(scale);
    if (!finite_pose(target)) {
        throw EngineError(ErrorCode::InvalidArgument, "spawn target must be finite");
    }
    if (std::abs(target.position.y) > 1e-9) {
        throw EngineError(ErrorCode::InvalidArgument, "indirect spawn targets the ground plane (y = 0)");
    }
    const WorldConfig& cfg = world_.config;
    RigidTransform root = yaw_frame(target);
    root.translation.y = 0.0;

    if (snap == SnapChoice::Grid) {
        root.translation = snap_to_grid(root.translation, cfg.arm_length);
    } else if (snap == SnapChoice::NearestObject) {
        const auto near = world_.nearest_object(target.position, cfg.snap_search_radius);
        if (!near) {
            throw EngineError(ErrorCode::NoSnapAnchor, "no object within the snap search radius");
        }
        const Vec3 obj = world_.object(*near).pose.position;
        Vec3 approach{obj.x - world_.avatar.root.translation.x, 0.0, obj.z - world_.avatar.root.translation.z};
        if (approach.norm() < 1e-9) {
            approach = {obj.x - target.position.x, 0.0, obj.z - target.position.z};
        }
        if (approach.norm() < 1e-9) {
            approach = world_.avatar.root.rotation.rotate(Vec3::unit_z());
            approach.y = 0.0;
        }
        approach = approach / approach.norm();
        root = RigidTransform::from_yaw({obj.x - cfg.arm_length * approach.x, 0.0, obj.z - cfg.arm_length * approach.z},
                                        std::atan2(approach.x, approach.z) * kRadToDeg);
    }

    UndoEntry undo;
    undo.kind = "spawn";
    undo.hash_before = world_hash(world_);
    BodyFrame local = neutral_body();
    local.head.position.y = cfg.standing_height;
    Clone c;
    c.mode = StaticMode{};
    c.root = root;
    c.scale = scale;
    local.head.position = local.head.position * scale;
    local.left_hand.position = local.left_hand.position * scale;
    local.right_hand.position = local.right_hand.position * scale;
    c.body = apply(root, local);
    const EntityId id = make_clone(std::move(c));
    undo.created_clones.push_back(id);
    undo_.push_back(std::move(undo));
    return id;
}

std::vector<EntityId> Engine::spawn_auto(EntityId selected) {
    const WorldObject& sel = world_.object(selected);
    const std::string tag = sel.tag;
    const RigidTransform offset = compose(inverse(yaw_frame(sel.pose)), world_.avatar.root);

    std::vector<EntityId> others;
    for (auto id : world_.objects_by_tag(tag)) {
        if (id != selected) {
            others.push_back(id);
        }
    }
    if (others.empty()) {
        return {};
    }

    UndoEntry undo;
    undo.kind = "auto_spawn_batch";
    undo.hash_before = world_hash(world_);
    const AvatarState av = world_.avatar;
    const RigidTransform inv_avatar = inverse(av.root);
    std::vector<EntityId> out;
    for (auto other : others) {
        const RigidTransform root = compose(yaw_frame(world_.object(other).pose), offset);
        const RigidTransform delta = compose(root, inv_avatar);
        Clone c;
        c.root = root;
        c.body = apply(delta, av.body);
        c.mode = SynchronousMode{av.root, root};
        const EntityId id = make_clone(std::move(c));
        copy_held_objects(av.body_id, id, delta, undo);
        undo.created_clones.push_back(id);
        out.push_back(id);
    }
    undo_.push_back(std::move(undo));
    return out;
}

EntityId Engine::spawn_relative(EntityId reference, EntityId target) {
    if (reference == target) {
        throw EngineError(ErrorCode::SameObject, "reference and target are the same object");
    }
    const RigidTransform ref_frame = yaw_frame(world_.object(reference).pose);
    const RigidTransform tgt_frame = yaw_frame(world_.object(target).pose);

    UndoEntry undo;
    undo.kind = "spawn";
    undo.hash_before = world_hash(world_);
    const AvatarState av = world_.avatar;
    const RigidTransform root = compose(tgt_frame, compose(inverse(ref_frame), av.root));
    const RigidTransform delta = compose(root, inverse(av.root));
    Clone c;
    c.root = root;
    c.body = apply(delta, av.body);
    c.mode = SynchronousMode{av.root, root};
    const EntityId id = make_clone(std::move(c));
    copy_held_objects(av.body_id, id, delta, undo);
    undo.created_clones.push_back(id);
    undo_.push_back(std::move(undo));
    return id;
}

void Engine::set_mode(EntityId clone, const ModeRequest& mode) {
    Clone& c = world_.clone(clone);
    switch (mode.kind) {
        case ModeKind::Static: c.mode = StaticMode{}; break;
        case ModeKind::Synchronous: c.mode = SynchronousMode{world_.avatar.root, c.root}; break;
        case ModeKind::Replayed: {
            const Recording& r = store_.get(mode.recording);
            if (!(mode.phase >= 0.0 && mode.phase < r.duration())) {
                throw EngineError(ErrorCode::InvalidArgument, "phase must lie in [0, duration)");
            }
            c.mode = ReplayedMode{mode.recording, mode.phase, world_.tick, c.root};
            break;
        }
    }
}

void Engine::set_mirror(EntityId clone, bool on) { world_.clone(clone).mirror = on; }

void Engine::set_scale(EntityId clone, double s) {
    Clone& c = world_.clone(clone);
    check_scale(s);
    c.scale = s;
}

SwitchTransition Engine::switch_control(EntityId target) {
    const Clone t = world_.clone(target);
    drop_from_group(target);
    world_.clones.erase(target);
    prev_clone_grab_.erase(target);

    AvatarState& av = world_.avatar;
    Clone former;
    former.id = av.body_id;
    former.mode = StaticMode{};
    former.root = av.root;
    former.body = av.body;
    former.scale = av.scale;
    world_.clones.emplace(former.id, former);

    SwitchTransition tr{former.id, target, av.body.head, t.body.head, 0.3};
    av.body_id = target;
    av.scale = t.scale;
    relocate_avatar(t.root);
    av.local = body_to_local(t.body, t.root, t.scale);
    world_.refresh_avatar_body();
    return tr;
}

GroupId Engine::set_group(std::vector<EntityId> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (auto m : members) {
        if (world_.clone(m).group) {
            throw EngineError(ErrorCode::AlreadyGrouped, "clone " + std::to_string(m.value) + " is already grouped");
        }
    }
    if (members.size() < 2) {
        throw EngineError(ErrorCode::TooFewMembers, "a group needs at least two clones");
    }
    UndoEntry undo;
    undo.kind = "group";
    undo.hash_before = world_hash(world_);
    const GroupId gid = world_.allocate_group();
    const int color = 1 + static_cast<int>((gid.value - 1) % 7);
    for (auto m : members) {
        Clone& c = world_.clone(m);
        undo.prior_clones.emplace(m, c);
        c.group = gid;
        c.outline_color_index = color;
    }
    world_.groups.emplace(gid, Group{members, color});
    undo.created_groups.push_back(gid);
    undo_.push_back(std::move(undo));
    return gid;
}

void Engine::move(EntityId target, const RigidTransform& new_root) {
    Clone& t = world_.clone(target);
    RigidTransform dest = yaw_frame(new_root);
    const RigidTransform delta = compose(dest, inverse(t.root));
    std::vector<EntityId> members{target};
    if (t.group) {
        members = world_.groups.at(*t.group).members;
    }
    for (auto m : members) {
        Clone& c = world_.clone(m);
        c.root = m == target ? dest : compose(delta, c.root);
        c.body = apply(delta, c.body);
        if (auto* s = std::get_if<SynchronousMode>(&c.mode)) {
            s->clone_anchor = compose(delta, s->clone_anchor);
        } else if (auto* r = std::get_if<ReplayedMode>(&c.mode)) {
            r->anchor = compose(delta, r->anchor);
        }
    }
}

std::pair<std::vector<EntityId>, std::optional<GroupId>> Engine::duplicate(std::variant<EntityId, GroupId> target,
                                                                           const RigidTransform& placement) {
    std::vector<EntityId> sources;
    const GroupId* gsrc = std::get_if<GroupId>(&target);
    if (gsrc) {
        auto it = world_.groups.find(*gsrc);
        if (it == world_.groups.end()) {
            throw EngineError(ErrorCode::UnknownEntity, "no group " + std::to_string(gsrc->value));
        }
        sources = it->second.members;
    } else {
        world_.clone(std::get<EntityId>(target));
        sources.push_back(std::get<EntityId>(target));
    }

    UndoEntry undo;
    undo.kind = "duplicate";
    undo.hash_before = world_hash(world_);
    std::vector<EntityId> out;
    for (auto src : sources) {
        Clone c = world_.clone(src);
        c.root = compose(placement, c.root);
        c.body = apply(placement, c.body);
        c.group.reset();
        c.outline_color_index = 0;
        if (auto* s = std::get_if<SynchronousMode>(&c.mode)) {
            s->clone_anchor = compose(placement, s->clone_anchor);
        } else if (auto* r = std::get_if<ReplayedMode>(&c.mode)) {
            r->anchor = compose(placement, r->anchor);
        }
        const EntityId id = make_clone(std::move(c));
        copy_held_objects(src, id, placement, undo);
        undo.created_clones.push_back(id);
        out.push_back(id);
    }
    std::optional<GroupId> group;
    if (gsrc) {
        group = world_.allocate_group();
        const int color = 1 + static_cast<int>((group->value - 1) % 7);
        for (auto id : out) {
            Clone& c = world_.clone(id);
            c.group = group;
            c.outline_color_index = color;
        }
        world_.groups.emplace(*group, Group{out, color});
        undo.created_groups.push_back(*group);
    }
    undo_.push_back(std::move(undo));
    return {out, group};
}

void Engine::remove_clone(EntityId target) {
    if (target == world_.avatar.body_id) {
        throw EngineError(ErrorCode::CannotRemoveControlledBody, "cannot remove the controlled body");
    }
    world_.clone(target);
    const Vec3 drop = world_.avatar.root.apply_point(kDropOffset);
    for (auto it = world_.attachments.begin(); it != world_.attachments.end();) {
        if (it->holder == target) {
            WorldObject& obj = world_.object(it->object);
            obj.pose.position = drop;
            obj.velocity = Vec3::zero();
            obj.free = true;
            it = world_.attachments.erase(it);
        } else {
            ++it;
        }
    }
    drop_from_group(target);
    world_.clones.erase(target);
    prev_clone_grab_.erase(target);
}

void Engine::undo() {
    if (undo_.empty()) {
        throw EngineError(ErrorCode::EmptyUndoStack, "nothing to undo");
    }
    UndoEntry e = std::move(undo_.back());
    undo_.pop_back();

    const auto gone = [&](EntityId id) {
        return std::find(e.created_clones.begin(), e.created_clones.end(), id) != e.created_clones.end() ||
               std::find(e.created_objects.begin(), e.created_objects.end(), id) != e.created_objects.end();
    };
    std::erase_if(world_.attachments, [&](const Attachment& a) { return gone(a.holder) || gone(a.object); });

    for (auto gid : e.created_groups) {
        world_.groups.erase(gid);
    }
    for (auto id : e.created_clones) {
        if (id == world_.avatar.body_id) {
            spdlog::warn("undo: clone {} is the controlled body and stays", id.value);
            continue;
        }
        if (auto it = world_.clones.find(id); it != world_.clones.end()) {
            if (it->second.group && world_.groups.contains(*it->second.group)) {
                drop_from_group(id);
            }
            world_.clones.erase(it);
        }
        prev_clone_grab_.erase(id);
    }
    for (auto id : e.created_objects) {
        world_.objects.erase(id);
    }
    for (const auto& [id, prior] : e.prior_clones) {
        if (auto it = world_.clones.find(id); it != world_.clones.end()) {
            it->second.group = prior.group;
            it->second.outline_color_index = prior.outline_color_index;
        }
    }
    for (const auto& a : e.prior_attachments) {
        if (world_.objects.contains(a.object) && !world_.attachment_for(a.object) && world_.is_body(a.holder) &&
            !world_.held_by(a.holder, a.hand)) {
            world_.attachments.push_back(a);
        }
    }
    for (const auto& [id, prior] : e.prior_objects) {
        if (auto it = world_.objects.find(id); it != world_.objects.end()) {
            it->second = prior;
        }
    }
    if (e.prior_root) {
        std::set<EntityId> untouched;
        if (e.post_root && world_.avatar.root == *e.post_root) {
            for (const auto& [id, ab] : e.anchors) {
                auto it = world_.clones.find(id);
                if (it == world_.clones.end()) {
                    continue;
                }
                if (auto* s = std::get_if<SynchronousMode>(&it->second.mode); s && s->user_anchor == ab.second) {
                    untouched.insert(id);
                }
            }
        }
        relocate_avatar(*e.prior_root);
        for (auto id : untouched) {
            std::get<SynchronousMode>(world_.clones.at(id).mode).user_anchor = e.anchors.at(id).first;
        }
    }
}

void Engine::avatar_locomote(const Locomotion& kind) {
    const RigidTransform& root = world_.avatar.root;
    RigidTransform dest = root;
    if (auto* t = std::get_if<Teleport>(&kind)) {
        if (!t->to.finite()) {
            throw EngineError(ErrorCode::InvalidArgument, "teleport destination must be finite");
        }
        dest.translation = t->to;
    } else {
        const double deg = std::get<Rotate>(kind).yaw_delta_deg;
        if (!std::isfinite(deg)) {
            throw EngineError(ErrorCode::InvalidArgument, "rotation must be finite");
        }
        dest.rotation = Quat::from_yaw_deg(deg) * root.rotation;
    }
    relocate_avatar(dest);
}

void Engine::step_onto(EntityId target) {
    const Clone& c = world_.clone(target);
    if (!std::holds_alternative<StaticMode>(c.mode)) {
        throw EngineError(ErrorCode::NotStatic, "clone " + std::to_string(target.value) + " is not static");
    }
    RigidTransform dest = world_.avatar.root;
    dest.translation = c.body.head.position;
    relocate_avatar(dest);
}

void Engine::start_recording(RecordingScope scope) {
    recorder_.start(world_.avatar, scope, world_.config.tick_rate);
}

RecordingId Engine::stop_recording() { return store_.add(recorder_.stop()); }

void Engine::apply_recording(RecordingId id, const ApplyTarget& target) {
    const Recording& r = store_.get(id);
    const double d = r.duration();
    if (auto* c = std::get_if<ApplyToClone>(&target)) {
        Clone& clone = world_.clone(c->clone);
        clone.mode = ReplayedMode{id, 0.0, world_.tick, clone.root};
    } else if (auto* g = std::get_if<ApplyToGroup>(&target)) {
        auto it = world_.groups.find(g->group);
        if (it == world_.groups.end()) {
            throw EngineError(ErrorCode::UnknownEntity, "no group " + std::to_string(g->group.value));
        }
        if (!(g->delta >= 0.0) || !std::isfinite(g->delta)) {
            throw EngineError(ErrorCode::InvalidArgument, "group phase step must be non-negative");
        }
        std::vector<EntityId> members = it->second.members;
        std::sort(members.begin(), members.end());
        for (std::size_t i = 0; i < members.size(); ++i) {
            Clone& clone = world_.clone(members[i]);
            clone.mode = ReplayedMode{id, std::fmod(static_cast<double>(i) * g->delta, d), world_.tick, clone.root};
        }
    } else {
        if (r.scope != RecordingScope::Extended && !world_.config.allow_pose_self_replay) {
            throw EngineError(ErrorCode::ScopeViolation, "self replay needs an extended recording");
        }
        if (self_replay_) {
            throw EngineError(ErrorCode::SelfReplayActive, "a self replay is already running");
        }
        self_replay_ = SelfReplay{id, world_.tick, ReplayBindings{world_.avatar.body_id, {}, {}}};
    }
}

CommandResult Engine::dispatch(const EngineCommand& c) {
    CommandResult r;
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SpawnDirect>) {
                r.entities.push_back(spawn_direct());
            } else if constexpr (std::is_same_v<T, cmd::SpawnIndirect>) {
                r.entities.push_back(spawn_indirect(x.target, x.snap, x.scale));
            } else if constexpr (std::is_same_v<T, cmd::SpawnAuto>) {
                r.entities = spawn_auto(x.selected);
            } else if constexpr (std::is_same_v<T, cmd::SpawnRelative>) {
                r.entities.push_back(spawn_relative(x.reference, x.target));
            } else if constexpr (std::is_same_v<T, cmd::SetMode>) {
                set_mode(x.clone, x.mode);
            } else if constexpr (std::is_same_v<T, cmd::SetMirror>) {
                set_mirror(x.clone, x.on);
            } else if constexpr (std::is_same_v<T, cmd::SetScale>) {
                set_scale(x.clone, x.scale);
            } else if constexpr (std::is_same_v<T, cmd::SwitchControl>) {
                r.transition = switch_control(x.target);
            } else if constexpr (std::is_same_v<T, cmd::SetGroup>) {
                r.group = set_group(x.members);
            } else if constexpr (std::is_same_v<T, cmd::Move>) {
                move(x.target, x.new_root);
            } else if constexpr (std::is_same_v<T, cmd::Duplicate>) {
                auto [ids, g] = duplicate(x.target, x.placement);
                r.entities = std::move(ids);
                r.group = g;
            } else if constexpr (std::is_same_v<T, cmd::RemoveClone>) {
                remove_clone(x.target);
            } else if constexpr (std::is_same_v<T, cmd::Undo>) {
                undo();
            } else if constexpr (std::is_same_v<T, cmd::AvatarLocomote>) {
                avatar_locomote(x.kind);
            } else if constexpr (std::is_same_v<T, cmd::StepOnto>) {
                step_onto(x.target);
            } else if constexpr (std::is_same_v<T, cmd::StartRecording>) {
                start_recording(x.scope);
            } else if constexpr (std::is_same_v<T, cmd::StopRecording>) {
                r.recording = stop_recording();
            } else if constexpr (std::is_same_v<T, cmd::ApplyRecording>) {
                apply_recording(x.recording, x.target);
            }
        },
        c);
    return r;
}

CommandResult Engine::execute(const EngineCommand& c) {
    const RigidTransform root_before = world_.avatar.root;
    CommandResult r = dispatch(c);
    if (!std::holds_alternative<cmd::StartRecording>(c) && !std::holds_alternative<cmd::StopRecording>(c)) {
        recorder_.record_command(c, r, root_before);
    }
    return r;
}

std::uint64_t Engine::enqueue(EngineCommand c) {
    const std::uint64_t token = next_token_++;
    queue_.emplace_back(token, std::move(c));
    return token;
}

void Engine::run_command(const EngineCommand& c, std::uint64_t token, bool replayed, TickEvents& ev) {
    CommandOutcome o;
    o.token = token;
    o.op = std::string(command_name(c));
    o.replayed = replayed;
    try {
        CommandResult r = execute(c);
        if (r.transition) {
            ev.transitions.push_back(*r.transition);
        }
        if (std::holds_alternative<cmd::StartRecording>(c)) {
            ev.recording_started = true;
        }
        if (r.recording) {
            ev.recordings_stopped.push_back(*r.recording);
        }
        if (replayed && self_replay_) {
            self_replay_->bindings.note(r);
        }
        o.result = std::move(r);
    } catch (const EngineError& e) {
        o.error = e.code();
        o.detail = e.what();
        spdlog::debug("tick {}: {} failed: {}", world_.tick, o.op, e.what());
    }
    ev.commands.push_back(std::move(o));
}

BodyFrame Engine::clamp_reach(const BodyFrame& input) const {
    BodyFrame b = input;
    const double reach = world_.config.max_reach;
    for (Hand h : kHands) {
        Pose& p = b.hand(h);
        const Vec3 d = p.position - b.head.position;
        const double n = d.norm();
        if (n > reach) {
            p.position = b.head.position + d * (reach / n);
        }
    }
    return b;
}

void Engine::solve_clone(Clone& c, std::vector<GrabIntent>& intents) {
    const double dt = world_.config.tick_period();
    if (auto* s = std::get_if<SynchronousMode>(&c.mode)) {
        const BodyFrame& user = world_.avatar.body;
        const RigidTransform inv_u = inverse(s->user_anchor);
        const auto solve = [&](const Pose& p) { return solve_joint(p, inv_u, s->clone_anchor, c.scale, c.mirror); };
        c.root = s->clone_anchor;
        c.body.head = solve(user.head);
        if (c.mirror) {
            c.body.left_hand = solve(user.right_hand);
            c.body.right_hand = solve(user.left_hand);
            c.body.left_grab = user.right_grab;
            c.body.right_grab = user.left_grab;
        } else {
            c.body.left_hand = solve(user.left_hand);
            c.body.right_hand = solve(user.right_hand);
            c.body.left_grab = user.left_grab;
            c.body.right_grab = user.right_grab;
        }
        auto [it, fresh] = prev_clone_grab_.try_emplace(c.id, std::array<bool, 2>{c.body.left_grab, c.body.right_grab});
        for (Hand h : kHands) {
            bool& prev = it->second[index_of(h)];
            if (!fresh && prev != c.body.grab(h)) {
                intents.push_back({c.id, h, c.body.grab(h) ? GrabKind::Grab : GrabKind::Release});
            }
            prev = c.body.grab(h);
        }
        return;
    }
    if (auto* r = std::get_if<ReplayedMode>(&c.mode)) {
        const Recording& rec = store_.get(r->recording);
        const double u = static_cast<double>(world_.tick - r->started_at_tick) * dt - r->phase;
        const RecordingSample smp = sample_recording(rec, u, SampleMode::Loop);
        BodyFrame local = smp.body;
        RigidTransform root = smp.root;
        if (c.scale != 1.0) {
            local.head.position = local.head.position * c.scale;
            local.left_hand.position = local.left_hand.position * c.scale;
            local.right_hand.position = local.right_hand.position * c.scale;
            root.translation = root.translation * c.scale;
        }
        c.root = compose(r->anchor, root);
        c.body = apply(r->anchor, local);
        for (const RecordedEvent* e : events_in_window(rec, u - dt, u, SampleMode::Loop)) {
            if (e->kind == RecordedEvent::Kind::Grab) {
                intents.push_back({c.id, e->hand, GrabKind::Grab});
            } else if (e->kind == RecordedEvent::Kind::Release) {
                intents.push_back({c.id, e->hand, GrabKind::Release});
            }
        }
    }
    prev_clone_grab_[c.id] = {c.body.left_grab, c.body.right_grab};
}

TickEvents Engine::tick_update(const BodyFrame& input, double dt) {
    if (std::abs(dt - world_.config.tick_period()) > 1e-12) {
        throw EngineError(ErrorCode::BadTimestep, "dt must equal 1 / tick_rate");
    }
    if (!finite_pose(input.head) || !finite_pose(input.left_hand) || !finite_pose(input.right_hand)) {
        throw EngineError(ErrorCode::InvalidArgument, "input body frame must be finite");
    }
    TickEvents ev;
    ev.tick = world_.tick;

    // 1. queued commands, then commands a self replay fires this tick
    while (!queue_.empty()) {
        auto [token, c] = std::move(queue_.front());
        queue_.pop_front();
        run_command(c, token, false, ev);
    }
    std::optional<std::uint64_t> replay_step;
    if (self_replay_) {
        const Recording& rec = store_.get(self_replay_->recording);
        const std::uint64_t m = world_.tick - self_replay_->started_at_tick;
        replay_step = m;
        const double u = static_cast<double>(m) * dt;
        for (const RecordedEvent* e : events_in_window(rec, u - dt, u, SampleMode::Clamp)) {
            if (e->kind != RecordedEvent::Kind::Command) {
                continue;
            }
            try {
                const EngineCommand c = from_root_relative(self_replay_->bindings.resolve(*e->command), world_.avatar.root);
                run_command(c, 0, true, ev);
            } catch (const EngineError& err) {
                CommandOutcome o;
                o.op = std::string(command_name(e->command->command));
                o.replayed = true;
                o.error = err.code();
                o.detail = err.what();
                ev.commands.push_back(std::move(o));
            }
        }
    }

    // 2. avatar input
    AvatarState& av = world_.avatar;
    if (self_replay_) {
        const Recording& rec = store_.get(self_replay_->recording);
        const std::uint64_t m = world_.tick - self_replay_->started_at_tick;
        const RecordingSample smp = sample_recording(rec, static_cast<double>(m + 1) * dt, SampleMode::Clamp);
        av.local = body_to_local(smp.body, smp.root, av.scale);
    } else {
        BodyFrame in = input;
        in.head.orientation = in.head.orientation.normalized();
        in.left_hand.orientation = in.left_hand.orientation.normalized();
        in.right_hand.orientation = in.right_hand.orientation.normalized();
        av.local = clamp_reach(in);
    }
    world_.refresh_avatar_body();

    // 3. clone solve
    std::vector<GrabIntent> intents;
    for (auto& [id, c] : world_.clones) {
        solve_clone(c, intents);
    }

    // 4. interaction
    update_attachments(world_, dt);
    for (Hand h : kHands) {
        const bool now = av.body.grab(h);
        bool& prev = prev_avatar_grab_[index_of(h)];
        if (now != prev) {
            intents.push_back({av.body_id, h, now ? GrabKind::Grab : GrabKind::Release});
            recorder_.record_grab_edge(h, now);
        }
        prev = now;
    }
    ev.grabs = resolve_grabs(world_, std::move(intents));
    for (const auto& g : ev.grabs) {
        if (g.kind == GrabKind::Grab && !g.object) {
            auto it = world_.clones.find(g.holder);
            if (it != world_.clones.end() && std::holds_alternative<ReplayedMode>(it->second.mode)) {
                spdlog::debug("tick {}: replayed grab by clone {} found nothing, skipped", world_.tick, g.holder.value);
            }
        }
    }
    settle_free_objects(world_, dt);

    // 5. contact rules
    ev.contacts = contacts_.process(world_, rules_);

    // 6. record and advance
    recorder_.append_frame(av);
    if (self_replay_ && replay_step) {
        const Recording& rec = store_.get(self_replay_->recording);
        if (*replay_step + 1 >= rec.frames.size()) {
            self_replay_.reset();
            ev.self_replay_finished = true;
        }
    }
    ++world_.tick;
    return ev;
}

json command_outcome_json(const CommandOutcome& o) {
    json j{{"token", o.token}, {"op", o.op}, {"replayed", o.replayed}, {"ok", o.ok()}};
    if (o.result) {
        j["result"] = result_to_json(*o.result);
    }
    if (o.error) {
        j["error"] = std::string(to_string(*o.error));
        j["detail"] = o.detail;
    }
    return j;
}

json tick_events_json(const TickEvents& ev) {
    json commands = json::array();
    for (const auto& c : ev.commands) {
        commands.push_back(command_outcome_json(c));
    }
    json grabs = json::array();
    for (const auto& g : ev.grabs) {
        grabs.push_back(json{{"holder", g.holder.value},
                             {"hand", std::string(hand_name(g.hand))},
                             {"kind", g.kind == GrabKind::Grab ? "grab" : "release"},
                             {"object", g.object ? json(g.object->value) : json(nullptr)}});
    }
    json contacts = json::array();
    for (const auto& c : ev.contacts) {
        contacts.push_back(contact_event_json(c));
    }
    json transitions = json::array();
    for (const auto& t : ev.transitions) {
        transitions.push_back(transition_json(t, Precision::Wire));
    }
    json stopped = json::array();
    for (auto id : ev.recordings_stopped) {
        stopped.push_back(id.value);
    }
    return json{{"tick", ev.tick},
                {"commands", commands},
                {"grabs", grabs},
                {"contacts", contacts},
                {"transitions", transitions},
                {"recording_started", ev.recording_started},
                {"recordings_stopped", stopped},
                {"self_replay_finished", ev.self_replay_finished}};
}

}  // namespace clonemator
