#include "clonemator/interaction.hpp"

#include <algorithm>
#include <cmath>

#include "clonemator/error.hpp"

namespace clonemator {

std::optional<EntityId> grab(World& w, EntityId holder, Hand hand) {
    if (w.held_by(holder, hand)) {
        throw EngineError(ErrorCode::HandOccupied,
                          "holder " + std::to_string(holder.value) + " " + std::string(hand_name(hand)) + " hand is full");
    }
    const Pose& hp = w.body_of(holder).hand(hand);
    std::optional<EntityId> best;
    double best_d = 0.0;
    for (const auto& [id, obj] : w.objects) {
        if (!obj.grabbable || w.attachment_for(id)) {
            continue;
        }
        const double d = distance(hp.position, obj.pose.position);
        if (d <= w.config.grab_radius && (!best || d < best_d)) {
            best = id;
            best_d = d;
        }
    }
    if (!best) {
        return std::nullopt;
    }
    WorldObject& obj = w.objects.at(*best);
    w.attachments.push_back({*best, holder, hand, compose(inverse(to_transform(hp)), to_transform(obj.pose))});
    obj.free = false;
    obj.velocity = Vec3::zero();
    return best;
}

std::optional<EntityId> release(World& w, EntityId holder, Hand hand) {
    auto it = std::find_if(w.attachments.begin(), w.attachments.end(),
                           [&](const Attachment& a) { return a.holder == holder && a.hand == hand; });
    if (it == w.attachments.end()) {
        return std::nullopt;
    }
    const EntityId id = it->object;
    w.attachments.erase(it);
    WorldObject& obj = w.objects.at(id);
    obj.free = true;
    if (!w.config.ballistic) {
        obj.velocity = Vec3::zero();
    }
    return id;
}

std::vector<GrabOutcome> resolve_grabs(World& w, std::vector<GrabIntent> intents) {
    std::stable_sort(intents.begin(), intents.end(), [](const GrabIntent& a, const GrabIntent& b) {
        if (a.kind != b.kind) {
            return a.kind == GrabKind::Release;
        }
        return a.holder < b.holder;
    });
    std::vector<GrabOutcome> out;
    for (const auto& in : intents) {
        if (!w.is_body(in.holder)) {
            continue;
        }
        GrabOutcome o{in.holder, in.hand, in.kind, std::nullopt};
        if (in.kind == GrabKind::Release) {
            o.object = release(w, in.holder, in.hand);
        } else if (!w.held_by(in.holder, in.hand)) {
            o.object = grab(w, in.holder, in.hand);
        } else {
            continue;
        }
        out.push_back(o);
    }
    return out;
}

void update_attachments(World& w, double dt) {
    for (const auto& a : w.attachments) {
        WorldObject& obj = w.objects.at(a.object);
        const Vec3 before = obj.pose.position;
        const Pose& hand = w.body_of(a.holder).hand(a.hand);
        obj.pose = apply(to_transform(hand), to_pose(a.grip));
        obj.velocity = (obj.pose.position - before) / dt;
    }
}

void settle_free_objects(World& w, double dt) {
    for (auto& [id, obj] : w.objects) {
        if (!obj.free || w.attachment_for(id)) {
            continue;
        }
        obj.velocity.y -= w.config.gravity * dt;
        if (!w.config.ballistic) {
            obj.velocity.x = 0.0;
            obj.velocity.z = 0.0;
        }
        obj.pose.position += obj.velocity * dt;
        if (obj.pose.position.y <= 0.0) {
            obj.pose.position.y = 0.0;
            obj.velocity = Vec3::zero();
            obj.free = false;
        }
    }
}

bool predicate_met(const ContactPredicate& p, const WorldObject& actor, const WorldObject& target) {
    if (distance(actor.pose.position, target.pose.position) > p.max_distance) {
        return false;
    }
    const Vec3 rel = actor.velocity - target.velocity;
    const double speed = p.direction ? rel.dot(*p.direction) : rel.norm();
    return speed >= p.min_relative_speed;
}

std::vector<ContactEvent> ContactTracker::process(World& w, const std::vector<ContactRule>& rules) {
    std::vector<ContactEvent> events;
    std::set<std::tuple<std::size_t, EntityId, EntityId>> now;
    for (std::size_t ri = 0; ri < rules.size(); ++ri) {
        const ContactRule& rule = rules[ri];
        for (const auto& a : w.attachments) {
            const WorldObject& actor = w.objects.at(a.object);
            if (actor.tag != rule.actor_tag) {
                continue;
            }
            for (auto& [tid, target] : w.objects) {
                if (tid == actor.id || target.tag != rule.target_tag || !predicate_met(rule.predicate, actor, target)) {
                    continue;
                }
                auto key = std::make_tuple(ri, actor.id, tid);
                now.insert(key);
                if (latched_.contains(key)) {
                    continue;
                }
                events.push_back({w.tick, rule.name, actor.id, tid});
                if (rule.effect) {
                    target.scalar_state[rule.effect->key] += rule.effect->delta;
                }
            }
        }
    }
    latched_ = std::move(now);
    std::sort(events.begin(), events.end(), [](const ContactEvent& x, const ContactEvent& y) {
        return std::tie(x.rule, x.actor, x.target) < std::tie(y.rule, y.actor, y.target);
    });
    return events;
}

ContactRule contact_rule_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"name", "actor_tag", "target_tag", "max_distance", "min_relative_speed", "direction", "effect"}, path);
    ContactRule r;
    r.name = string_at(j, "name", path);
    r.actor_tag = string_at(j, "actor_tag", path);
    r.target_tag = string_at(j, "target_tag", path);
    r.predicate.max_distance = number_at(j, "max_distance", path);
    if (!(r.predicate.max_distance > 0.0)) {
        throw EngineError(ErrorCode::ValidationError, path + ".max_distance: must be positive");
    }
    r.predicate.min_relative_speed = number_or(j, "min_relative_speed", 0.0, path);
    if (j.contains("direction")) {
        const Vec3 d = vec3_from_json(j["direction"], path + ".direction");
        if (d.norm() < 1e-12) {
            throw EngineError(ErrorCode::ValidationError, path + ".direction: must be non-zero");
        }
        r.predicate.direction = d / d.norm();
    }
    if (j.contains("effect")) {
        const json& e = j["effect"];
        const std::string ep = path + ".effect";
        require_object(e, ep);
        check_keys(e, {"key", "delta"}, ep);
        r.effect = ContactEffect{string_at(e, "key", ep), number_at(e, "delta", ep)};
    }
    return r;
}

json contact_rule_to_json(const ContactRule& r) {
    json j{{"name", r.name},
           {"actor_tag", r.actor_tag},
           {"target_tag", r.target_tag},
           {"max_distance", r.predicate.max_distance},
           {"min_relative_speed", r.predicate.min_relative_speed}};
    if (r.predicate.direction) {
        j["direction"] = vec3_json(*r.predicate.direction);
    }
    if (r.effect) {
        j["effect"] = json{{"key", r.effect->key}, {"delta", r.effect->delta}};
    }
    return j;
}

json contact_event_json(const ContactEvent& e) {
    return json{{"tick", e.tick}, {"rule", e.rule}, {"actor", e.actor.value}, {"target", e.target.value}};
}

}  // namespace clonemator
