#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "clonemator/json_io.hpp"
#include "clonemator/world.hpp"

namespace clonemator {

struct ContactPredicate {
    double max_distance = 0.1;
    double min_relative_speed = 0.0;  // m/s
    std::optional<Vec3> direction;    // unit; speed is measured along it when set
};

struct ContactEffect {
    std::string key;
    double delta = 0.0;
};

struct ContactRule {
    std::string name;
    std::string actor_tag;
    std::string target_tag;
    ContactPredicate predicate;
    std::optional<ContactEffect> effect;  // applied to the target's scalar_state
};

struct ContactEvent {
    std::uint64_t tick = 0;
    std::string rule;
    EntityId actor;
    EntityId target;

    bool operator==(const ContactEvent&) const = default;
};

enum class GrabKind { Grab, Release };

struct GrabIntent {
    EntityId holder;
    Hand hand = Hand::Right;
    GrabKind kind = GrabKind::Grab;
};

struct GrabOutcome {
    EntityId holder;
    Hand hand = Hand::Right;
    GrabKind kind = GrabKind::Grab;
    std::optional<EntityId> object;  // empty when a grab found nothing in range
};

// Attaches the nearest grabbable, unheld object within grab_radius of the hand.
// Throws EngineError(HandOccupied) if the hand already holds something.
std::optional<EntityId> grab(World& w, EntityId holder, Hand hand);
// Detaches the hand's object and lets it fall. Velocity is kept only when
// config.ballistic is set.
std::optional<EntityId> release(World& w, EntityId holder, Hand hand);

// Releases first, then grabs, each in ascending holder id. Grabs on occupied
// hands are skipped.
std::vector<GrabOutcome> resolve_grabs(World& w, std::vector<GrabIntent> intents);

// Moves held objects to their hands and estimates their velocity over dt.
void update_attachments(World& w, double dt);

// Free objects fall under gravity and stop at y = 0.
void settle_free_objects(World& w, double dt);

ContactRule contact_rule_from_json(const json& j, const std::string& path);
json contact_rule_to_json(const ContactRule& r);
json contact_event_json(const ContactEvent& e);

// Contact events fire on the tick a (rule, actor, target) pair starts meeting
// its predicate and re-arm once it stops.
class ContactTracker {
public:
    std::vector<ContactEvent> process(World& w, const std::vector<ContactRule>& rules);
    void reset() { latched_.clear(); }

private:
    std::set<std::tuple<std::size_t, EntityId, EntityId>> latched_;
};

bool predicate_met(const ContactPredicate& p, const WorldObject& actor, const WorldObject& target);

}  // namespace clonemator
