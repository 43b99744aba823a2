#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clonemator/geometry.hpp"

namespace clonemator {

struct EntityId {
    std::uint64_t value = 0;
    constexpr auto operator<=>(const EntityId&) const = default;
};

struct GroupId {
    std::uint64_t value = 0;
    constexpr auto operator<=>(const GroupId&) const = default;
};

struct RecordingId {
    std::uint64_t value = 0;
    constexpr auto operator<=>(const RecordingId&) const = default;
};

enum class Hand { Left, Right };

inline constexpr std::array<Hand, 2> kHands{Hand::Left, Hand::Right};
inline constexpr Hand other(Hand h) { return h == Hand::Left ? Hand::Right : Hand::Left; }
inline constexpr int index_of(Hand h) { return h == Hand::Left ? 0 : 1; }

// Three tracked points: head plus both hands. Legs are not tracked.
struct BodyFrame {
    Pose head;
    Pose left_hand;
    Pose right_hand;
    bool left_grab = false;
    bool right_grab = false;

    Pose& hand(Hand h) { return h == Hand::Left ? left_hand : right_hand; }
    const Pose& hand(Hand h) const { return h == Hand::Left ? left_hand : right_hand; }
    bool& grab(Hand h) { return h == Hand::Left ? left_grab : right_grab; }
    bool grab(Hand h) const { return h == Hand::Left ? left_grab : right_grab; }

    bool operator==(const BodyFrame&) const = default;
};

BodyFrame apply(const RigidTransform& t, const BodyFrame& body);
BodyFrame interp_body(const BodyFrame& a, const BodyFrame& b, double u);  // grab flags taken from a
bool approx_equal(const BodyFrame& a, const BodyFrame& b, double tol);
double max_deviation(const BodyFrame& a, const BodyFrame& b);

// Body-local rest pose: head 1.6 m above the root, hands at the sides.
// Facing +z with +y up, the body's left side is +x.
BodyFrame neutral_body();

struct WorldConfig {
    double tick_rate = 60.0;            // Hz
    double arm_length = 0.75;           // m, grid cell and nearest-object standoff
    double grab_radius = 0.25;          // m
    double backward_offset = 0.5;       // m, avatar retreat on direct spawn
    double snap_search_radius = 3.0;    // m
    double gravity = 9.81;              // m/s^2
    double max_reach = 1.2;             // m, tracked hand distance from head
    double standing_height = 1.6;       // m, head above root for spawned neutral bodies
    bool ballistic = false;             // released objects keep their hand velocity
    bool allow_pose_self_replay = false;

    double tick_period() const { return 1.0 / tick_rate; }
    // Throws EngineError(InvalidArgument) when a value is non-positive.
    void validate() const;
};

struct WorldObject {
    EntityId id;
    std::string tag;
    Pose pose;
    bool grabbable = false;
    std::map<std::string, double> scalar_state;
    Vec3 velocity;
    bool free = false;  // released and not yet settled on the ground
};

struct StaticMode {
    bool operator==(const StaticMode&) const = default;
};

struct SynchronousMode {
    RigidTransform user_anchor;   // avatar root when tracking began
    RigidTransform clone_anchor;  // clone root when tracking began
    bool operator==(const SynchronousMode&) const = default;
};

struct ReplayedMode {
    RecordingId recording;
    double phase = 0.0;  // delay in seconds, [0, duration)
    std::uint64_t started_at_tick = 0;
    RigidTransform anchor;  // recording anchor re-expressed at the clone
    bool operator==(const ReplayedMode&) const = default;
};

using CloneMode = std::variant<StaticMode, SynchronousMode, ReplayedMode>;

std::string_view mode_name(const CloneMode& mode);

struct Clone {
    EntityId id;
    CloneMode mode;
    RigidTransform root;  // yaw-only
    BodyFrame body;       // world space
    bool mirror = false;
    double scale = 1.0;
    std::optional<GroupId> group;
    int outline_color_index = 0;
};

struct Group {
    std::vector<EntityId> members;  // ascending
    int color_index = 0;
};

struct Attachment {
    EntityId object;
    EntityId holder;  // avatar body or clone
    Hand hand = Hand::Right;
    RigidTransform grip;  // object pose relative to the hand
};

struct AvatarState {
    EntityId body_id;
    RigidTransform root;  // yaw-only
    BodyFrame local;      // last tracked input, root-relative
    BodyFrame body;       // world space
    double scale = 1.0;
};

struct World {
    explicit World(WorldConfig cfg = {});

    WorldConfig config;
    std::uint64_t tick = 0;
    std::map<EntityId, WorldObject> objects;
    std::map<EntityId, Clone> clones;
    std::map<GroupId, Group> groups;
    std::vector<Attachment> attachments;
    AvatarState avatar;
    EntityId original_body;

    std::uint64_t next_entity = 1;
    std::uint64_t next_group = 1;

    EntityId allocate_entity() { return EntityId{next_entity++}; }
    GroupId allocate_group() { return GroupId{next_group++}; }

    EntityId add_object(const std::string& tag, const Pose& pose, bool grabbable);
    std::vector<EntityId> objects_by_tag(const std::string& tag) const;
    std::optional<EntityId> nearest_object(const Vec3& p, double radius,
                                           const std::optional<std::string>& filter = std::nullopt) const;

    // The clone the user has switched into, if the controlled body is not the original.
    std::optional<EntityId> controlled_clone() const;

    bool is_body(EntityId id) const { return id == avatar.body_id || clones.contains(id); }
    const WorldObject& object(EntityId id) const;
    WorldObject& object(EntityId id);
    const Clone& clone(EntityId id) const;
    Clone& clone(EntityId id);

    const BodyFrame& body_of(EntityId holder) const;
    const Attachment* attachment_for(EntityId object) const;
    std::optional<EntityId> held_by(EntityId holder, Hand hand) const;

    // Recomputes the avatar's world-space body from its root, scale and tracked input.
    void refresh_avatar_body();
    // Repositions every held object from its holder's hand and grip.
    void sync_attached_objects();
};

}  // namespace clonemator
