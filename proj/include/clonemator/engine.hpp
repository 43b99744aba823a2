#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clonemator/commands.hpp"
#include "clonemator/error.hpp"
#include "clonemator/interaction.hpp"
#include "clonemator/recorder.hpp"
#include "clonemator/world.hpp"
#include "clonemator/world_io.hpp"

namespace clonemator {

struct CommandOutcome {
    std::uint64_t token = 0;  // 0 for commands replayed from a recording
    std::string op;
    bool replayed = false;
    std::optional<CommandResult> result;
    std::optional<ErrorCode> error;
    std::string detail;

    bool ok() const { return !error.has_value(); }
};

struct TickEvents {
    std::uint64_t tick = 0;
    std::vector<CommandOutcome> commands;
    std::vector<GrabOutcome> grabs;
    std::vector<ContactEvent> contacts;
    std::vector<SwitchTransition> transitions;
    std::vector<RecordingId> recordings_stopped;
    bool recording_started = false;
    bool self_replay_finished = false;
};

struct SelfReplay {
    RecordingId recording;
    std::uint64_t started_at_tick = 0;
    ReplayBindings bindings;
};

class Engine {
public:
    explicit Engine(WorldConfig cfg = {});
    explicit Engine(World w);

    World& world() { return world_; }
    const World& world() const { return world_; }
    RecordingStore& recordings() { return store_; }
    const RecordingStore& recordings() const { return store_; }
    const Recorder& recorder() const { return recorder_; }
    std::vector<ContactRule>& contact_rules() { return rules_; }
    const std::vector<ContactRule>& contact_rules() const { return rules_; }
    const std::optional<SelfReplay>& self_replay() const { return self_replay_; }
    std::size_t undo_depth() const { return undo_.size(); }

    // Runs a command now, outside the tick loop. Throws EngineError.
    CommandResult execute(const EngineCommand& c);

    // Queues a command for step 1 of the next tick; returns its token.
    std::uint64_t enqueue(EngineCommand c);
    std::size_t queued() const { return queue_.size(); }

    // One fixed step. dt must equal 1 / config.tick_rate.
    TickEvents tick_update(const BodyFrame& input, double dt);
    TickEvents step(const BodyFrame& input) { return tick_update(input, world_.config.tick_period()); }

    // Individual operations; execute() dispatches to these.
    EntityId spawn_direct();
    EntityId spawn_indirect(const Pose& target, SnapChoice snap, double scale = 1.0);
    std::vector<EntityId> spawn_auto(EntityId selected);
    EntityId spawn_relative(EntityId reference, EntityId target);
    void set_mode(EntityId clone, const ModeRequest& mode);
    void set_mirror(EntityId clone, bool on);
    void set_scale(EntityId clone, double s);
    SwitchTransition switch_control(EntityId target);
    GroupId set_group(std::vector<EntityId> members);
    void move(EntityId target, const RigidTransform& new_root);
    std::pair<std::vector<EntityId>, std::optional<GroupId>> duplicate(std::variant<EntityId, GroupId> target,
                                                                       const RigidTransform& placement);
    void remove_clone(EntityId target);
    void undo();
    void avatar_locomote(const Locomotion& kind);
    void step_onto(EntityId target);
    void start_recording(RecordingScope scope);
    RecordingId stop_recording();
    void apply_recording(RecordingId id, const ApplyTarget& target);

    // Root-local offset at which removed clones drop their objects.
    static constexpr Vec3 kDropOffset{0.0, 1.0, 0.5};

private:
    struct UndoEntry {
        std::string kind;
        std::vector<EntityId> created_clones;
        std::vector<EntityId> created_objects;
        std::vector<GroupId> created_groups;
        std::vector<Attachment> prior_attachments;  // attachments the command moved away
        std::map<EntityId, WorldObject> prior_objects;
        std::map<EntityId, Clone> prior_clones;
        std::optional<RigidTransform> prior_root;
        std::optional<RigidTransform> post_root;
        std::map<EntityId, std::pair<RigidTransform, RigidTransform>> anchors;  // clone -> (before, after)
        Digest hash_before{};
    };

    CommandResult dispatch(const EngineCommand& c);
    void run_command(const EngineCommand& c, std::uint64_t token, bool replayed, TickEvents& ev);

    // Moves the avatar root and carries every synchronous user anchor along.
    void relocate_avatar(const RigidTransform& new_root, UndoEntry* undo = nullptr);
    EntityId make_clone(Clone c);
    void copy_held_objects(EntityId from, EntityId to, const RigidTransform& delta, UndoEntry& undo);
    void drop_from_group(EntityId clone);

    void solve_clone(Clone& c, std::vector<GrabIntent>& intents);
    BodyFrame clamp_reach(const BodyFrame& input) const;
    void check_scale(double s) const;

    World world_;
    RecordingStore store_;
    Recorder recorder_;
    ContactTracker contacts_;
    std::vector<ContactRule> rules_;
    std::vector<UndoEntry> undo_;
    std::deque<std::pair<std::uint64_t, EngineCommand>> queue_;
    std::uint64_t next_token_ = 1;
    std::optional<SelfReplay> self_replay_;
    std::array<bool, 2> prev_avatar_grab_{false, false};
    std::map<EntityId, std::array<bool, 2>> prev_clone_grab_;
};

// Inverse of the avatar body placement: root-relative, unscaled joints.
BodyFrame body_to_local(const BodyFrame& world_body, const RigidTransform& root, double scale);

json tick_events_json(const TickEvents& ev);
json command_outcome_json(const CommandOutcome& o);

}  // namespace clonemator
