#pragma once

#include <map>
#include <optional>
#include <vector>

#include "clonemator/commands.hpp"
#include "clonemator/world.hpp"

namespace clonemator {

// Both fields are relative to the recording anchor (the avatar root at start).
struct RecordedFrame {
    double t = 0.0;
    BodyFrame body;
    RigidTransform root;
};

// How an id inside a recorded command is resolved when the command is replayed.
struct EntityRef {
    enum class Kind { Literal, StartBody, Created, CreatedGroup };
    Kind kind = Kind::Literal;
    std::uint64_t value = 0;  // literal id, or index into the pass's created list

    bool operator==(const EntityRef&) const = default;
};

struct RecordedCommand {
    EngineCommand command;  // spatial arguments relative to the avatar root at issue time
    std::vector<EntityRef> refs;  // one per id slot, in visit_ids order
};

struct RecordedEvent {
    enum class Kind { Grab, Release, Command };
    double t = 0.0;
    std::uint64_t tick = 0;  // ticks since the recording started
    Kind kind = Kind::Grab;
    Hand hand = Hand::Right;
    std::optional<RecordedCommand> command;
};

struct Recording {
    RecordingId id;
    RecordingScope scope = RecordingScope::PosesAndGrabs;
    double tick_rate = 60.0;
    std::vector<RecordedFrame> frames;
    std::vector<RecordedEvent> events;  // ascending t

    double duration() const { return frames.empty() ? 0.0 : frames.back().t; }
};

struct RecordingSummary {
    RecordingId id;
    double duration = 0.0;
    RecordingScope scope = RecordingScope::PosesAndGrabs;
    std::size_t frame_count = 0;
};

class RecordingStore {
public:
    RecordingId add(Recording r);
    // Keeps the id already set on r; used when loading fixtures.
    void insert(Recording r);
    const Recording& get(RecordingId id) const;
    bool contains(RecordingId id) const { return recordings_.contains(id); }
    std::vector<RecordingSummary> list() const;
    std::size_t size() const { return recordings_.size(); }

private:
    std::map<RecordingId, Recording> recordings_;
    std::uint64_t next_ = 1;
};

enum class SampleMode { Loop, Clamp };

struct RecordingSample {
    BodyFrame body;
    RigidTransform root;
};

// Loop wraps local_t into [0, duration); Clamp holds the end frames.
RecordingSample sample_recording(const Recording& r, double local_t, SampleMode mode);

// Events whose timestamp falls in (from, to]. In Loop mode event times repeat
// with period duration and an event at t = duration coincides with t = 0.
std::vector<const RecordedEvent*> events_in_window(const Recording& r, double from, double to, SampleMode mode);

struct RecorderStatus {
    bool active = false;
    RecordingScope scope = RecordingScope::PosesAndGrabs;
    std::size_t frames = 0;
};

class Recorder {
public:
    // Captures frame 0 from the avatar immediately.
    void start(const AvatarState& avatar, RecordingScope scope, double tick_rate);
    // Appends the avatar's state as the next frame.
    void append_frame(const AvatarState& avatar);
    void record_grab_edge(Hand hand, bool grabbed);
    // Records an executed command and remembers what it created. Only Extended recordings keep commands.
    void record_command(const EngineCommand& c, const CommandResult& result, const RigidTransform& avatar_root);
    Recording stop();
    void cancel() { state_.reset(); }

    bool active() const { return state_.has_value(); }
    RecorderStatus status() const;

private:
    struct State {
        RecordingScope scope;
        double tick_rate;
        RigidTransform anchor;
        EntityId start_body;
        std::vector<RecordedFrame> frames;
        std::vector<RecordedEvent> events;
        std::vector<EntityId> created;
        std::vector<GroupId> created_groups;
    };
    RecordedFrame frame_of(const AvatarState& avatar) const;

    std::optional<State> state_;
};

// Resolves recorded references for one replay pass.
struct ReplayBindings {
    EntityId start_body;
    std::vector<EntityId> created;
    std::vector<GroupId> created_groups;

    EngineCommand resolve(const RecordedCommand& rc) const;
    void note(const CommandResult& result);
};

json recording_to_json(const Recording& r);
Recording recording_from_json(const json& j, const std::string& path = "recording");

}  // namespace clonemator
