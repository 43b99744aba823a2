#include <doctest.h>

#include <cmath>

#include "clonemator/engine.hpp"
#include "support.hpp"

using namespace clonemator;
using namespace clonemator::testing;

namespace {

constexpr double kTol = 1e-9;

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const EngineError& e) {
        return e.code();
    }
    FAIL("expected EngineError");
    return ErrorCode::InvalidArgument;
}

// Two-second arm wave, periodic in ticks.
BodyFrame wave(std::uint64_t tick) {
    BodyFrame b = neutral_body();
    const double a = 2.0 * std::numbers::pi * static_cast<double>(tick % 120) / 120.0;
    b.right_hand.position = {-0.4, 1.4 + 0.3 * std::sin(a), 0.2 + 0.1 * std::cos(a)};
    b.left_hand.position = {0.4, 1.4 - 0.3 * std::sin(a), 0.2};
    return b;
}

RecordingId record_wave(Engine& e, std::uint64_t& tick, int frames_after_start = 120) {
    e.start_recording(RecordingScope::PosesAndGrabs);
    for (int i = 0; i < frames_after_start; ++i) {
        e.step(wave(tick++));
    }
    return e.stop_recording();
}

Recording linear_recording(int frames) {
    Recording r;
    r.tick_rate = 60.0;
    for (int i = 0; i < frames; ++i) {
        RecordedFrame f;
        f.t = i / 60.0;
        f.body = neutral_body();
        f.body.right_hand.position.x = static_cast<double>(i);
        r.frames.push_back(f);
    }
    return r;
}

}  // namespace

TEST_CASE("120 ticks at 60 Hz record 121 frames lasting 2 s") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId id = record_wave(e, t);
    const Recording& r = e.recordings().get(id);
    CHECK(r.frames.size() == 121);
    CHECK(r.duration() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("recorder state errors") {
    Engine e;
    e.step(neutral_body());
    CHECK(code_of([&] { e.stop_recording(); }) == ErrorCode::NotRecording);
    e.start_recording(RecordingScope::PosesAndGrabs);
    CHECK(code_of([&] { e.start_recording(RecordingScope::Extended); }) == ErrorCode::AlreadyRecording);
    CHECK(code_of([&] { e.stop_recording(); }) == ErrorCode::EmptyRecording);
    CHECK_FALSE(e.recorder().active());
}

TEST_CASE("frames are stored relative to the starting root") {
    Rng rng(41);
    std::optional<std::vector<RecordedFrame>> first;
    for (int i = 0; i < 5; ++i) {
        Engine e;
        e.world().avatar.root = random_yaw_transform(rng);
        e.world().refresh_avatar_body();
        e.step(neutral_body());
        e.start_recording(RecordingScope::PosesAndGrabs);
        for (int k = 0; k < 10; ++k) {
            e.step(neutral_body());
        }
        const Recording& r = e.recordings().get(e.stop_recording());
        if (!first) {
            first = r.frames;
            continue;
        }
        REQUIRE(r.frames.size() == first->size());
        for (std::size_t k = 0; k < r.frames.size(); ++k) {
            CHECK(approx_equal(r.frames[k].body, (*first)[k].body, kTol));
            CHECK(approx_equal(r.frames[k].root, (*first)[k].root, kTol));
        }
    }
}

TEST_CASE("recording store listing") {
    Engine e;
    CHECK(e.recordings().list().empty());
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId a = record_wave(e, t, 30);
    const RecordingId b = record_wave(e, t, 60);
    const auto list = e.recordings().list();
    REQUIRE(list.size() == 2);
    CHECK(list[0].id == a);
    CHECK(list[1].id == b);
    CHECK(a < b);
    CHECK(list[0].duration == doctest::Approx(0.5));
    CHECK(list[1].duration == doctest::Approx(1.0));
    CHECK(list[1].frame_count == 61);
}

TEST_CASE("sampling: loop wrap, exact frames, start") {
    const Recording r = linear_recording(121);
    CHECK(sample_recording(r, 2.5, SampleMode::Loop).body == sample_recording(r, 0.5, SampleMode::Loop).body);
    CHECK(sample_recording(r, 30.0 / 60.0, SampleMode::Loop).body == r.frames[30].body);
    CHECK(sample_recording(r, 0.0, SampleMode::Loop).body == r.frames[0].body);
    CHECK(sample_recording(r, 5.0, SampleMode::Clamp).body == r.frames.back().body);
    CHECK(sample_recording(r, 10.5 / 60.0, SampleMode::Loop).body.right_hand.position.x ==
          doctest::Approx(10.5).epsilon(1e-12));
}

TEST_CASE("loop closure: tau and tau + duration sample alike") {
    const Recording r = linear_recording(121);
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        const double tau = rng.uniform(0.0, 2.0);
        CHECK(approx_equal(sample_recording(r, tau, SampleMode::Loop).body,
                           sample_recording(r, tau + r.duration(), SampleMode::Loop).body, kTol));
    }
}

TEST_CASE("looped events fire once per traversal") {
    Recording r = linear_recording(121);
    for (double t : {0.0, 0.5, 1.25, 2.0}) {
        RecordedEvent e;
        e.t = t;
        e.kind = RecordedEvent::Kind::Grab;
        r.events.push_back(e);
    }
    const double dt = 1.0 / 60.0;
    int total = 0;
    for (int k = 0; k < 10 * 120; ++k) {
        total += static_cast<int>(events_in_window(r, (k - 1) * dt, k * dt, SampleMode::Loop).size());
    }
    // The event at 2.0 lands on the seam with 0.0 but is still its own event.
    CHECK(total == 40);
}

TEST_CASE("a recording applied to a clone loops around the clone's own root") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId id = record_wave(e, t);
    const EntityId c = e.spawn_indirect({{3, 0, 2}, Quat::from_yaw_deg(90)}, SnapChoice::None);
    const RigidTransform root = e.world().clone(c).root;
    e.apply_recording(id, ApplyToClone{c});
    const Recording& r = e.recordings().get(id);
    for (int k = 0; k < 300; ++k) {
        e.step(neutral_body());
        const BodyFrame expected = apply(root, sample_recording(r, k / 60.0, SampleMode::Loop).body);
        CHECK(approx_equal(e.world().clone(c).body, expected, kTol));
    }
}

TEST_CASE("set_mode replayed starts at frame zero") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId id = record_wave(e, t);
    const EntityId c = e.spawn_indirect({{0, 0, 3}, {}}, SnapChoice::None);
    e.set_mode(c, {ModeKind::Replayed, id, 0.0});
    e.step(neutral_body());
    const Recording& r = e.recordings().get(id);
    CHECK(approx_equal(e.world().clone(c).body, apply(e.world().clone(c).root, r.frames[0].body), kTol));
    CHECK(code_of([&] { e.set_mode(c, {ModeKind::Replayed, id, 2.0}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { e.set_mode(c, {ModeKind::Replayed, RecordingId{99}, 0.0}); }) == ErrorCode::UnknownRecording);
}

TEST_CASE("group replay staggers phases by the step") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId id = record_wave(e, t);
    std::vector<EntityId> members;
    for (int i = 0; i < 4; ++i) {
        members.push_back(e.spawn_indirect({{i * 1.5, 0, 3}, Quat::from_yaw_deg(180)}, SnapChoice::None));
    }
    const GroupId g = e.set_group(members);
    e.apply_recording(id, ApplyToGroup{g, 0.5});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::get<ReplayedMode>(e.world().clone(members[i]).mode).phase == doctest::Approx(0.5 * i));
    }

    std::vector<std::vector<BodyFrame>> local(4);
    for (int k = 0; k < 360; ++k) {
        e.step(neutral_body());
        for (std::size_t i = 0; i < 4; ++i) {
            const Clone& c = e.world().clone(members[i]);
            local[i].push_back(body_to_local(c.body, c.root, 1.0));
        }
    }
    for (std::size_t i = 1; i < 4; ++i) {
        for (int k = 200; k < 360; ++k) {
            CHECK(approx_equal(local[i][k], local[0][k - 30 * static_cast<int>(i)], kTol));
        }
    }
}

TEST_CASE("teleport automator: replaying spawn, switch, remove moves the user by the demonstrated offset") {
    Engine e;
    e.step(neutral_body());
    e.start_recording(RecordingScope::Extended);
    e.step(neutral_body());
    const EntityId ahead = e.execute(cmd::SpawnIndirect{{{0, 0, 3}, {}}}).entities.at(0);
    e.step(neutral_body());
    const EntityId old_body = e.world().avatar.body_id;
    e.execute(cmd::SwitchControl{ahead});
    e.step(neutral_body());
    e.execute(cmd::RemoveClone{old_body});
    e.step(neutral_body());
    const RecordingId id = e.stop_recording();

    Rng rng(43);
    for (int pass = 0; pass < 5; ++pass) {
        const RigidTransform start = e.world().avatar.root;
        const std::size_t clones = e.world().clones.size();
        e.apply_recording(id, ApplyToSelf{});
        CHECK(code_of([&] { e.apply_recording(id, ApplyToSelf{}); }) == ErrorCode::SelfReplayActive);
        for (int k = 0; k < 10; ++k) {
            e.step(neutral_body());
        }
        CHECK_FALSE(e.self_replay().has_value());
        CHECK(e.world().clones.size() == clones);
        CHECK(approx_equal(e.world().avatar.root, compose(start, RigidTransform::translate({0, 0, 3})), kTol));
        e.avatar_locomote(Rotate{rng.uniform(-180, 180)});
    }
}

TEST_CASE("self replay of a pose recording needs the opt-in") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    const RecordingId id = record_wave(e, t, 10);
    CHECK(code_of([&] { e.apply_recording(id, ApplyToSelf{}); }) == ErrorCode::ScopeViolation);
}

TEST_CASE("recordings survive a JSON round trip") {
    Engine e;
    std::uint64_t t = 0;
    e.step(wave(t++));
    e.start_recording(RecordingScope::Extended);
    e.step(wave(t++));
    e.spawn_indirect({{1, 0, 1}, {}}, SnapChoice::Grid);
    e.step(wave(t++));
    const Recording& r = e.recordings().get(e.stop_recording());
    const Recording back = recording_from_json(recording_to_json(r));
    CHECK(recording_to_json(back) == recording_to_json(r));
    CHECK(back.events.size() == r.events.size());
}
