#include "clonemator/recorder.hpp"

#include <algorithm>
#include <cmath>

#include "clonemator/error.hpp"

namespace clonemator {

namespace {

constexpr double kTimeEps = 1e-9;

std::string_view event_kind_name(RecordedEvent::Kind k) {
    switch (k) {
        case RecordedEvent::Kind::Grab: return "grab";
        case RecordedEvent::Kind::Release: return "release";
        case RecordedEvent::Kind::Command: return "command";
    }
    return "grab";
}

std::string_view ref_kind_name(EntityRef::Kind k) {
    switch (k) {
        case EntityRef::Kind::Literal: return "literal";
        case EntityRef::Kind::StartBody: return "start_body";
        case EntityRef::Kind::Created: return "created";
        case EntityRef::Kind::CreatedGroup: return "created_group";
    }
    return "literal";
}

RigidTransform interp_transform(const RigidTransform& a, const RigidTransform& b, double u) {
    return to_transform(interp_pose(to_pose(a), to_pose(b), u));
}

}  // namespace

RecordingId RecordingStore::add(Recording r) {
    r.id = RecordingId{next_++};
    const RecordingId id = r.id;
    recordings_.emplace(id, std::move(r));
    return id;
}

void RecordingStore::insert(Recording r) {
    if (r.id.value == 0 || recordings_.contains(r.id)) {
        throw EngineError(ErrorCode::ValidationError, "recording id " + std::to_string(r.id.value) + " is not free");
    }
    next_ = std::max(next_, r.id.value + 1);
    const RecordingId id = r.id;
    recordings_.emplace(id, std::move(r));
}

const Recording& RecordingStore::get(RecordingId id) const {
    auto it = recordings_.find(id);
    if (it == recordings_.end()) {
        throw EngineError(ErrorCode::UnknownRecording, "no recording " + std::to_string(id.value));
    }
    return it->second;
}

std::vector<RecordingSummary> RecordingStore::list() const {
    std::vector<RecordingSummary> out;
    for (const auto& [id, r] : recordings_) {
        out.push_back({id, r.duration(), r.scope, r.frames.size()});
    }
    return out;
}

RecordingSample sample_recording(const Recording& r, double local_t, SampleMode mode) {
    if (r.frames.empty()) {
        throw EngineError(ErrorCode::EmptyRecording, "recording has no frames");
    }
    const double d = r.duration();
    if (d <= 0.0) {
        return {r.frames.front().body, r.frames.front().root};
    }
    double tau = 0.0;
    if (mode == SampleMode::Loop) {
        tau = std::fmod(local_t, d);
        if (tau < 0.0) {
            tau += d;
        }
    } else {
        tau = std::clamp(local_t, 0.0, d);
    }
    const double k = tau * r.tick_rate;
    const double fl = std::floor(k + kTimeEps);
    const std::size_t last = r.frames.size() - 1;
    const std::size_t i = std::min(static_cast<std::size_t>(std::max(fl, 0.0)), last);
    const double u = k - static_cast<double>(i);
    if (i == last || std::abs(u) <= kTimeEps) {
        return {r.frames[i].body, r.frames[i].root};
    }
    const auto& a = r.frames[i];
    const auto& b = r.frames[i + 1];
    return {interp_body(a.body, b.body, u), interp_transform(a.root, b.root, u)};
}

std::vector<const RecordedEvent*> events_in_window(const Recording& r, double from, double to, SampleMode mode) {
    std::vector<std::pair<double, const RecordedEvent*>> hits;
    const double d = r.duration();
    for (const auto& e : r.events) {
        if (mode == SampleMode::Clamp || d <= 0.0) {
            if (mode == SampleMode::Clamp && e.t > from + kTimeEps && e.t <= to + kTimeEps) {
                hits.emplace_back(e.t, &e);
            }
            continue;
        }
        double en = std::fmod(e.t, d);
        if (en >= d - kTimeEps) {
            en = 0.0;
        }
        double k = std::ceil((from + kTimeEps - en) / d);
        for (double x = en + k * d; x <= to + kTimeEps; x += d) {
            if (x > from + kTimeEps) {
                hits.emplace_back(x, &e);
            }
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first - kTimeEps; });
    std::vector<const RecordedEvent*> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
        out.push_back(h.second);
    }
    return out;
}

RecordedFrame Recorder::frame_of(const AvatarState& avatar) const {
    const RigidTransform inv = inverse(state_->anchor);
    RecordedFrame f;
    f.t = static_cast<double>(state_->frames.size()) / state_->tick_rate;
    f.body = apply(inv, avatar.body);
    f.root = compose(inv, avatar.root);
    return f;
}

void Recorder::start(const AvatarState& avatar, RecordingScope scope, double tick_rate) {
    if (state_) {
        throw EngineError(ErrorCode::AlreadyRecording, "a recording is already active");
    }
    state_ = State{scope, tick_rate, avatar.root, avatar.body_id, {}, {}, {}, {}};
    state_->frames.push_back(frame_of(avatar));
}

void Recorder::append_frame(const AvatarState& avatar) {
    if (state_) {
        state_->frames.push_back(frame_of(avatar));
    }
}

void Recorder::record_grab_edge(Hand hand, bool grabbed) {
    if (!state_) {
        return;
    }
    RecordedEvent e;
    e.tick = state_->frames.size();
    e.t = static_cast<double>(e.tick) / state_->tick_rate;
    e.kind = grabbed ? RecordedEvent::Kind::Grab : RecordedEvent::Kind::Release;
    e.hand = hand;
    state_->events.push_back(e);
}

void Recorder::record_command(const EngineCommand& c, const CommandResult& result, const RigidTransform& avatar_root) {
    if (!state_ || state_->scope != RecordingScope::Extended) {
        return;
    }
    RecordedCommand rc{to_root_relative(c, avatar_root), {}};
    State& s = *state_;
    EngineCommand scratch = c;
    visit_ids(scratch, [&](auto& id) {
        using T = std::decay_t<decltype(id)>;
        EntityRef ref{EntityRef::Kind::Literal, id.value};
        if constexpr (std::is_same_v<T, EntityId>) {
            if (id == s.start_body) {
                ref = {EntityRef::Kind::StartBody, 0};
            } else if (auto it = std::find(s.created.begin(), s.created.end(), id); it != s.created.end()) {
                ref = {EntityRef::Kind::Created, static_cast<std::uint64_t>(it - s.created.begin())};
            }
        } else {
            if (auto it = std::find(s.created_groups.begin(), s.created_groups.end(), id);
                it != s.created_groups.end()) {
                ref = {EntityRef::Kind::CreatedGroup, static_cast<std::uint64_t>(it - s.created_groups.begin())};
            }
        }
        rc.refs.push_back(ref);
    });
    RecordedEvent e;
    e.tick = s.frames.size() - 1;
    e.t = static_cast<double>(e.tick) / s.tick_rate;
    e.kind = RecordedEvent::Kind::Command;
    e.command = std::move(rc);
    s.events.push_back(std::move(e));
    s.created.insert(s.created.end(), result.entities.begin(), result.entities.end());
    if (result.group) {
        s.created_groups.push_back(*result.group);
    }
}

Recording Recorder::stop() {
    if (!state_) {
        throw EngineError(ErrorCode::NotRecording, "no active recording");
    }
    if (state_->frames.size() < 2) {
        state_.reset();
        throw EngineError(ErrorCode::EmptyRecording, "recording stopped on the tick it started");
    }
    Recording r;
    r.scope = state_->scope;
    r.tick_rate = state_->tick_rate;
    r.frames = std::move(state_->frames);
    r.events = std::move(state_->events);
    const double d = r.duration();
    std::erase_if(r.events, [d](const RecordedEvent& e) { return e.t > d + kTimeEps; });
    state_.reset();
    return r;
}

RecorderStatus Recorder::status() const {
    if (!state_) {
        return {};
    }
    return {true, state_->scope, state_->frames.size()};
}

EngineCommand ReplayBindings::resolve(const RecordedCommand& rc) const {
    EngineCommand c = rc.command;
    std::size_t slot = 0;
    visit_ids(c, [&](auto& id) {
        using T = std::decay_t<decltype(id)>;
        if (slot >= rc.refs.size()) {
            throw EngineError(ErrorCode::ValidationError, "recorded command has fewer refs than id slots");
        }
        const EntityRef& ref = rc.refs[slot++];
        const auto missing = [&] {
            return EngineError(ErrorCode::UnknownEntity, "recorded reference " + std::string(ref_kind_name(ref.kind)) +
                                                             "[" + std::to_string(ref.value) + "] has no binding");
        };
        switch (ref.kind) {
            case EntityRef::Kind::Literal: id = T{ref.value}; break;
            case EntityRef::Kind::StartBody:
                if constexpr (std::is_same_v<T, EntityId>) {
                    id = start_body;
                } else {
                    throw missing();
                }
                break;
            case EntityRef::Kind::Created:
                if constexpr (std::is_same_v<T, EntityId>) {
                    if (ref.value >= created.size()) {
                        throw missing();
                    }
                    id = created[ref.value];
                } else {
                    throw missing();
                }
                break;
            case EntityRef::Kind::CreatedGroup:
                if constexpr (std::is_same_v<T, GroupId>) {
                    if (ref.value >= created_groups.size()) {
                        throw missing();
                    }
                    id = created_groups[ref.value];
                } else {
                    throw missing();
                }
                break;
        }
    });
    return c;
}

void ReplayBindings::note(const CommandResult& result) {
    created.insert(created.end(), result.entities.begin(), result.entities.end());
    if (result.group) {
        created_groups.push_back(*result.group);
    }
}

json recording_to_json(const Recording& r) {
    json frames = json::array();
    for (const auto& f : r.frames) {
        frames.push_back(json{{"t", quantize(f.t, Precision::Hash)},
                              {"body", body_json(f.body, Precision::Hash)},
                              {"root", transform_json(f.root, Precision::Hash)}});
    }
    json events = json::array();
    for (const auto& e : r.events) {
        json je{{"t", e.t}, {"tick", e.tick}, {"kind", std::string(event_kind_name(e.kind))}};
        if (e.kind == RecordedEvent::Kind::Command) {
            je["command"] = command_to_json(e.command->command);
            json refs = json::array();
            for (const auto& ref : e.command->refs) {
                refs.push_back(json{{"kind", std::string(ref_kind_name(ref.kind))}, {"value", ref.value}});
            }
            je["refs"] = refs;
        } else {
            je["hand"] = std::string(hand_name(e.hand));
        }
        events.push_back(je);
    }
    return json{{"id", r.id.value},
                {"scope", r.scope == RecordingScope::Extended ? "extended" : "poses_and_grabs"},
                {"tick_rate", r.tick_rate},
                {"duration", r.duration()},
                {"frames", frames},
                {"events", events}};
}

Recording recording_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"id", "scope", "tick_rate", "duration", "frames", "events"}, path);
    Recording r;
    if (j.contains("id")) {
        r.id = RecordingId{j["id"].get<std::uint64_t>()};
    }
    const std::string scope = string_at(j, "scope", path);
    if (scope == "extended") {
        r.scope = RecordingScope::Extended;
    } else if (scope != "poses_and_grabs") {
        throw EngineError(ErrorCode::ParseError, path + ".scope: expected poses_and_grabs or extended");
    }
    r.tick_rate = number_at(j, "tick_rate", path);
    if (!(r.tick_rate > 0.0)) {
        throw EngineError(ErrorCode::ValidationError, path + ".tick_rate: must be positive");
    }

    const json& frames = require(j, "frames", path);
    if (!frames.is_array() || frames.size() < 2) {
        throw EngineError(ErrorCode::ValidationError, path + ".frames: need at least two frames");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string fp = path + ".frames[" + std::to_string(i) + "]";
        const json& f = frames[i];
        require_object(f, fp);
        check_keys(f, {"t", "body", "root"}, fp);
        RecordedFrame frame;
        frame.t = number_at(f, "t", fp);
        if (std::abs(frame.t - static_cast<double>(i) / r.tick_rate) > 1e-6) {
            throw EngineError(ErrorCode::ValidationError, fp + ".t: frames must be spaced one tick apart");
        }
        frame.t = static_cast<double>(i) / r.tick_rate;
        frame.body = body_from_json(require(f, "body", fp), fp + ".body");
        if (f.contains("root")) {
            frame.root = transform_from_json(f["root"], fp + ".root");
        }
        r.frames.push_back(frame);
    }

    if (j.contains("events")) {
        const json& events = j["events"];
        if (!events.is_array()) {
            throw EngineError(ErrorCode::ParseError, path + ".events: expected an array");
        }
        std::uint64_t last_tick = 0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::string ep = path + ".events[" + std::to_string(i) + "]";
            const json& je = events[i];
            require_object(je, ep);
            check_keys(je, {"t", "tick", "kind", "hand", "command", "refs"}, ep);
            RecordedEvent e;
            e.tick = require(je, "tick", ep).get<std::uint64_t>();
            e.t = static_cast<double>(e.tick) / r.tick_rate;
            if (e.tick < last_tick || e.t > r.duration() + kTimeEps) {
                throw EngineError(ErrorCode::ValidationError, ep + ".tick: events must be ordered and within the recording");
            }
            last_tick = e.tick;
            const std::string kind = string_at(je, "kind", ep);
            if (kind == "grab" || kind == "release") {
                e.kind = kind == "grab" ? RecordedEvent::Kind::Grab : RecordedEvent::Kind::Release;
                e.hand = hand_from_json(require(je, "hand", ep), ep + ".hand");
            } else if (kind == "command") {
                if (r.scope != RecordingScope::Extended) {
                    throw EngineError(ErrorCode::ValidationError, ep + ": command events need the extended scope");
                }
                e.kind = RecordedEvent::Kind::Command;
                RecordedCommand rc{command_from_json(require(je, "command", ep), numeric_ids(), ep + ".command"), {}};
                for (const auto& jr : require(je, "refs", ep)) {
                    const std::string k = string_at(jr, "kind", ep + ".refs");
                    EntityRef ref;
                    ref.value = require(jr, "value", ep + ".refs").get<std::uint64_t>();
                    if (k == "literal") {
                        ref.kind = EntityRef::Kind::Literal;
                    } else if (k == "start_body") {
                        ref.kind = EntityRef::Kind::StartBody;
                    } else if (k == "created") {
                        ref.kind = EntityRef::Kind::Created;
                    } else if (k == "created_group") {
                        ref.kind = EntityRef::Kind::CreatedGroup;
                    } else {
                        throw EngineError(ErrorCode::ParseError, ep + ".refs: unknown ref kind '" + k + "'");
                    }
                    rc.refs.push_back(ref);
                }
                e.command = std::move(rc);
            } else {
                throw EngineError(ErrorCode::ParseError, ep + ".kind: unknown event kind '" + kind + "'");
            }
            r.events.push_back(std::move(e));
        }
    }
    return r;
}

}  // namespace clonemator
