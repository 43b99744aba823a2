#include "clonemator/scenario.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace clonemator {

namespace {

[[noreturn]] void parse_error(const std::string& path, const std::string& what) {
    throw EngineError(ErrorCode::ParseError, path + ": " + what);
}

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
    throw EngineError(ErrorCode::ValidationError, path + ": " + what);
}

std::uint64_t tick_at(const json& j, std::string_view key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        parse_error(path + "." + std::string(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::int64_t int_at(const json& j, std::string_view key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number_integer()) {
        parse_error(path + "." + std::string(key), "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::optional<std::string> opt_string(const json& j, std::string_view key, const std::string& path) {
    if (!j.contains(key)) {
        return std::nullopt;
    }
    return string_at(j, key, path);
}

// "name[3]" -> ("name", 3); "name" -> ("name", nullopt)
std::pair<std::string, std::optional<std::size_t>> split_ref(const std::string& s, const std::string& path) {
    const auto open = s.find('[');
    if (open == std::string::npos) {
        return {s, std::nullopt};
    }
    if (s.back() != ']' || open == 0 || open + 2 > s.size() - 1 + 1) {
        parse_error(path, "malformed reference '" + s + "'");
    }
    const std::string digits = s.substr(open + 1, s.size() - open - 2);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        parse_error(path, "malformed reference '" + s + "'");
    }
    return {s.substr(0, open), static_cast<std::size_t>(std::stoull(digits))};
}

void check_ref_syntax(const json& ref, const std::string& path) {
    if (ref.is_number_integer() && ref.get<std::int64_t>() > 0) {
        return;
    }
    if (!ref.is_string()) {
        parse_error(path, "expected a name or a positive integer id");
    }
}

WorldConfig config_from_json(const json& c, const std::string& path) {
    require_object(c, path);
    check_keys(c, {"tick_rate", "arm_length", "grab_radius", "backward_offset", "snap_search_radius", "gravity",
                   "max_reach", "standing_height", "ballistic", "allow_pose_self_replay"},
               path);
    WorldConfig cfg;
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
    try {
        cfg.validate();
    } catch (const EngineError& e) {
        invalid(path, e.detail());
    }
    return cfg;
}

InputKeyframe keyframe_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"head", "left_hand", "right_hand", "left_grab", "right_grab"}, path);
    InputKeyframe k;
    if (j.contains("head")) {
        k.head = pose_from_json(j["head"], path + ".head");
    }
    if (j.contains("left_hand")) {
        k.left_hand = pose_from_json(j["left_hand"], path + ".left_hand");
    }
    if (j.contains("right_hand")) {
        k.right_hand = pose_from_json(j["right_hand"], path + ".right_hand");
    }
    if (j.contains("left_grab")) {
        k.left_grab = bool_or(j, "left_grab", false, path);
    }
    if (j.contains("right_grab")) {
        k.right_grab = bool_or(j, "right_grab", false, path);
    }
    return k;
}

BodyFrame merge(const BodyFrame& base, const InputKeyframe& k) {
    BodyFrame b = base;
    if (k.head) {
        b.head = *k.head;
    }
    if (k.left_hand) {
        b.left_hand = *k.left_hand;
    }
    if (k.right_hand) {
        b.right_hand = *k.right_hand;
    }
    if (k.left_grab) {
        b.left_grab = *k.left_grab;
    }
    if (k.right_grab) {
        b.right_grab = *k.right_grab;
    }
    return b;
}

template <typename T>
void count_bounds(const json& j, const std::string& path, T& spec) {
    if (j.contains("expected") == j.contains("min")) {
        parse_error(path, "give exactly one of expected or min");
    }
    if (j.contains("expected")) {
        spec.expected = int_at(j, "expected", path);
    } else {
        spec.min = int_at(j, "min", path);
    }
}

AssertionSpec assertion_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    AssertionSpec a;
    const std::string kind = string_at(j, "kind", path);
    a.tick = tick_at(j, "tick", path);
    a.label = opt_string(j, "label", path);

    if (kind == "pose_equals") {
        check_keys(j, {"tick", "kind", "label", "entity", "joint", "frame", "position_only", "expected", "tolerance"},
                   path);
        PoseEqualsSpec s;
        s.entity = require(j, "entity", path);
        check_ref_syntax(s.entity, path + ".entity");
        s.joint = j.contains("joint") ? string_at(j, "joint", path) : "pose";
        static const std::set<std::string> joints{"pose", "root", "head", "left_hand", "right_hand"};
        if (!joints.contains(s.joint)) {
            parse_error(path + ".joint", "expected pose, root, head, left_hand or right_hand");
        }
        if (j.contains("frame")) {
            const std::string f = string_at(j, "frame", path);
            if (f != "world" && f != "root") {
                parse_error(path + ".frame", "expected world or root");
            }
            s.root_frame = f == "root";
        }
        s.position_only = bool_or(j, "position_only", false, path);
        s.expected = pose_from_json(require(j, "expected", path), path + ".expected");
        s.tolerance = number_or(j, "tolerance", s.tolerance, path);
        a.body = s;
    } else if (kind == "relative_transform_equals") {
        check_keys(j, {"tick", "kind", "label", "a", "b", "expected", "expected_capture", "capture_as", "position_only",
                       "tolerance"},
                   path);
        RelativeTransformSpec s;
        s.a = require(j, "a", path);
        s.b = require(j, "b", path);
        check_ref_syntax(s.a, path + ".a");
        check_ref_syntax(s.b, path + ".b");
        if (j.contains("expected")) {
            s.expected = transform_from_json(j["expected"], path + ".expected");
        }
        s.expected_capture = opt_string(j, "expected_capture", path);
        s.capture_as = opt_string(j, "capture_as", path);
        if (s.expected && s.expected_capture) {
            parse_error(path, "give expected or expected_capture, not both");
        }
        s.position_only = bool_or(j, "position_only", false, path);
        s.tolerance = number_or(j, "tolerance", s.tolerance, path);
        a.body = s;
    } else if (kind == "scalar_state_at_least") {
        check_keys(j, {"tick", "kind", "label", "entity", "entities", "key", "min", "tolerance"}, path);
        ScalarAtLeastSpec s;
        if (j.contains("entity") == j.contains("entities")) {
            parse_error(path, "give exactly one of entity or entities");
        }
        if (j.contains("entity")) {
            s.entities.push_back(j["entity"]);
        } else {
            if (!j["entities"].is_array() || j["entities"].empty()) {
                parse_error(path + ".entities", "expected a non-empty array");
            }
            for (const auto& e : j["entities"]) {
                s.entities.push_back(e);
            }
        }
        for (const auto& e : s.entities) {
            check_ref_syntax(e, path + ".entity");
        }
        s.key = string_at(j, "key", path);
        s.min = number_at(j, "min", path);
        s.tolerance = number_or(j, "tolerance", s.tolerance, path);
        a.body = s;
    } else if (kind == "entity_count") {
        check_keys(j, {"tick", "kind", "label", "what", "tag", "region", "held_by", "expected", "min"}, path);
        EntityCountSpec s;
        s.what = string_at(j, "what", path);
        static const std::set<std::string> whats{"clones", "objects", "groups", "bodies"};
        if (!whats.contains(s.what)) {
            parse_error(path + ".what", "expected clones, objects, groups or bodies");
        }
        s.tag = opt_string(j, "tag", path);
        if (j.contains("region")) {
            const json& r = j["region"];
            require_object(r, path + ".region");
            check_keys(r, {"min", "max"}, path + ".region");
            s.region = std::make_pair(vec3_from_json(require(r, "min", path + ".region"), path + ".region.min"),
                                      vec3_from_json(require(r, "max", path + ".region"), path + ".region.max"));
        }
        if (j.contains("held_by")) {
            s.held_by = j["held_by"];
            check_ref_syntax(*s.held_by, path + ".held_by");
        }
        count_bounds(j, path, s);
        a.body = s;
    } else if (kind == "hash_equals") {
        check_keys(j, {"tick", "kind", "label", "expected", "expected_capture", "capture_as"}, path);
        HashEqualsSpec s;
        s.expected = opt_string(j, "expected", path);
        s.expected_capture = opt_string(j, "expected_capture", path);
        s.capture_as = opt_string(j, "capture_as", path);
        if (s.expected && s.expected_capture) {
            parse_error(path, "give expected or expected_capture, not both");
        }
        a.body = s;
    } else if (kind == "event_count_equals") {
        check_keys(j, {"tick", "kind", "label", "rule", "actor", "target", "window", "from_tick", "expected", "min"},
                   path);
        EventCountSpec s;
        s.rule = string_at(j, "rule", path);
        if (j.contains("actor")) {
            s.actor = j["actor"];
            check_ref_syntax(*s.actor, path + ".actor");
        }
        if (j.contains("target")) {
            s.target = j["target"];
            check_ref_syntax(*s.target, path + ".target");
        }
        if (j.contains("window")) {
            const std::string w = string_at(j, "window", path);
            if (w != "cumulative" && w != "tick") {
                parse_error(path + ".window", "expected cumulative or tick");
            }
            s.this_tick_only = w == "tick";
        }
        if (j.contains("from_tick")) {
            s.from_tick = tick_at(j, "from_tick", path);
        }
        count_bounds(j, path, s);
        a.body = s;
    } else {
        parse_error(path + ".kind", "unknown assertion kind '" + kind + "'");
    }
    return a;
}

// Checks name references against what is bound at that point of the timeline.
struct NameTable {
    std::set<std::string> objects;
    std::set<std::string> results;

    void check_entity(const json& ref, const std::string& path) const {
        check_ref_syntax(ref, path);
        if (ref.is_number()) {
            return;
        }
        const std::string s = ref.get<std::string>();
        if (s == "$avatar" || s == "$original") {
            return;
        }
        auto [base, index] = split_ref(s, path);
        if (index ? results.contains(base) : (objects.contains(base) || results.contains(base))) {
            return;
        }
        throw EngineError(ErrorCode::UnresolvedName, path + ": '" + s + "' is not bound here");
    }

    void check_bound(const json& ref, const std::string& path) const {
        check_ref_syntax(ref, path);
        if (ref.is_string() && !results.contains(ref.get<std::string>())) {
            throw EngineError(ErrorCode::UnresolvedName, path + ": '" + ref.get<std::string>() + "' is not bound here");
        }
    }

    IdResolver resolver() const {
        IdResolver r;
        r.entity = [this](const json& j, const std::string& path) {
            check_entity(j, path);
            return EntityId{1};
        };
        r.group = [this](const json& j, const std::string& path) {
            check_bound(j, path);
            return GroupId{1};
        };
        r.recording = [this](const json& j, const std::string& path) {
            check_bound(j, path);
            return RecordingId{1};
        };
        return r;
    }
};

struct Keyframe {
    std::uint64_t tick;
    BodyFrame body;
};

std::vector<Keyframe> build_keyframes(const ScenarioScript& s) {
    std::vector<Keyframe> out{{0, s.avatar_body}};
    for (const auto& step : s.timeline) {
        if (const auto* k = std::get_if<InputKeyframe>(&step.action)) {
            const BodyFrame body = merge(out.back().body, *k);
            if (step.tick == out.back().tick) {
                out.back().body = body;
            } else {
                out.push_back({step.tick, body});
            }
        }
    }
    return out;
}

BodyFrame input_at(const std::vector<Keyframe>& kf, std::uint64_t tick) {
    auto it = std::upper_bound(kf.begin(), kf.end(), tick, [](std::uint64_t t, const Keyframe& k) { return t < k.tick; });
    const Keyframe& a = *std::prev(it);
    if (it == kf.end() || a.tick == tick) {
        return a.body;
    }
    const double u = static_cast<double>(tick - a.tick) / static_cast<double>(it->tick - a.tick);
    return interp_body(a.body, it->body, u);
}

json quantized(double v) { return quantize(v, Precision::Hash); }

std::string ref_text(const json& ref) { return ref.is_string() ? ref.get<std::string>() : ref.dump(); }

}  // namespace

std::string_view assertion_kind(const AssertionBody& b) {
    static constexpr std::array<std::string_view, 6> names{"pose_equals",  "relative_transform_equals",
                                                           "scalar_state_at_least", "entity_count",
                                                           "hash_equals",  "event_count_equals"};
    return names[b.index()];
}

ScenarioScript load_scenario(const json& doc) {
    const std::string root = "scenario";
    require_object(doc, root);
    check_keys(doc, {"version", "name", "description", "notes", "config", "ticks", "avatar", "objects",
                     "contact_rules", "recordings", "timeline", "assertions"},
               root);
    if (string_at(doc, "version", root) != kScenarioVersion) {
        parse_error(root + ".version", std::string("expected ") + kScenarioVersion);
    }
    ScenarioScript s;
    s.name = string_at(doc, "name", root);
    if (doc.contains("description")) {
        s.description = string_at(doc, "description", root);
    }
    if (doc.contains("notes")) {
        string_at(doc, "notes", root);
    }
    if (doc.contains("config")) {
        s.config = config_from_json(doc["config"], root + ".config");
    }
    s.ticks = tick_at(doc, "ticks", root);
    if (s.ticks == 0) {
        invalid(root + ".ticks", "must be at least 1");
    }

    s.avatar_body = neutral_body();
    s.avatar_body.head.position.y = s.config.standing_height;
    if (doc.contains("avatar")) {
        const json& av = doc["avatar"];
        const std::string ap = root + ".avatar";
        require_object(av, ap);
        check_keys(av, {"root", "body"}, ap);
        if (av.contains("root")) {
            s.avatar_root = yaw_frame(transform_from_json(av["root"], ap + ".root"));
        }
        if (av.contains("body")) {
            s.avatar_body = merge(s.avatar_body, keyframe_from_json(av["body"], ap + ".body"));
        }
    }

    NameTable names;
    if (doc.contains("objects")) {
        const json& objs = doc["objects"];
        if (!objs.is_array()) {
            parse_error(root + ".objects", "expected an array");
        }
        for (std::size_t i = 0; i < objs.size(); ++i) {
            const std::string op = root + ".objects[" + std::to_string(i) + "]";
            const json& o = objs[i];
            require_object(o, op);
            check_keys(o, {"name", "tag", "pose", "grabbable", "scalar_state"}, op);
            ObjectSpec spec;
            spec.tag = string_at(o, "tag", op);
            if (spec.tag.empty()) {
                invalid(op + ".tag", "must be non-empty");
            }
            spec.name = o.contains("name") ? string_at(o, "name", op) : spec.tag + std::to_string(i);
            if (spec.name.empty() || spec.name[0] == '$' || spec.name.find('[') != std::string::npos) {
                invalid(op + ".name", "names may not be empty, start with $ or contain [");
            }
            if (!names.objects.insert(spec.name).second) {
                invalid(op + ".name", "duplicate object name '" + spec.name + "'");
            }
            spec.pose = pose_from_json(require(o, "pose", op), op + ".pose");
            spec.grabbable = bool_or(o, "grabbable", false, op);
            if (o.contains("scalar_state")) {
                require_object(o["scalar_state"], op + ".scalar_state");
                for (const auto& [k, v] : o["scalar_state"].items()) {
                    spec.scalar_state[k] = number_at(o["scalar_state"], k, op + ".scalar_state");
                }
            }
            s.objects.push_back(std::move(spec));
        }
    }

    if (doc.contains("contact_rules")) {
        const json& rules = doc["contact_rules"];
        if (!rules.is_array()) {
            parse_error(root + ".contact_rules", "expected an array");
        }
        for (std::size_t i = 0; i < rules.size(); ++i) {
            s.contact_rules.push_back(contact_rule_from_json(rules[i], root + ".contact_rules[" + std::to_string(i) + "]"));
        }
    }

    if (doc.contains("recordings")) {
        const json& recs = doc["recordings"];
        if (!recs.is_array()) {
            parse_error(root + ".recordings", "expected an array");
        }
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const std::string rp = root + ".recordings[" + std::to_string(i) + "]";
            require_object(recs[i], rp);
            check_keys(recs[i], {"name", "recording"}, rp);
            RecordingFixture f{string_at(recs[i], "name", rp),
                               recording_from_json(require(recs[i], "recording", rp), rp + ".recording")};
            if (names.objects.contains(f.name) || !names.results.insert(f.name).second) {
                invalid(rp + ".name", "duplicate name '" + f.name + "'");
            }
            s.recordings.push_back(std::move(f));
        }
    }

    if (doc.contains("timeline")) {
        const json& tl = doc["timeline"];
        if (!tl.is_array()) {
            parse_error(root + ".timeline", "expected an array");
        }
        std::uint64_t last = 0;
        std::optional<std::uint64_t> last_input;
        for (std::size_t i = 0; i < tl.size(); ++i) {
            const std::string sp = root + ".timeline[" + std::to_string(i) + "]";
            const json& st = tl[i];
            require_object(st, sp);
            check_keys(st, {"tick", "input", "command", "bind", "note"}, sp);
            TimedStep step;
            step.tick = tick_at(st, "tick", sp);
            if (step.tick < last) {
                invalid(sp + ".tick", "timeline must be sorted by tick");
            }
            if (step.tick >= s.ticks) {
                invalid(sp + ".tick", "beyond the run length");
            }
            last = step.tick;
            if (st.contains("input") == st.contains("command")) {
                parse_error(sp, "a step has exactly one of input or command");
            }
            if (st.contains("input")) {
                if (st.contains("bind")) {
                    parse_error(sp + ".bind", "only command steps bind names");
                }
                if (last_input && *last_input == step.tick) {
                    invalid(sp + ".tick", "two input keyframes on one tick");
                }
                last_input = step.tick;
                step.action = keyframe_from_json(st["input"], sp + ".input");
            } else {
                CommandStep c{st["command"], opt_string(st, "bind", sp)};
                command_from_json(c.command, names.resolver(), sp + ".command");
                if (c.bind) {
                    const std::string& b = *c.bind;
                    if (b.empty() || b[0] == '$' || b.find('[') != std::string::npos) {
                        invalid(sp + ".bind", "names may not be empty, start with $ or contain [");
                    }
                    if (names.objects.contains(b) || !names.results.insert(b).second) {
                        invalid(sp + ".bind", "duplicate name '" + b + "'");
                    }
                }
                step.action = std::move(c);
            }
            s.timeline.push_back(std::move(step));
        }
    }

    if (doc.contains("assertions")) {
        const json& as = doc["assertions"];
        if (!as.is_array()) {
            parse_error(root + ".assertions", "expected an array");
        }
        for (std::size_t i = 0; i < as.size(); ++i) {
            const std::string ap = root + ".assertions[" + std::to_string(i) + "]";
            AssertionSpec a = assertion_from_json(as[i], ap);
            if (a.tick >= s.ticks) {
                invalid(ap + ".tick", "beyond the run length");
            }
            std::visit(
                [&](const auto& b) {
                    using T = std::decay_t<decltype(b)>;
                    if constexpr (std::is_same_v<T, PoseEqualsSpec>) {
                        names.check_entity(b.entity, ap + ".entity");
                    } else if constexpr (std::is_same_v<T, RelativeTransformSpec>) {
                        names.check_entity(b.a, ap + ".a");
                        names.check_entity(b.b, ap + ".b");
                    } else if constexpr (std::is_same_v<T, ScalarAtLeastSpec>) {
                        for (const auto& e : b.entities) {
                            names.check_entity(e, ap + ".entity");
                        }
                    } else if constexpr (std::is_same_v<T, EntityCountSpec>) {
                        if (b.held_by) {
                            names.check_entity(*b.held_by, ap + ".held_by");
                        }
                    } else if constexpr (std::is_same_v<T, EventCountSpec>) {
                        if (b.actor) {
                            names.check_entity(*b.actor, ap + ".actor");
                        }
                        if (b.target) {
                            names.check_entity(*b.target, ap + ".target");
                        }
                    }
                },
                a.body);
            s.assertions.push_back(std::move(a));
        }
    }
    return s;
}

ScenarioScript load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw EngineError(ErrorCode::ParseError, path.string() + ": cannot open");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw EngineError(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return load_scenario(doc);
}

void RunContext::record_contacts(const std::vector<ContactEvent>& events) {
    contacts_.insert(contacts_.end(), events.begin(), events.end());
}

EntityId RunContext::entity(const NameRef& ref, const std::string& path) const {
    if (ref.is_number_integer() && ref.get<std::int64_t>() > 0) {
        return EntityId{ref.get<std::uint64_t>()};
    }
    if (!ref.is_string()) {
        parse_error(path, "expected a name or a positive integer id");
    }
    const std::string s = ref.get<std::string>();
    const World& w = engine_.world();
    if (s == "$avatar") {
        return w.avatar.body_id;
    }
    if (s == "$original") {
        return w.original_body;
    }
    auto [base, index] = split_ref(s, path);
    if (!index) {
        if (auto it = objects_.find(base); it != objects_.end()) {
            return it->second;
        }
    }
    auto it = results_.find(base);
    if (it == results_.end()) {
        throw EngineError(ErrorCode::UnresolvedName, path + ": '" + s + "' is not bound");
    }
    const std::size_t i = index.value_or(0);
    if (i >= it->second.entities.size()) {
        throw EngineError(ErrorCode::UnresolvedName,
                          path + ": '" + s + "' has " + std::to_string(it->second.entities.size()) + " entities");
    }
    return it->second.entities[i];
}

GroupId RunContext::group(const NameRef& ref, const std::string& path) const {
    if (ref.is_number_integer() && ref.get<std::int64_t>() > 0) {
        return GroupId{ref.get<std::uint64_t>()};
    }
    auto it = ref.is_string() ? results_.find(ref.get<std::string>()) : results_.end();
    if (it == results_.end() || !it->second.group) {
        throw EngineError(ErrorCode::UnresolvedName, path + ": " + ref_text(ref) + " names no group");
    }
    return *it->second.group;
}

RecordingId RunContext::recording(const NameRef& ref, const std::string& path) const {
    if (ref.is_number_integer() && ref.get<std::int64_t>() > 0) {
        return RecordingId{ref.get<std::uint64_t>()};
    }
    auto it = ref.is_string() ? results_.find(ref.get<std::string>()) : results_.end();
    if (it == results_.end() || !it->second.recording) {
        throw EngineError(ErrorCode::UnresolvedName, path + ": " + ref_text(ref) + " names no recording");
    }
    return *it->second.recording;
}

IdResolver RunContext::resolver() const {
    IdResolver r;
    r.entity = [this](const json& j, const std::string& p) { return entity(j, p); };
    r.group = [this](const json& j, const std::string& p) { return group(j, p); };
    r.recording = [this](const json& j, const std::string& p) { return recording(j, p); };
    return r;
}

namespace {

RigidTransform entity_frame(const World& w, EntityId id) {
    if (id == w.avatar.body_id) {
        return w.avatar.root;
    }
    if (auto it = w.clones.find(id); it != w.clones.end()) {
        return it->second.root;
    }
    return to_transform(w.object(id).pose);
}

json compare_poses(const Pose& actual, const Pose& expected, bool position_only, double tol, bool& passed) {
    const double pos_err = distance(actual.position, expected.position);
    const double ang_err = angle_between(actual.orientation, expected.orientation);
    passed = pos_err <= tol && (position_only || ang_err <= tol);
    json m = pose_json(actual, Precision::Hash);
    m["position_error"] = quantized(pos_err);
    if (!position_only) {
        m["angle_error"] = quantized(ang_err);
    }
    return m;
}

bool count_ok(std::int64_t n, const std::optional<std::int64_t>& expected, const std::optional<std::int64_t>& min) {
    return expected ? n == *expected : n >= *min;
}

json count_expectation(const std::optional<std::int64_t>& expected, const std::optional<std::int64_t>& min) {
    return expected ? json(*expected) : json{{"min", *min}};
}

}  // namespace

AssertionResult check_assertion(const AssertionSpec& a, RunContext& ctx) {
    AssertionResult res;
    res.tick = a.tick;
    res.kind = std::string(assertion_kind(a.body));
    res.label = a.label;
    const World& w = ctx.engine().world();
    const std::string path = "assertion";

    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, PoseEqualsSpec>) {
                const EntityId id = ctx.entity(b.entity, path + ".entity");
                Pose actual;
                if (w.is_body(id)) {
                    const RigidTransform root = entity_frame(w, id);
                    const BodyFrame& body = w.body_of(id);
                    if (b.joint == "pose") {
                        throw EngineError(ErrorCode::ValidationError, "bodies need a joint: root, head, left_hand or right_hand");
                    }
                    actual = b.joint == "root" ? to_pose(root)
                             : b.joint == "head" ? body.head
                             : b.joint == "left_hand" ? body.left_hand
                                                      : body.right_hand;
                    if (b.root_frame) {
                        actual = apply(inverse(root), actual);
                    }
                } else {
                    if (b.joint != "pose" || b.root_frame) {
                        throw EngineError(ErrorCode::ValidationError, "objects only support joint 'pose' in the world frame");
                    }
                    actual = w.object(id).pose;
                }
                res.measured = compare_poses(actual, b.expected, b.position_only, b.tolerance, res.passed);
                res.expected = pose_json(b.expected, Precision::Hash);
            } else if constexpr (std::is_same_v<T, RelativeTransformSpec>) {
                const RigidTransform rel =
                    compose(inverse(entity_frame(w, ctx.entity(b.a, path + ".a"))), entity_frame(w, ctx.entity(b.b, path + ".b")));
                std::optional<RigidTransform> expected = b.expected;
                if (b.expected_capture) {
                    auto it = ctx.captures().find(*b.expected_capture);
                    if (it == ctx.captures().end()) {
                        throw EngineError(ErrorCode::UnresolvedName, "no capture '" + *b.expected_capture + "'");
                    }
                    expected = transform_from_json(it->second, "capture");
                }
                if (b.capture_as) {
                    ctx.captures()[*b.capture_as] = transform_json(rel);
                }
                if (expected) {
                    res.measured = compare_poses(to_pose(rel), to_pose(*expected), b.position_only, b.tolerance, res.passed);
                    res.expected = transform_json(*expected, Precision::Hash);
                } else {
                    res.passed = true;
                    res.measured = transform_json(rel, Precision::Hash);
                }
            } else if constexpr (std::is_same_v<T, ScalarAtLeastSpec>) {
                res.passed = true;
                json values = json::array();
                for (const auto& e : b.entities) {
                    const WorldObject& obj = w.object(ctx.entity(e, path + ".entity"));
                    auto it = obj.scalar_state.find(b.key);
                    if (it == obj.scalar_state.end()) {
                        res.passed = false;
                        values.push_back(nullptr);
                        continue;
                    }
                    values.push_back(quantized(it->second));
                    res.passed = res.passed && it->second >= b.min - b.tolerance;
                }
                res.measured = values;
                res.expected = json{{"min", b.min}};
            } else if constexpr (std::is_same_v<T, EntityCountSpec>) {
                const auto in_region = [&](const Vec3& p) {
                    if (!b.region) {
                        return true;
                    }
                    const auto& [lo, hi] = *b.region;
                    return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z;
                };
                std::int64_t n = 0;
                if (b.what == "objects") {
                    std::optional<EntityId> holder;
                    if (b.held_by) {
                        holder = ctx.entity(*b.held_by, path + ".held_by");
                    }
                    for (const auto& [id, obj] : w.objects) {
                        if (b.tag && obj.tag != *b.tag) {
                            continue;
                        }
                        if (holder) {
                            const Attachment* att = w.attachment_for(id);
                            if (!att || att->holder != *holder) {
                                continue;
                            }
                        }
                        n += in_region(obj.pose.position) ? 1 : 0;
                    }
                } else if (b.what == "clones" || b.what == "bodies") {
                    for (const auto& [id, c] : w.clones) {
                        n += in_region(c.root.translation) ? 1 : 0;
                    }
                    if (b.what == "bodies") {
                        n += in_region(w.avatar.root.translation) ? 1 : 0;
                    }
                } else {
                    n = static_cast<std::int64_t>(w.groups.size());
                }
                res.measured = n;
                res.expected = count_expectation(b.expected, b.min);
                res.passed = count_ok(n, b.expected, b.min);
            } else if constexpr (std::is_same_v<T, HashEqualsSpec>) {
                const std::string h = world_hash_hex(w);
                std::optional<std::string> expected = b.expected;
                if (b.expected_capture) {
                    auto it = ctx.captures().find(*b.expected_capture);
                    if (it == ctx.captures().end()) {
                        throw EngineError(ErrorCode::UnresolvedName, "no capture '" + *b.expected_capture + "'");
                    }
                    expected = it->second.template get<std::string>();
                }
                if (b.capture_as) {
                    ctx.captures()[*b.capture_as] = h;
                }
                res.measured = h;
                res.expected = expected ? json(*expected) : json(nullptr);
                res.passed = !expected || *expected == h;
            } else if constexpr (std::is_same_v<T, EventCountSpec>) {
                std::optional<EntityId> actor;
                std::optional<EntityId> target;
                if (b.actor) {
                    actor = ctx.entity(*b.actor, path + ".actor");
                }
                if (b.target) {
                    target = ctx.entity(*b.target, path + ".target");
                }
                std::int64_t n = 0;
                for (const auto& e : ctx.contacts()) {
                    if (e.rule != b.rule || e.tick < b.from_tick || e.tick > a.tick) {
                        continue;
                    }
                    if ((b.this_tick_only && e.tick != a.tick) || (actor && e.actor != *actor) ||
                        (target && e.target != *target)) {
                        continue;
                    }
                    ++n;
                }
                res.measured = n;
                res.expected = count_expectation(b.expected, b.min);
                res.passed = count_ok(n, b.expected, b.min);
            }
        },
        a.body);
    return res;
}

Engine build_engine(const ScenarioScript& s, RunContext* ctx) {
    Engine engine(s.config);
    World& w = engine.world();
    w.avatar.root = s.avatar_root;
    w.avatar.local = s.avatar_body;
    w.refresh_avatar_body();
    for (const auto& o : s.objects) {
        const EntityId id = w.add_object(o.tag, o.pose, o.grabbable);
        w.object(id).scalar_state = o.scalar_state;
        if (ctx) {
            ctx->bind_object(o.name, id);
        }
    }
    engine.contact_rules() = s.contact_rules;
    for (const auto& f : s.recordings) {
        CommandResult r;
        r.recording = engine.recordings().add(f.recording);
        if (ctx) {
            ctx->bind_result(f.name, r);
        }
    }
    return engine;
}

RunReport run_scenario(const ScenarioScript& s) {
    const auto started = std::chrono::steady_clock::now();
    RunReport report;
    report.scenario = s.name;

    Engine engine(s.config);
    RunContext ctx(engine);
    engine = build_engine(s, &ctx);
    World& w = engine.world();

    const std::vector<Keyframe> keyframes = build_keyframes(s);
    std::vector<std::size_t> order(s.assertions.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return s.assertions[x].tick < s.assertions[y].tick; });
    std::vector<std::optional<AssertionResult>> results(s.assertions.size());

    std::size_t next_step = 0;
    std::size_t next_assert = 0;
    for (std::uint64_t t = 0; t < s.ticks && !report.error; ++t) {
        for (; next_step < s.timeline.size() && s.timeline[next_step].tick == t; ++next_step) {
            const auto* c = std::get_if<CommandStep>(&s.timeline[next_step].action);
            if (!c) {
                continue;
            }
            const std::string path = "timeline[" + std::to_string(next_step) + "].command";
            std::string op = c->command.value("op", std::string("?"));
            try {
                const EngineCommand cmd = command_from_json(c->command, ctx.resolver(), path);
                const CommandResult r = engine.execute(cmd);
                if (c->bind) {
                    ctx.bind_result(*c->bind, r);
                }
            } catch (const EngineError& e) {
                report.error = RunError{t, op, std::string(to_string(e.code())), e.what()};
                break;
            }
        }
        if (report.error) {
            break;
        }
        const TickEvents ev = engine.step(input_at(keyframes, t));
        ctx.record_contacts(ev.contacts);
        for (const auto& o : ev.commands) {
            if (!o.ok()) {
                report.error = RunError{t, o.op, std::string(to_string(*o.error)), o.detail};
            }
        }
        report.ticks_executed = t + 1;
        for (; next_assert < order.size() && s.assertions[order[next_assert]].tick == t; ++next_assert) {
            const std::size_t idx = order[next_assert];
            try {
                results[idx] = check_assertion(s.assertions[idx], ctx);
            } catch (const EngineError& e) {
                AssertionResult r;
                r.tick = t;
                r.kind = std::string(assertion_kind(s.assertions[idx].body));
                r.label = s.assertions[idx].label;
                r.detail = e.what();
                results[idx] = r;
            }
            results[idx]->index = idx;
        }
    }

    report.passed = !report.error;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i]) {
            AssertionResult r;
            r.index = i;
            r.tick = s.assertions[i].tick;
            r.kind = std::string(assertion_kind(s.assertions[i].body));
            r.label = s.assertions[i].label;
            r.detail = "not evaluated";
            results[i] = r;
        }
        report.passed = report.passed && results[i]->passed;
        report.assertions.push_back(std::move(*results[i]));
    }
    report.final_hash = world_hash_hex(w);
    report.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return report;
}

json report_to_json(const RunReport& r, bool include_timing) {
    json assertions = json::array();
    for (const auto& a : r.assertions) {
        json j{{"index", a.index}, {"tick", a.tick}, {"kind", a.kind}, {"passed", a.passed},
               {"measured", a.measured}, {"expected", a.expected}};
        if (a.label) {
            j["label"] = *a.label;
        }
        if (!a.detail.empty()) {
            j["detail"] = a.detail;
        }
        assertions.push_back(j);
    }
    json j{{"scenario", r.scenario},
           {"ticks_executed", r.ticks_executed},
           {"passed", r.passed},
           {"assertions", assertions},
           {"final_hash", r.final_hash}};
    if (r.error) {
        j["error"] = json{{"tick", r.error->tick}, {"command", r.error->command}, {"code", r.error->code},
                          {"detail", r.error->detail}};
    }
    if (include_timing) {
        j["wall_clock_ms"] = r.wall_clock_ms;
    }
    return j;
}

std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) {
        return out;
    }
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "golden_hashes.json") {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace clonemator
