#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "clonemator/session.hpp"
#include "clonemator/world_io.hpp"

using namespace clonemator;

namespace {

json msg(std::string_view type, std::optional<std::int64_t> seq = std::nullopt) {
    json j{{"v", kProtocolVersion}, {"type", type}};
    if (seq) {
        j["seq"] = *seq;
    }
    return j;
}

json hello(std::string_view role) {
    json j = msg("hello");
    j["role"] = role;
    return j;
}

json command_msg(std::int64_t seq, json command) {
    json j = msg("command", seq);
    j["command"] = std::move(command);
    return j;
}

std::vector<json> parsed(const std::vector<Outbound>& out, ConnId only) {
    std::vector<json> v;
    for (const auto& o : out) {
        if (o.conn == only) {
            v.push_back(json::parse(o.text));
        }
    }
    return v;
}

std::vector<json> of_type(const std::vector<json>& v, std::string_view type) {
    std::vector<json> r;
    for (const auto& j : v) {
        if (j["type"] == type) {
            r.push_back(j);
        }
    }
    return r;
}

std::optional<std::string> error_code(const std::vector<json>& v) {
    for (const auto& j : v) {
        if (j["type"] == "event" && j["event"]["kind"] == "error") {
            return j["event"]["code"].get<std::string>();
        }
    }
    return std::nullopt;
}

// Numeric leaves compared within tol; everything else exactly.
bool close_json(const json& a, const json& b, double tol) {
    if (a.is_number() && b.is_number()) {
        return std::abs(a.get<double>() - b.get<double>()) <= tol;
    }
    if (a.type() != b.type() || a.size() != b.size()) {
        return false;
    }
    if (a.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key()) || !close_json(it.value(), b[it.key()], tol)) {
                return false;
            }
        }
        return true;
    }
    if (a.is_array()) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!close_json(a[i], b[i], tol)) {
                return false;
            }
        }
        return true;
    }
    return a == b;
}

bool close_state(const StateMap& a, const StateMap& b, double tol) {
    if (a.size() != b.size()) {
        return false;
    }
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it == b.end() || !close_json(v, it->second, tol)) {
            return false;
        }
    }
    return true;
}

Engine scene() {
    Engine e;
    e.world().add_object("peg", {{1, 0.5, 1}, {}}, false);
    e.world().add_object("peg", {{-2, 0.5, 3}, Quat::from_yaw_deg(90)}, false);
    e.world().add_object("ball", {{-0.3, 1.0, 0.2}, {}}, true);
    return e;
}

struct Session {
    SessionCore core{scene()};
    ConnId ctl = 1;

    Session() {
        core.connect(ctl);
        core.receive(ctl, hello("controller").dump());
        core.drain();
    }
    std::vector<json> send(ConnId c, const json& j) {
        core.receive(c, j.dump());
        return parsed(core.drain(), c);
    }
    std::vector<json> tick(ConnId c, int n = 1) {
        std::vector<Outbound> all;
        for (int i = 0; i < n; ++i) {
            core.tick();
            auto out = core.drain();
            all.insert(all.end(), out.begin(), out.end());
        }
        return parsed(all, c);
    }
};

}  // namespace

TEST_CASE("connect sends a full snapshot at the current tick") {
    SessionCore core(scene());
    core.tick();
    core.connect(7);
    const auto out = parsed(core.drain(), 7);
    REQUIRE(out.size() == 1);
    CHECK(out[0]["type"] == "state");
    CHECK(out[0]["mode"] == "full");
    CHECK(out[0]["tick"] == 1);
    CHECK(out[0]["entities"].contains("avatar"));
}

TEST_CASE("hello: controller, second controller refused, observer allowed") {
    Session s;
    s.core.connect(2);
    s.core.drain();
    const auto taken = s.send(2, hello("controller"));
    CHECK(error_code(taken) == "ControllerTaken");
    const auto welcome = of_type(taken, "welcome");
    REQUIRE(welcome.size() == 1);
    CHECK(welcome[0]["role"] == "observer");
    CHECK(s.core.controller() == s.ctl);

    s.core.disconnect(s.ctl);
    CHECK_FALSE(s.core.controller().has_value());
    const auto again = s.send(2, hello("controller"));
    CHECK_FALSE(error_code(again).has_value());
    CHECK(s.core.controller() == ConnId{2});
}

TEST_CASE("observers may send camera hints but nothing else") {
    Session s;
    s.core.connect(3);
    s.send(3, hello("observer"));
    CHECK(of_type(s.send(3, msg("camera", 1)), "ack").size() == 1);
    CHECK(error_code(s.send(3, command_msg(2, {{"op", "spawn_direct"}}))) == "NotController");
    json input = msg("input", 3);
    input["body"] = body_json(neutral_body());
    CHECK(error_code(s.send(3, input)) == "NotController");
}

TEST_CASE("sequence numbers must increase per connection") {
    Session s;
    CHECK_FALSE(error_code(s.send(s.ctl, msg("camera", 5))).has_value());
    CHECK(error_code(s.send(s.ctl, msg("camera", 5))) == "OutOfOrderSeq");
    CHECK(error_code(s.send(s.ctl, msg("camera", 4))) == "OutOfOrderSeq");
    CHECK(error_code(s.send(s.ctl, msg("camera"))) == "MalformedPayload");
    CHECK_FALSE(error_code(s.send(s.ctl, msg("camera", 6))).has_value());
}

TEST_CASE("malformed payloads are reported and leave the engine untouched") {
    Session s;
    s.tick(s.ctl);
    const std::string before = world_hash_hex(s.core.engine().world());
    for (const std::string& bad : {std::string("{not json"), std::string("[1,2]"), json{{"type", "command"}}.dump(),
                                   command_msg(1, {{"op", "warp"}}).dump(),
                                   command_msg(2, {{"op", "spawn_indirect"}}).dump(),
                                   msg("teleport", 3).dump()}) {
        s.core.receive(s.ctl, bad);
        CHECK(error_code(parsed(s.core.drain(), s.ctl)) == "MalformedPayload");
    }
    s.tick(s.ctl);
    CHECK(world_hash_hex(s.core.engine().world()) == before);
}

TEST_CASE("the last input is held while no new frames arrive") {
    Session s;
    BodyFrame b = neutral_body();
    b.right_hand.position = {-0.2, 1.3, 0.4};
    json input = msg("input", 1);
    input["body"] = body_json(b);
    s.send(s.ctl, input);
    s.tick(s.ctl, 5);
    CHECK(approx_equal(s.core.engine().world().avatar.local, b, 1e-12));
    CHECK(s.core.held_input() == b);
}

TEST_CASE("snapshots: full, empty heartbeat delta, then only what changed") {
    Session s;
    s.core.connect(4);
    const auto full = parsed(s.core.drain(), 4);
    REQUIRE(full.size() == 1);
    CHECK(full[0]["mode"] == "full");

    const auto quiet = of_type(s.tick(4, static_cast<int>(s.core.ticks_per_snapshot())), "state");
    REQUIRE(quiet.size() == 1);
    CHECK(quiet[0]["mode"] == "delta");
    CHECK(quiet[0]["entities"].empty());
    CHECK(quiet[0]["removed"].empty());

    s.send(s.ctl, command_msg(1, {{"op", "spawn_indirect"}, {"target", {{"p", {2, 0, 2}}}}}));
    s.tick(4, static_cast<int>(s.core.ticks_per_snapshot()));
    json input = msg("input", 2);
    BodyFrame b = neutral_body();
    b.left_hand.position.y += 0.2;
    input["body"] = body_json(b);
    s.send(s.ctl, input);
    s.send(s.ctl, command_msg(3, {{"op", "set_mode"}, {"clone", 5}, {"mode", "synchronous"}}));
    s.tick(4, static_cast<int>(s.core.ticks_per_snapshot()));

    // Static clone 5 only; moving the user's hand changes the avatar entry alone.
    s.send(s.ctl, command_msg(4, {{"op", "set_mode"}, {"clone", 5}, {"mode", "static"}}));
    s.tick(4, static_cast<int>(s.core.ticks_per_snapshot()));
    input["seq"] = 5;
    b.left_hand.position.y += 0.1;
    input["body"] = body_json(b);
    s.send(s.ctl, input);
    const auto one = of_type(s.tick(4, static_cast<int>(s.core.ticks_per_snapshot())), "state");
    REQUIRE(one.size() == 1);
    CHECK(one[0]["entities"].size() == 1);
    CHECK(one[0]["entities"].contains("avatar"));
}

TEST_CASE("a spawned clone appears in the next state message") {
    Session s;
    const auto acks = of_type(s.send(s.ctl, command_msg(1, {{"op", "spawn_indirect"}, {"target", {{"p", {3, 0, 0}}, {"yaw", 180}}}})), "ack");
    CHECK(acks.empty());  // acknowledged after the tick runs it
    const auto out = s.tick(s.ctl, static_cast<int>(s.core.ticks_per_snapshot()));
    const auto ack = of_type(out, "ack");
    REQUIRE(ack.size() == 1);
    CHECK(ack[0]["op"] == "spawn_indirect");
    const std::string key = "e" + std::to_string(ack[0]["result"]["entities"][0].get<int>());
    const auto states = of_type(out, "state");
    REQUIRE_FALSE(states.empty());
    CHECK(states.back()["entities"].contains(key));
    CHECK(states.back()["entities"][key]["kind"] == "clone");
}

TEST_CASE("failed commands come back as error events with their seq") {
    Session s;
    s.send(s.ctl, command_msg(9, {{"op", "undo"}}));
    const auto out = s.tick(s.ctl);
    REQUIRE(error_code(out) == "EmptyUndoStack");
    for (const auto& j : out) {
        if (j["type"] == "event") {
            CHECK(j["event"]["seq"] == 9);
        }
    }
}

TEST_CASE("reconnecting gets a fresh full snapshot") {
    Session s;
    s.core.connect(6);
    s.core.drain();
    s.tick(6, 10);
    s.core.disconnect(6);
    s.core.connect(6);
    const auto out = parsed(s.core.drain(), 6);
    REQUIRE(out.size() == 1);
    CHECK(out[0]["mode"] == "full");
}

TEST_CASE("scripted client: four spawn methods plus a replay, mirrored within wire precision") {
    Session s;
    StateMap mirror;
    s.core.connect(8);
    for (const auto& j : parsed(s.core.drain(), 8)) {
        apply_state_message(mirror, j);
    }
    std::int64_t seq = 1;
    auto pump = [&](int n) {
        for (const auto& j : s.tick(8, n)) {
            if (j["type"] == "state") {
                apply_state_message(mirror, j);
            }
        }
    };
    auto command = [&](json c) {
        s.send(s.ctl, command_msg(seq++, std::move(c)));
        pump(1);
    };
    auto input = [&](const BodyFrame& b) {
        json m = msg("input", seq++);
        m["body"] = body_json(b);
        s.send(s.ctl, m);
    };

    BodyFrame b = neutral_body();
    b.right_grab = true;
    input(b);
    pump(2);
    command({{"op", "start_recording"}, {"scope", "poses_and_grabs"}});
    for (int i = 0; i < 30; ++i) {
        b.left_hand.position.y = 1.0 + 0.01 * i;
        input(b);
        pump(1);
    }
    command({{"op", "stop_recording"}});
    command({{"op", "spawn_direct"}});
    command({{"op", "spawn_indirect"}, {"target", {{"p", {2, 0, 4}}, {"yaw", 45}}}, {"snap", "grid"}});
    command({{"op", "spawn_auto"}, {"selected", 2}});
    command({{"op", "spawn_relative"}, {"reference", 2}, {"target", 3}});
    command({{"op", "apply_recording"}, {"recording", 1}, {"target", {{"clone", 6}}}});
    pump(90);

    const StateMap truth = wire_state(s.core.engine());
    std::size_t clones = 0;
    for (const auto& [k, v] : truth) {
        clones += v.contains("kind") && v["kind"] == "clone" ? 1 : 0;
    }
    CHECK(clones == 4);
    CHECK(s.core.engine().world().tick % s.core.ticks_per_snapshot() == 0);
    CHECK(close_state(mirror, truth, 1e-4));

    json list = msg("list_recordings", seq++);
    const auto acks = of_type(s.send(s.ctl, list), "ack");
    REQUIRE(acks.size() == 1);
    CHECK(acks[0]["recordings"].size() == 1);
}

TEST_CASE("state deltas report removed entities") {
    StateMap a{{"avatar", 1}, {"e3", 2}};
    StateMap b{{"avatar", 1}};
    const json d = make_state_delta(&a, b, 10);
    CHECK(d["removed"] == json::array({"e3"}));
    StateMap mirror = a;
    apply_state_message(mirror, d);
    CHECK(mirror == b);
}

TEST_CASE("websocket server: handshake, command, snapshot") {
    namespace beast = boost::beast;
    namespace net = boost::asio;
    ServeOptions opts;
    opts.port = 0;
    SessionServer server(scene(), opts);
    server.start();
    REQUIRE(server.port() != 0);

    net::io_context ioc;
    net::ip::tcp::resolver resolver(ioc);
    beast::websocket::stream<beast::tcp_stream> ws(ioc);
    beast::get_lowest_layer(ws).expires_after(std::chrono::seconds(10));
    net::connect(beast::get_lowest_layer(ws).socket(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    beast::get_lowest_layer(ws).expires_never();
    ws.set_option(beast::websocket::stream_base::timeout::suggested(beast::role_type::client));
    ws.handshake("127.0.0.1", "/");

    auto read = [&]() {
        beast::flat_buffer buf;
        ws.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    };
    auto read_until = [&](auto pred) {
        for (int i = 0; i < 500; ++i) {
            json j = read();
            if (pred(j)) {
                return j;
            }
        }
        FAIL("message not seen");
        return json();
    };

    const json first = read();
    CHECK(first["type"] == "state");
    CHECK(first["mode"] == "full");

    ws.write(net::buffer(hello("controller").dump()));
    const json welcome = read_until([](const json& j) { return j["type"] == "welcome"; });
    CHECK(welcome["role"] == "controller");

    ws.write(net::buffer(command_msg(1, {{"op", "spawn_indirect"}, {"target", {{"p", {1, 0, 1}}}}}).dump()));
    const json ack = read_until([](const json& j) { return j["type"] == "ack" && j["seq"] == 1; });
    const std::string key = "e" + std::to_string(ack["result"]["entities"][0].get<int>());
    const json st = read_until([&](const json& j) { return j["type"] == "state" && j["entities"].contains(key); });
    CHECK(st["entities"][key]["mode"] == "static");

    ws.close(beast::websocket::close_code::normal);
    server.stop();
    CHECK(server.ticks() > 0);

    SessionServer holder(scene(), opts);
    holder.start();
    ServeOptions same;
    same.port = holder.port();
    SessionServer second(scene(), same);
    try {
        second.start();
        FAIL("expected PortInUse");
    } catch (const EngineError& e) {
        CHECK(e.code() == ErrorCode::PortInUse);
    }
    holder.stop();
}

TEST_CASE("every client message type in the protocol schema is accepted") {
    std::ifstream in(std::filesystem::path(CLONEMATOR_SCHEMA_DIR) / "protocol.schema.json");
    REQUIRE(in);
    const json schema = json::parse(in);
    std::set<std::string> types;
    for (const auto& alt : schema["$defs"]["client_message"]["oneOf"]) {
        types.insert(alt["properties"]["type"]["const"].get<std::string>());
    }
    CHECK(types == std::set<std::string>{"hello", "input", "command", "camera", "list_recordings", "release_control"});

    Session s;
    std::int64_t seq = 1;
    for (const auto& t : types) {
        json m = t == "hello" ? hello("controller") : msg(t, seq++);
        if (t == "input") {
            m["body"] = body_json(neutral_body());
        } else if (t == "command") {
            m["command"] = {{"op", "undo"}};
        }
        const auto out = s.send(s.ctl, m);
        const auto err = error_code(out);
        CHECK_MESSAGE(!(err && *err == "MalformedPayload"), t);
    }
}
