#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clonemator/engine.hpp"

namespace clonemator {

inline constexpr const char* kProtocolVersion = "clonemator-proto/1";

using ConnId = std::uint64_t;

// Entity key ("avatar", "recorder", "e<id>", "g<id>") to wire-quantized state.
using StateMap = std::map<std::string, json>;

StateMap wire_state(const Engine& engine);

// Full snapshot when last is null, else the entries that differ plus removed keys.
json make_state_delta(const StateMap* last, const StateMap& current, std::uint64_t tick,
                      const json& transitions = json::array());

// Client-side reconstruction: applies one state message to a mirror.
void apply_state_message(StateMap& mirror, const json& msg);

struct Outbound {
    ConnId conn = 0;
    std::string text;
};

// Protocol logic without transport. Not thread-safe: one thread owns it.
class SessionCore {
public:
    explicit SessionCore(Engine engine, double snapshot_hz = 20.0);

    void connect(ConnId c);
    void disconnect(ConnId c);
    // Parses and validates one client message. Commands are queued for the next tick.
    void receive(ConnId c, const std::string& text);
    // One engine step with the held input, then acks, events and any due snapshots.
    void tick();
    std::vector<Outbound> drain();

    const Engine& engine() const { return engine_; }
    std::optional<ConnId> controller() const { return controller_; }
    std::uint64_t ticks_per_snapshot() const { return ticks_per_snapshot_; }
    const BodyFrame& held_input() const { return input_; }

private:
    struct Connection {
        bool controller = false;
        std::optional<std::int64_t> last_seq;
        std::optional<StateMap> last_sent;
    };
    struct Pending {
        ConnId conn;
        std::int64_t seq;
    };
    struct ActiveTransition {
        SwitchTransition transition;
        std::uint64_t started_tick;
    };

    void send(ConnId c, const json& msg);
    void send_error(ConnId c, ErrorCode code, const std::string& detail, const json& seq);
    void send_snapshot(ConnId c, Connection& conn);
    void broadcast_event(const json& event);
    json active_transitions() const;

    Engine engine_;
    std::uint64_t ticks_per_snapshot_;
    std::map<ConnId, Connection> conns_;
    std::optional<ConnId> controller_;
    BodyFrame input_;
    std::map<std::uint64_t, Pending> pending_;  // engine token -> origin
    std::vector<ActiveTransition> transitions_;
    std::vector<Outbound> out_;
};

struct ServeOptions {
    unsigned short port = 8765;
    std::string address = "127.0.0.1";
    double snapshot_hz = 20.0;
    bool handle_signals = false;  // SIGINT/SIGTERM end wait()
};

// WebSocket front end. Connection I/O runs on its own thread; the engine runs
// on another, exchanging messages through one inbound and one outbound queue.
class SessionServer {
public:
    SessionServer(Engine engine, ServeOptions opts);
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    // Binds and starts both threads. Throws EngineError(PortInUse).
    void start();
    void stop();
    // Blocks until stop() is called or, with handle_signals, a signal arrives.
    void wait();
    unsigned short port() const { return bound_port_; }
    std::uint64_t ticks() const { return ticks_.load(); }

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
    unsigned short bound_port_ = 0;
    std::atomic<std::uint64_t> ticks_{0};
};

}  // namespace clonemator
