#include "clonemator/session.hpp"

#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace clonemator {

namespace {

std::string key_of(EntityId id) { return "e" + std::to_string(id.value); }
std::string key_of(GroupId id) { return "g" + std::to_string(id.value); }

json envelope(std::string_view type) { return json{{"v", kProtocolVersion}, {"type", type}}; }

}  // namespace

StateMap wire_state(const Engine& engine) {
    constexpr Precision p = Precision::Wire;
    const World& w = engine.world();
    StateMap s;
    s["avatar"] = json{{"body_id", w.avatar.body_id.value},
                       {"root", transform_json(w.avatar.root, p)},
                       {"body", body_json(w.avatar.body, p)},
                       {"scale", quantize(w.avatar.scale, p)}};
    const RecorderStatus rs = engine.recorder().status();
    s["recorder"] = json{{"active", rs.active}, {"scope", scope_name(rs.scope)}, {"frames", rs.frames}};

    for (const auto& [id, c] : w.clones) {
        json j{{"kind", "clone"},
               {"mode", mode_name(c.mode)},
               {"root", transform_json(c.root, p)},
               {"body", body_json(c.body, p)},
               {"mirror", c.mirror},
               {"scale", quantize(c.scale, p)},
               {"group", c.group ? json(c.group->value) : json(nullptr)},
               {"color", c.outline_color_index}};
        if (const auto* r = std::get_if<ReplayedMode>(&c.mode)) {
            j["recording"] = r->recording.value;
            j["phase"] = quantize(r->phase, p);
        }
        s[key_of(id)] = std::move(j);
    }
    for (const auto& [id, o] : w.objects) {
        json state = json::object();
        for (const auto& [k, v] : o.scalar_state) {
            state[k] = quantize(v, p);
        }
        const Attachment* a = w.attachment_for(id);
        s[key_of(id)] = json{{"kind", "object"},
                             {"tag", o.tag},
                             {"pose", pose_json(o.pose, p)},
                             {"grabbable", o.grabbable},
                             {"scalar_state", state},
                             {"held_by", a ? json(a->holder.value) : json(nullptr)},
                             {"hand", a ? json(std::string(hand_name(a->hand))) : json(nullptr)}};
    }
    for (const auto& [gid, g] : w.groups) {
        json members = json::array();
        for (auto m : g.members) {
            members.push_back(m.value);
        }
        s[key_of(gid)] = json{{"kind", "group"}, {"members", members}, {"color", g.color_index}};
    }
    return s;
}

json make_state_delta(const StateMap* last, const StateMap& current, std::uint64_t tick, const json& transitions) {
    json msg = envelope("state");
    msg["tick"] = tick;
    json entities = json::object();
    if (!last) {
        msg["mode"] = "full";
        for (const auto& [k, v] : current) {
            entities[k] = v;
        }
    } else {
        msg["mode"] = "delta";
        json removed = json::array();
        for (const auto& [k, v] : current) {
            auto it = last->find(k);
            if (it == last->end() || it->second != v) {
                entities[k] = v;
            }
        }
        for (const auto& [k, v] : *last) {
            if (!current.contains(k)) {
                removed.push_back(k);
            }
        }
        msg["removed"] = removed;
    }
    msg["entities"] = entities;
    msg["transitions"] = transitions;
    return msg;
}

void apply_state_message(StateMap& mirror, const json& msg) {
    if (msg.at("mode") == "full") {
        mirror.clear();
    }
    for (const auto& [k, v] : msg.at("entities").items()) {
        mirror[k] = v;
    }
    if (msg.contains("removed")) {
        for (const auto& k : msg["removed"]) {
            mirror.erase(k.get<std::string>());
        }
    }
}

SessionCore::SessionCore(Engine engine, double snapshot_hz) : engine_(std::move(engine)) {
    if (!(snapshot_hz > 0.0)) {
        throw EngineError(ErrorCode::InvalidArgument, "snapshot rate must be positive");
    }
    const double rate = engine_.world().config.tick_rate;
    ticks_per_snapshot_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(rate / snapshot_hz)));
    input_ = engine_.world().avatar.local;
}

void SessionCore::send(ConnId c, const json& msg) { out_.push_back({c, msg.dump()}); }

void SessionCore::send_error(ConnId c, ErrorCode code, const std::string& detail, const json& seq) {
    json msg = envelope("event");
    msg["tick"] = engine_.world().tick;
    msg["event"] = json{{"kind", "error"}, {"code", to_string(code)}, {"detail", detail}, {"seq", seq}};
    send(c, msg);
}

json SessionCore::active_transitions() const {
    json out = json::array();
    for (const auto& t : transitions_) {
        json j = transition_json(t.transition, Precision::Wire);
        j["started_tick"] = t.started_tick;
        out.push_back(j);
    }
    return out;
}

void SessionCore::send_snapshot(ConnId c, Connection& conn) {
    StateMap current = wire_state(engine_);
    send(c, make_state_delta(conn.last_sent ? &*conn.last_sent : nullptr, current, engine_.world().tick,
                             active_transitions()));
    conn.last_sent = std::move(current);
}

void SessionCore::broadcast_event(const json& event) {
    json msg = envelope("event");
    msg["tick"] = engine_.world().tick;
    msg["event"] = event;
    for (const auto& [c, conn] : conns_) {
        send(c, msg);
    }
}

void SessionCore::connect(ConnId c) {
    Connection& conn = conns_[c];
    conn = Connection{};
    send_snapshot(c, conn);
}

void SessionCore::disconnect(ConnId c) {
    conns_.erase(c);
    if (controller_ == c) {
        controller_.reset();
    }
}

void SessionCore::receive(ConnId c, const std::string& text) {
    auto it = conns_.find(c);
    if (it == conns_.end()) {
        return;
    }
    Connection& conn = it->second;

    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        send_error(c, ErrorCode::MalformedPayload, "message is not a JSON object", nullptr);
        return;
    }
    const json seq_json = j.contains("seq") ? j["seq"] : json(nullptr);
    if (!j.contains("v") || j["v"] != kProtocolVersion) {
        send_error(c, ErrorCode::MalformedPayload, std::string("v must be ") + kProtocolVersion, seq_json);
        return;
    }
    if (!j.contains("type") || !j["type"].is_string()) {
        send_error(c, ErrorCode::MalformedPayload, "missing type", seq_json);
        return;
    }
    const std::string type = j["type"];

    if (type == "hello") {
        const std::string role = j.contains("role") && j["role"].is_string() ? j["role"].get<std::string>() : "";
        if (role != "controller" && role != "observer") {
            send_error(c, ErrorCode::MalformedPayload, "role must be controller or observer", seq_json);
            return;
        }
        if (role == "controller") {
            if (controller_ && *controller_ != c) {
                send_error(c, ErrorCode::ControllerTaken, "another client controls the avatar", seq_json);
            } else {
                controller_ = c;
                conn.controller = true;
            }
        }
        json msg = envelope("welcome");
        msg["conn"] = c;
        msg["role"] = conn.controller ? "controller" : "observer";
        msg["tick"] = engine_.world().tick;
        msg["tick_rate"] = engine_.world().config.tick_rate;
        msg["snapshot_ticks"] = ticks_per_snapshot_;
        send(c, msg);
        return;
    }

    if (!seq_json.is_number_integer()) {
        send_error(c, ErrorCode::MalformedPayload, "seq must be an integer", seq_json);
        return;
    }
    const std::int64_t seq = seq_json.get<std::int64_t>();
    if (conn.last_seq && seq <= *conn.last_seq) {
        send_error(c, ErrorCode::OutOfOrderSeq,
                   "seq " + std::to_string(seq) + " after " + std::to_string(*conn.last_seq), seq_json);
        return;
    }
    conn.last_seq = seq;

    const auto ack = [&](json extra) {
        json msg = envelope("ack");
        msg["seq"] = seq;
        msg["tick"] = engine_.world().tick;
        msg.update(extra);
        send(c, msg);
    };

    if (type == "camera") {
        ack(json::object());
    } else if (type == "list_recordings") {
        json list = json::array();
        for (const auto& r : engine_.recordings().list()) {
            list.push_back(json{{"id", r.id.value},
                                {"duration", r.duration},
                                {"scope", scope_name(r.scope)},
                                {"frames", r.frame_count}});
        }
        ack(json{{"recordings", list}});
    } else if (type == "input" || type == "command" || type == "release_control") {
        if (!conn.controller) {
            send_error(c, ErrorCode::NotController, type + " needs the controller role", seq_json);
            return;
        }
        if (type == "release_control") {
            controller_.reset();
            conn.controller = false;
            ack(json::object());
        } else if (type == "input") {
            try {
                input_ = body_from_json(require(j, "body", "input"), "input.body");
            } catch (const EngineError& e) {
                send_error(c, ErrorCode::MalformedPayload, e.what(), seq_json);
            }
        } else {
            try {
                EngineCommand cmd = command_from_json(require(j, "command", "command"), numeric_ids(), "command");
                pending_[engine_.enqueue(std::move(cmd))] = Pending{c, seq};
            } catch (const EngineError& e) {
                send_error(c, ErrorCode::MalformedPayload, e.what(), seq_json);
            }
        }
    } else {
        send_error(c, ErrorCode::MalformedPayload, "unknown type '" + type + "'", seq_json);
    }
}

void SessionCore::tick() {
    const TickEvents ev = engine_.step(input_);
    const double dt = engine_.world().config.tick_period();

    for (const auto& o : ev.commands) {
        auto it = pending_.find(o.token);
        if (o.replayed) {
            broadcast_event(json{{"kind", "replayed_command"}, {"outcome", command_outcome_json(o)}});
        }
        if (it == pending_.end()) {
            continue;
        }
        const Pending p = it->second;
        pending_.erase(it);
        if (!conns_.contains(p.conn)) {
            continue;
        }
        if (o.ok()) {
            json msg = envelope("ack");
            msg["seq"] = p.seq;
            msg["tick"] = ev.tick;
            msg["op"] = o.op;
            msg["result"] = result_to_json(*o.result);
            send(p.conn, msg);
        } else {
            send_error(p.conn, *o.error, o.detail, p.seq);
        }
    }
    for (const auto& e : ev.contacts) {
        json j = contact_event_json(e);
        j["kind"] = "contact";
        broadcast_event(j);
    }
    for (const auto& t : ev.transitions) {
        json j = transition_json(t, Precision::Wire);
        j["kind"] = "transition";
        broadcast_event(j);
        transitions_.push_back({t, ev.tick});
    }
    if (ev.recording_started) {
        broadcast_event(json{{"kind", "recording_started"}});
    }
    for (auto id : ev.recordings_stopped) {
        broadcast_event(json{{"kind", "recording_stopped"}, {"recording", id.value}});
    }
    if (ev.self_replay_finished) {
        broadcast_event(json{{"kind", "self_replay_finished"}});
    }

    const std::uint64_t now = engine_.world().tick;
    std::erase_if(transitions_, [&](const ActiveTransition& t) {
        return static_cast<double>(now - t.started_tick) * dt >= t.transition.duration;
    });

    if (now % ticks_per_snapshot_ == 0) {
        for (auto& [c, conn] : conns_) {
            send_snapshot(c, conn);
        }
    }
}

std::vector<Outbound> SessionCore::drain() { return std::exchange(out_, {}); }

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

struct Inbound {
    enum class Kind { Connect, Message, Disconnect } kind;
    ConnId conn;
    std::string text;
};

class WsConnection;

}  // namespace

struct SessionServer::Impl {
    Impl(Engine engine, ServeOptions o) : core(std::move(engine), o.snapshot_hz), opts(std::move(o)) {}

    SessionCore core;
    ServeOptions opts;
    net::io_context ioc;
    std::optional<tcp::acceptor> acceptor;
    std::optional<net::signal_set> signals;
    std::thread io_thread;
    std::thread engine_thread;
    std::atomic<bool> running{false};

    std::mutex in_mu;
    std::deque<Inbound> inbound;

    std::map<ConnId, std::shared_ptr<WsConnection>> conns;  // io thread only
    ConnId next_conn = 1;

    std::mutex stop_mu;
    std::condition_variable stop_cv;
    bool stop_requested = false;

    void push(Inbound in) {
        std::lock_guard lock(in_mu);
        inbound.push_back(std::move(in));
    }
    void request_stop() {
        {
            std::lock_guard lock(stop_mu);
            stop_requested = true;
        }
        stop_cv.notify_all();
    }
    void accept();
    void deliver(std::vector<Outbound> out);
    void engine_loop(std::atomic<std::uint64_t>& ticks);
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, SessionServer::Impl& impl, ConnId id)
        : ws_(std::move(socket)), impl_(impl), id_(id) {}

    void run() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) {
                spdlog::debug("connection {}: handshake failed: {}", self->id_, ec.message());
                self->impl_.conns.erase(self->id_);
                return;
            }
            self->open_ = true;
            self->impl_.push({Inbound::Kind::Connect, self->id_, {}});
            self->read();
        });
    }

    void send(std::string text) {
        if (!open_) {
            return;
        }
        queue_.push_back(std::move(text));
        if (queue_.size() == 1) {
            write();
        }
    }

    void close() {
        if (open_) {
            beast::error_code ec;
            beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        }
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed();
                return;
            }
            self->impl_.push({Inbound::Kind::Message, self->id_, beast::buffers_to_string(self->buffer_.data())});
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) {
                self->write();
            }
        });
    }

    void closed() {
        if (!open_) {
            return;
        }
        open_ = false;
        queue_.clear();
        impl_.push({Inbound::Kind::Disconnect, id_, {}});
        impl_.conns.erase(id_);
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    SessionServer::Impl& impl_;
    ConnId id_;
    bool open_ = false;
};

}  // namespace

void SessionServer::Impl::accept() {
    acceptor->async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != net::error::operation_aborted) {
                spdlog::warn("accept failed: {}", ec.message());
                accept();
            }
            return;
        }
        const ConnId id = next_conn++;
        auto conn = std::make_shared<WsConnection>(std::move(socket), *this, id);
        conns[id] = conn;
        conn->run();
        accept();
    });
}

void SessionServer::Impl::deliver(std::vector<Outbound> out) {
    if (out.empty()) {
        return;
    }
    net::post(ioc, [this, out = std::move(out)]() mutable {
        for (auto& o : out) {
            if (auto it = conns.find(o.conn); it != conns.end()) {
                it->second->send(std::move(o.text));
            }
        }
    });
}

void SessionServer::Impl::engine_loop(std::atomic<std::uint64_t>& ticks) {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(core.engine().world().config.tick_period()));
    auto next = clock::now();
    while (running.load()) {
        std::deque<Inbound> batch;
        {
            std::lock_guard lock(in_mu);
            batch.swap(inbound);
        }
        for (auto& in : batch) {
            switch (in.kind) {
                case Inbound::Kind::Connect: core.connect(in.conn); break;
                case Inbound::Kind::Message: core.receive(in.conn, in.text); break;
                case Inbound::Kind::Disconnect: core.disconnect(in.conn); break;
            }
        }
        try {
            core.tick();
        } catch (const std::exception& e) {
            spdlog::error("tick failed: {}", e.what());
        }
        ticks.store(core.engine().world().tick);
        deliver(core.drain());
        next += period;
        const auto now = clock::now();
        if (next < now - period * 10) {
            next = now;
        }
        std::this_thread::sleep_until(next);
    }
}

SessionServer::SessionServer(Engine engine, ServeOptions opts)
    : impl_(std::make_unique<Impl>(std::move(engine), std::move(opts))) {}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start() {
    Impl& im = *impl_;
    beast::error_code ec;
    const auto address = net::ip::make_address(im.opts.address, ec);
    if (ec) {
        throw EngineError(ErrorCode::InvalidArgument, "bad address " + im.opts.address);
    }
    const tcp::endpoint endpoint{address, im.opts.port};
    im.acceptor.emplace(im.ioc);
    im.acceptor->open(endpoint.protocol(), ec);
    if (!ec) {
        im.acceptor->set_option(net::socket_base::reuse_address(true), ec);
        im.acceptor->bind(endpoint, ec);
    }
    if (!ec) {
        im.acceptor->listen(net::socket_base::max_listen_connections, ec);
    }
    if (ec) {
        throw EngineError(ErrorCode::PortInUse, "cannot listen on port " + std::to_string(im.opts.port) + ": " + ec.message());
    }
    bound_port_ = im.acceptor->local_endpoint().port();
    if (im.opts.handle_signals) {
        im.signals.emplace(im.ioc, SIGINT, SIGTERM);
        im.signals->async_wait([&im](beast::error_code e, int) {
            if (!e) {
                im.request_stop();
            }
        });
    }
    im.accept();
    im.running = true;
    im.io_thread = std::thread([&im] { im.ioc.run(); });
    im.engine_thread = std::thread([this] { impl_->engine_loop(ticks_); });
    spdlog::info("serving on {}:{} at {} Hz", im.opts.address, bound_port_, im.core.engine().world().config.tick_rate);
}

void SessionServer::stop() {
    if (!impl_) {
        return;
    }
    Impl& im = *impl_;
    im.running = false;
    if (im.engine_thread.joinable()) {
        im.engine_thread.join();
    }
    if (im.io_thread.joinable()) {
        net::post(im.ioc, [&im] {
            beast::error_code ec;
            if (im.acceptor) {
                im.acceptor->close(ec);
            }
            if (im.signals) {
                im.signals->cancel();
            }
            for (auto& [id, c] : im.conns) {
                c->close();
            }
            im.ioc.stop();
        });
        im.io_thread.join();
    }
    im.request_stop();
}

void SessionServer::wait() {
    Impl& im = *impl_;
    std::unique_lock lock(im.stop_mu);
    im.stop_cv.wait(lock, [&im] { return im.stop_requested; });
}

}  // namespace clonemator
