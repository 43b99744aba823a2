#include <doctest.h>

#include "clonemator/error.hpp"
#include "clonemator/world.hpp"
#include "clonemator/world_io.hpp"
#include "support.hpp"

using namespace clonemator;
using namespace clonemator::testing;

namespace {

Pose at(double x, double y, double z) { return {{x, y, z}, Quat::identity()}; }

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const EngineError& e) {
        return e.code();
    }
    FAIL("expected EngineError");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("add_object assigns fresh ids and indexes by tag") {
    World w;
    const EntityId a = w.add_object("peg", at(0, 0, 0), false);
    const EntityId b = w.add_object("peg", at(1, 0, 0), false);
    CHECK(a != b);
    CHECK(a != w.avatar.body_id);
    CHECK(w.objects_by_tag("peg") == std::vector<EntityId>{a, b});
    CHECK(code_of([&] { w.add_object("", at(0, 0, 0), false); }) == ErrorCode::EmptyTag);
}

TEST_CASE("objects_by_tag returns ascending ids and ignores other tags") {
    World w;
    std::vector<EntityId> pegs;
    for (int i = 0; i < 4; ++i) {
        pegs.push_back(w.add_object("peg", at(i, 0, 0), false));
    }
    w.add_object("hammer", at(0, 1, 0), true);
    CHECK(w.objects_by_tag("peg") == pegs);
    CHECK(w.objects_by_tag("anvil").empty());
}

TEST_CASE("nearest_object: radius and tie-break") {
    World w;
    const EntityId near = w.add_object("a", at(1, 0, 0), false);
    w.add_object("b", at(3, 0, 0), false);
    CHECK(w.nearest_object({0, 0, 0}, 5.0) == near);
    CHECK_FALSE(w.nearest_object({0, 0, 0}, 0.5).has_value());

    World tie;
    const EntityId first = tie.add_object("x", at(1, 0, 0), false);
    tie.add_object("x", at(-1, 0, 0), false);
    CHECK(tie.nearest_object({0, 0, 0}, 2.0) == first);
    CHECK(tie.nearest_object({0, 0, 0}, 2.0, std::string("y")) == std::nullopt);
}

TEST_CASE("world hash is stable, sensitive above and blind below 1e-6") {
    World w;
    const EntityId id = w.add_object("peg", at(0.5, 0.25, -1), false);
    CHECK(world_hash(w) == world_hash(w));

    World same = w;
    CHECK(world_hash(same) == world_hash(w));

    World moved = w;
    moved.object(id).pose.position.x += 1e-3;
    CHECK(world_hash(moved) != world_hash(w));

    World nudged = w;
    nudged.object(id).pose.position.x += 1e-9;
    CHECK(world_hash(nudged) == world_hash(w));
}

TEST_CASE("world hash ignores the tick counter") {
    World w;
    w.add_object("peg", at(0, 0, 0), false);
    World later = w;
    later.tick = 99;
    CHECK(world_hash(later) == world_hash(w));
}

TEST_CASE("hash of a random world survives save and load") {
    Rng rng(21);
    World w;
    for (int i = 0; i < 20; ++i) {
        const EntityId id = w.add_object(rng.coin() ? "peg" : "ball", random_pose(rng), rng.coin());
        w.object(id).scalar_state["depth"] = rng.uniform(0, 1);
    }
    w.avatar.root = random_yaw_transform(rng);
    w.avatar.local = random_local_body(rng);
    w.refresh_avatar_body();
    const World back = load_world(save_world(w));
    CHECK(world_hash_hex(back) == world_hash_hex(w));
    CHECK(back.objects_by_tag("peg") == w.objects_by_tag("peg"));
}

TEST_CASE("sha256 matches a published test vector") {
    CHECK(to_hex(sha256("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("neutral body faces +z with the left hand on +x") {
    const BodyFrame b = neutral_body();
    CHECK(b.head.position.y == doctest::Approx(1.6));
    CHECK(b.left_hand.position.x > 0.0);
    CHECK(b.right_hand.position.x < 0.0);
}

TEST_CASE("config validation rejects non-positive values") {
    WorldConfig c;
    CHECK_NOTHROW(c.validate());
    c.tick_rate = 0;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
}
