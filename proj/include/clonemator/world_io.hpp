#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "clonemator/json_io.hpp"
#include "clonemator/world.hpp"

namespace clonemator {

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& d);

// Canonical document of the observable world: objects, clones, groups,
// attachments and the avatar, each list sorted by id. Tick, undo history and
// recordings are not part of it.
json world_to_json(const World& w, Precision p = Precision::Exact);

// SHA-256 of the canonical document with scalars rounded to 1e-6.
Digest world_hash(const World& w);
std::string world_hash_hex(const World& w);

Digest sha256(const std::string& bytes);

// Save/load keep the canonical field set plus the config block.
json save_world(const World& w);
World load_world(const json& doc);

}  // namespace clonemator
