#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "mmosim/dht_id.hpp"
#include "mmosim/geometry.hpp"

namespace mmosim {

inline constexpr std::size_t kAttributeCount = 10;
// Accounted payload of one descriptor when a virtual server is shipped.
inline constexpr std::uint64_t kEntityDescriptorBytes = 140;
// Static world objects take uids from here upwards; avatars count up from zero.
inline constexpr std::uint32_t kObjectUidBase = 1'000'000;

struct EntityDescriptor {
  std::uint32_t uid{0};
  DhtId dht_id;
  float x{0.0f};
  float y{0.0f};
  std::array<std::pair<std::uint32_t, std::uint64_t>, kAttributeCount> attributes{};
  bool has_think{false};

  Point position() const { return {x, y}; }
};

// Canonical big-endian serialisation of the initial content (uid, position,
// attributes, think flag). The DHT id is not part of it.
std::vector<std::uint8_t> canonical_bytes(const EntityDescriptor& e);

// SHA-1 of the canonical serialisation.
DhtId hash_entity(const EntityDescriptor& e);

}  // namespace mmosim
