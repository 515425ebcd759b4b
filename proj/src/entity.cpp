#include "mmosim/entity.hpp"

#include <bit>
#include <cstring>

namespace mmosim {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

std::vector<std::uint8_t> canonical_bytes(const EntityDescriptor& e) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 + kAttributeCount * 12 + 1);
  put_u32(out, e.uid);
  put_u32(out, std::bit_cast<std::uint32_t>(e.x));
  put_u32(out, std::bit_cast<std::uint32_t>(e.y));
  for (const auto& [key, value] : e.attributes) {
    put_u32(out, key);
    put_u64(out, value);
  }
  out.push_back(e.has_think ? 1 : 0);
  return out;
}

DhtId hash_entity(const EntityDescriptor& e) {
  auto bytes = canonical_bytes(e);
  return sha1_id(bytes);
}

}  // namespace mmosim
