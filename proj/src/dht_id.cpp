#include "mmosim/dht_id.hpp"

#include <openssl/sha.h>

#include <cstdio>

namespace mmosim {
namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

DhtId DhtId::from_bytes(std::span<const std::uint8_t, kBytes> bytes) {
  DhtId id;
  for (std::size_t i = 0; i < 5; ++i) {
    id.limbs_[i] = (std::uint32_t{bytes[4 * i]} << 24) | (std::uint32_t{bytes[4 * i + 1]} << 16) |
                   (std::uint32_t{bytes[4 * i + 2]} << 8) | std::uint32_t{bytes[4 * i + 3]};
  }
  return id;
}

DhtId DhtId::from_u64(std::uint64_t low) {
  DhtId id;
  id.limbs_[3] = static_cast<std::uint32_t>(low >> 32);
  id.limbs_[4] = static_cast<std::uint32_t>(low);
  return id;
}

DhtId DhtId::max() {
  DhtId id;
  id.limbs_.fill(0xffffffffu);
  return id;
}

DhtId DhtId::fraction(std::uint64_t numerator, std::uint32_t denominator) {
  DhtId id;
  if (denominator == 0 || numerator % denominator == 0) return id;
  numerator %= denominator;
  // Long division of (numerator << 160) by denominator, one 32-bit digit at a time.
  std::uint64_t rem = numerator;
  for (std::size_t i = 0; i < 5; ++i) {
    u128 cur = (static_cast<u128>(rem) << 32);
    id.limbs_[i] = static_cast<std::uint32_t>(cur / denominator);
    rem = static_cast<std::uint64_t>(cur % denominator);
  }
  return id;
}

std::array<std::uint8_t, DhtId::kBytes> DhtId::bytes() const {
  std::array<std::uint8_t, kBytes> out{};
  for (std::size_t i = 0; i < 5; ++i) {
    out[4 * i] = static_cast<std::uint8_t>(limbs_[i] >> 24);
    out[4 * i + 1] = static_cast<std::uint8_t>(limbs_[i] >> 16);
    out[4 * i + 2] = static_cast<std::uint8_t>(limbs_[i] >> 8);
    out[4 * i + 3] = static_cast<std::uint8_t>(limbs_[i]);
  }
  return out;
}

std::string DhtId::hex() const {
  std::string out;
  out.reserve(40);
  char buf[9];
  for (auto limb : limbs_) {
    std::snprintf(buf, sizeof buf, "%08x", limb);
    out += buf;
  }
  return out;
}

std::uint32_t DhtId::bucket(std::uint32_t buckets) const {
  // floor(id * buckets / 2^160): only the carry out of the top limb survives.
  u128 carry = 0;
  for (std::size_t i = 5; i-- > 0;) {
    u128 prod = static_cast<u128>(limbs_[i]) * buckets + carry;
    carry = prod >> 32;
  }
  return static_cast<std::uint32_t>(carry);
}

DhtId DhtId::clockwise(const DhtId& from, const DhtId& to) { return to - from; }

DhtId operator+(const DhtId& a, const DhtId& b) {
  DhtId out;
  std::uint64_t carry = 0;
  for (std::size_t i = 5; i-- > 0;) {
    std::uint64_t s = std::uint64_t{a.limbs_[i]} + b.limbs_[i] + carry;
    out.limbs_[i] = static_cast<std::uint32_t>(s);
    carry = s >> 32;
  }
  return out;
}

DhtId operator-(const DhtId& a, const DhtId& b) {
  DhtId out;
  std::int64_t borrow = 0;
  for (std::size_t i = 5; i-- > 0;) {
    std::int64_t d = std::int64_t{a.limbs_[i]} - b.limbs_[i] - borrow;
    borrow = d < 0 ? 1 : 0;
    out.limbs_[i] = static_cast<std::uint32_t>(d + (borrow << 32));
  }
  return out;
}

DhtId sha1_id(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, SHA_DIGEST_LENGTH> digest{};
  SHA1(data.data(), data.size(), digest.data());
  return DhtId::from_bytes(digest);
}

}  // namespace mmosim
