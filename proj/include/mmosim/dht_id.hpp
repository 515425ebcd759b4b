#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>

namespace mmosim {

// 160-bit identifier on the DHT ring. Arithmetic wraps modulo 2^160.
class DhtId {
 public:
  static constexpr std::size_t kBytes = 20;

  constexpr DhtId() = default;

  static DhtId from_bytes(std::span<const std::uint8_t, kBytes> bytes);
  static DhtId from_u64(std::uint64_t low);
  static DhtId max();
  // floor(numerator * 2^160 / denominator); numerator == denominator wraps to zero.
  static DhtId fraction(std::uint64_t numerator, std::uint32_t denominator);

  std::array<std::uint8_t, kBytes> bytes() const;
  std::string hex() const;

  // Index of the equal-width bucket containing this id: floor(id * buckets / 2^160).
  std::uint32_t bucket(std::uint32_t buckets) const;

  // Clockwise distance from `from` to `to`.
  static DhtId clockwise(const DhtId& from, const DhtId& to);

  friend DhtId operator+(const DhtId& a, const DhtId& b);
  friend DhtId operator-(const DhtId& a, const DhtId& b);
  friend std::strong_ordering operator<=>(const DhtId&, const DhtId&) = default;
  friend bool operator==(const DhtId&, const DhtId&) = default;

  // Most significant limb first.
  const std::array<std::uint32_t, 5>& limbs() const { return limbs_; }

 private:
  std::array<std::uint32_t, 5> limbs_{};
};

// SHA-1 digest of an arbitrary byte string, as a ring identifier.
DhtId sha1_id(std::span<const std::uint8_t> data);

}  // namespace mmosim
