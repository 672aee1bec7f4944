#pragma once

// Counter-based random numbers.
//
// Every draw is a pure function of (seed, stream, counter), so simulations
// give bit-identical results regardless of evaluation order or thread count.
//
//   key      = splitmix64(seed ^ splitmix64(stream))    split into two u32 words
//   block    = Philox4x32-10(counter, key)              four u32 words
//   u64 pair = (block[1] << 32 | block[0], block[3] << 32 | block[2])
//   uniform  = (u64 >> 11) * 2^-53                      in [0, 1)
//
// Philox4x32-10 follows Salmon et al. (SC'11) / Random123 exactly and is
// checked against the Random123 known-answer vectors in the tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace uep::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to turn image ids into stream numbers.
inline constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr Counter philox4x32_10(Counter ctr, Key key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

inline constexpr Key derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  const std::uint64_t k = splitmix64(seed ^ splitmix64(stream));
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

inline constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

struct Draw {
  std::uint64_t a;
  std::uint64_t b;
  double first() const noexcept { return to_unit(a); }
  double second() const noexcept { return to_unit(b); }
};

// One 128-bit block addressed by (index, lane).
inline constexpr Draw draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                           std::uint32_t lane = 0) noexcept {
  const Counter out = philox4x32_10(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), lane, 0u},
      derive_key(seed, stream));
  return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
}

// Sequential view over one (seed, stream) pair. Two u64 per block.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() noexcept {
    if (!have_spare_) {
      const Draw d = draw(seed_, stream_, block_++, 1u);
      spare_ = d.b;
      have_spare_ = true;
      return d.a;
    }
    have_spare_ = false;
    return spare_;
  }

  double uniform() noexcept { return to_unit(next_u64()); }

  // Uniform integer in [0, n), n > 0. Multiply-shift; bias is below 2^-32 for n < 2^32.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller, cosine branch only.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::uint64_t spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace uep::rng
