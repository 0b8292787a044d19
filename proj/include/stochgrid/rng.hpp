// SPDX-License-Identifier: Apache-2.0
#pragma once

// Counter-based random streams.
//
// Every simulated object draws from its own Philox4x32-10 substream keyed by
// (master seed, substream id). A path's randomness therefore depends only on
// its own index, and serial and threaded ensemble runs produce identical
// values.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "stochgrid/errors.hpp"

namespace stochgrid {

/// Provenance of one random stream.
struct SeedRecord {
  std::uint64_t master = 0;
  std::uint64_t substream = 0;

  friend bool operator==(const SeedRecord&, const SeedRecord&) = default;
};

// Substream id layout. Path ensembles use ids below kPilotStreamBase; pilot
// (design-normalization) ensembles live in their own block; the independent
// Brownian array of the limit law is offset by kLimitStreamOffset from the
// path it belongs to.
inline constexpr std::uint64_t kPilotStreamBase = std::uint64_t{1} << 60;
inline constexpr std::uint64_t kLimitStreamOffset = std::uint64_t{1} << 62;

enum class StreamRole { path, pilot, limit };

inline StreamRole stream_role(std::uint64_t substream) noexcept {
  if (substream >= kLimitStreamOffset) return StreamRole::limit;
  if (substream >= kPilotStreamBase) return StreamRole::pilot;
  return StreamRole::path;
}

inline SeedRecord path_seed(std::uint64_t master, std::uint64_t path_index) {
  if (path_index >= kPilotStreamBase) throw ConfigError("path index exceeds the path substream block");
  return {master, path_index};
}

inline SeedRecord pilot_seed(std::uint64_t master, std::uint64_t path_index) {
  if (path_index >= kLimitStreamOffset - kPilotStreamBase)
    throw ConfigError("pilot index exceeds the pilot substream block");
  return {master, kPilotStreamBase + path_index};
}

/// Seed of the limit-law Brownian array paired with the path drawn from `source`.
inline SeedRecord limit_seed(const SeedRecord& source) {
  if (stream_role(source.substream) == StreamRole::limit)
    throw ConfigError("limit stream derived from a limit stream");
  return {source.master, source.substream + kLimitStreamOffset};
}

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Satisfies
/// UniformRandomBitGenerator with 64-bit output.
class Philox4x32 {
public:
  using result_type = std::uint64_t;

  explicit Philox4x32(const SeedRecord& seed) noexcept
      : key_{static_cast<std::uint32_t>(seed.master), static_cast<std::uint32_t>(seed.master >> 32)},
        stream_{static_cast<std::uint32_t>(seed.substream),
                static_cast<std::uint32_t>(seed.substream >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (cursor_ == 2) refill();
    const std::uint64_t lo = buffer_[2 * cursor_];
    const std::uint64_t hi = buffer_[2 * cursor_ + 1];
    ++cursor_;
    return lo | (hi << 32);
  }

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

  void refill() noexcept {
    buffer_ = block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                     stream_[0], stream_[1]},
                    key_);
    ++counter_;
    cursor_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int cursor_ = 2;
};

/// Standard normal sampler (Marsaglia polar method). Fixed algorithm so that a
/// stream's normals depend only on the build, not on the standard library.
class GaussianStream {
public:
  explicit GaussianStream(const SeedRecord& seed) noexcept : engine_(seed) {}

  double operator()() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  Philox4x32 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stochgrid
