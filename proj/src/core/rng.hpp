// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace gpsbc {

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11).
 *
 * Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits. Being a
 * pure function of (counter, key) it lets every SBC trial own an independent
 * stream without any shared state.
 */
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept;
};

/// Named stream lanes. A trial owns one stream id and may read several lanes.
enum class Lane : std::uint32_t {
  kMain = 0,
  kHyperPrior = 1,
};

/// Reserved stream ids for work that is not a numbered trial.
namespace stream_id {
inline constexpr std::uint64_t kPrologue = 0xFFFF'FFFF'0000'0000ull;
inline constexpr std::uint64_t kDiagnostics = 0xFFFF'FFFF'0001'0000ull;
inline constexpr std::uint64_t kBand = 0xFFFF'FFFF'0002'0000ull;
}  // namespace stream_id

//---------------------------------------------------------------------------//
/*!
 * Deterministic random stream addressed by (seed, stream id, lane).
 *
 * Normals are produced by the Box-Muller transform, two per pair of uniforms;
 * the second value of each pair is cached in the stream. Nothing else in the
 * library generates normals, so fixtures are stable across platforms up to
 * libm rounding.
 *
 * Satisfies UniformRandomBitGenerator so it can drive std algorithms.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream, Lane lane = Lane::kMain) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1); never returns an endpoint.
  double uniform_open() noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  /// Uniform integer on {0, ..., bound - 1}; bound must be >= 1.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gpsbc
