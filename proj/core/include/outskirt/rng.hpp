#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace outskirt {

using Engine = std::mt19937_64;

/// One splitmix64 step; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Named substream of a master seed ("ae-init", "vae-noise", "synthesis", ...).
/// Substreams are independent of each other, so toggling one pipeline stage
/// never shifts the randomness of another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept;

/// Indexed child of a seed (fold number, sample counter, grid cell, ...).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace outskirt
