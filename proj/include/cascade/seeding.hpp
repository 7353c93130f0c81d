#pragma once

#include <cstdint>
#include <string_view>

namespace cascade {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Per-item seed: depends only on the run seed and the item id, never on batch layout.
constexpr std::uint64_t item_seed(std::uint64_t run_seed, std::string_view item_id) {
  return splitmix64(run_seed ^ fnv1a64(item_id));
}

/// Independent sub-streams of one item seed.
enum class SeedStream : std::uint64_t { kCandidateShuffle = 0x5348554646ULL, kRefiner = 0x524546494eULL };

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return splitmix64(seed ^ static_cast<std::uint64_t>(stream));
}

}  // namespace cascade
