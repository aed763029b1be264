#pragma once

#include <cstdint>
#include <random>

namespace tix {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Which family of permutation rounds a substream feeds. The numeric values are
// part of the seed derivation and must not change.
enum class StreamKind : std::uint64_t {
    importance = 1,       // cross-instance permutation of a feature set's full sequence
    window_search = 2,    // paired rounds shared by all candidate windows of one search
    window_test = 3,      // fresh rounds on the localized window
    feature_ordering = 4, // within-sequence reordering over [1, L]
    window_ordering = 5,  // within-window reordering over the localized window
    generation = 16,
    ground_truth = 17,
    replicate = 18,
};

// Identifies one substream family: (global seed, unit, kind). `unit` is a
// feature index, a cell index or a feature-set id.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t unit = 0;
    StreamKind kind = StreamKind::importance;
};

// Seed for round `round` of the family `key`:
//   mix64(mix64(mix64(mix64(seed) ^ unit) ^ kind) ^ round)
// Results therefore never depend on execution order or thread count.
constexpr std::uint64_t substream_seed(const StreamKey& key, std::uint64_t round) {
    std::uint64_t h = mix64(key.seed);
    h = mix64(h ^ key.unit);
    h = mix64(h ^ static_cast<std::uint64_t>(key.kind));
    return mix64(h ^ round);
}

inline Rng round_stream(const StreamKey& key, std::uint64_t round) {
    return Rng(substream_seed(key, round));
}

}  // namespace tix
