#pragma once

#include <cstdint>
#include <random>

namespace sice {

using Engine = std::mt19937_64;

/// Identifies one reproducible random substream. Identical (seed, stream_index)
/// pairs always produce identical draw sequences, so replicate i of a run can
/// be computed on any thread in any order.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_index = 0;

    Engine engine() const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_index),
                          static_cast<std::uint32_t>(stream_index >> 32), 0x51CEu};
        return Engine(seq);
    }

    /// Substream k of this stream; children of distinct parents or distinct
    /// k are distinct streams.
    RngStream child(std::uint64_t k) const { return {mix(seed, stream_index), k}; }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    // splitmix64 finalizer over the pair
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

}  // namespace sice
