#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace gfmate {

/// SplitMix64 step. Used to expand a 64-bit seed into generator state and to
/// derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a base seed with a stream tag so that different consumers of the
/// same user seed draw from unrelated sequences.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xoshiro256** (Blackman & Vigna), seeded through SplitMix64.
///
/// All derived draws are defined here rather than through <random>
/// distributions, whose output is implementation-defined, so that sequences
/// reproduce bit-for-bit across standard libraries:
///   - uniform():     (next() >> 11) * 2^-53, in [0, 1)
///   - below(n):      Lemire's multiply-shift with rejection, in [0, n)
///   - normal():      Box-Muller on two uniform() draws, the first mapped to (0, 1]
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    double uniform();
    std::uint64_t below(std::uint64_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates, iterating from the back.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gfmate
