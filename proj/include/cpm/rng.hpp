#pragma once

#include <cstdint>
#include <string_view>

namespace cpm {

// Counter-mode splitmix64 generator. All sampling helpers are implemented
// from raw bits so that streams are bit-reproducible across platforms and
// standard-library versions (std::normal_distribution is not portable).
//
// Every consumer derives its own stream with derive_seed(master, label,
// index); the label scheme is documented in tools/cpm.cpp.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Multiply-shift bounded draw; bias is < 2^-64, irrelevant here.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<std::int64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; generates pairs, caches the second.
    double normal();

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// FNV-1a over (master, label, index). Used to fan one master seed out into
// named independent substreams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

}  // namespace cpm
