#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace xfmr {

/// Derives an independent stream seed from a master seed, a purpose tag and
/// an index. Every random draw in the library goes through one of these so a
/// single master seed reproduces an entire run.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

/// Seeded random stream. Distributions are implemented here rather than with
/// <random> distribution objects, whose output is library-specific.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal();

    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by `rng`.
void shuffle(std::span<std::size_t> values, Rng& rng);

}  // namespace xfmr
