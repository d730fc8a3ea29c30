#pragma once

// Reproducible random streams. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); the distributions are implemented here
// because the std:: distributions are not portable across standard libraries.
//
// Streams are derived hierarchically from (seed, purpose tag, indices) so that
// any consumer (an SGLD chain, a minibatch's input noise, a split) gets its own
// stream regardless of evaluation order or thread count.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace heat {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng derive(std::uint64_t seed, std::string_view tag,
                      std::initializer_list<std::uint64_t> indices = {});

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);
    // Standard normal (Box-Muller, second variate cached).
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                       std::initializer_list<std::uint64_t> indices);

}  // namespace heat
