#pragma once

#include <array>
#include <cstdint>

#include "bassl/tensor.hpp"

namespace bassl {

/// xoshiro256** generator. The 256-bit state is expanded from a 64-bit seed
/// with splitmix64, so a seed fully determines the stream on every platform.
/// Gaussian draws use Box-Muller rather than <random> distributions, whose
/// output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() noexcept;
    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    // Uniform integer on [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    double gaussian(double mean = 0.0, double stddev = 1.0) noexcept;

    Tensor gaussian_tensor(Shape shape, double mean, double stddev);
    Tensor uniform_tensor(Shape shape, double lo, double hi);

    const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }

private:
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& x) noexcept;

// Derives an independent child seed from a parent seed and a list of stream
// coordinates (e.g. {step, view}). Used wherever a component needs its own
// stream so that enabling one feature never shifts another's draws.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept;

}  // namespace bassl
