#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bassl {

inline constexpr double kGradcheckTolerance = 1e-5;

struct GradcheckReport {
    std::string component;
    double max_relative_error = 0.0;
    bool passed() const noexcept { return max_relative_error <= kGradcheckTolerance; }
};

// Finite-difference verification of every differentiable component used in
// training, on small random instances drawn from `seed`:
//   ba_forward (B=2, Np=4, D=6, L=1), ctr, symmetric_ctr, negative_cosine,
//   micro encoder + projector (widths 2, 2, 2 on 8x8 inputs).
std::vector<GradcheckReport> run_gradcheck_suite(std::uint64_t seed);

}  // namespace bassl
