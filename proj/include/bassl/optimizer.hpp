#pragma once

#include <cstddef>
#include <vector>

#include "bassl/autodiff.hpp"

namespace bassl {

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
/// Moment buffers are Parameters named "opt.m.<param>" / "opt.v.<param>" so
/// they serialise alongside the model.
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamWOptions options = {});

    // Parameters absent from `grads` are left untouched (no decay either).
    // Throws NumericError if any parameter becomes non-finite.
    void step(const Gradients& grads, double lr);

    std::size_t step_count() const noexcept { return steps_; }
    void set_step_count(std::size_t steps) noexcept { steps_ = steps; }

    const std::vector<Parameter*>& parameters() const noexcept { return params_; }
    std::vector<Parameter>& first_moments() noexcept { return m_; }
    std::vector<Parameter>& second_moments() noexcept { return v_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Parameter> m_;
    std::vector<Parameter> v_;
    AdamWOptions options_;
    std::size_t steps_ = 0;
};

}  // namespace bassl
