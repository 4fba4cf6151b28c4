#pragma once

#include <functional>

#include "bassl/autodiff.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

using ScalarFn = std::function<double(const Tensor&)>;

inline constexpr double kFiniteDiffStep = 1e-5;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element.
// Independent of the autodiff machinery: f is evaluated as a black box.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h = kFiniteDiffStep);

// max_i |a_i - n_i| / max(max|a|, max|n|, 1e-12). Normalising by the largest
// magnitude keeps near-zero entries from dominating the ratio.
double relative_error(const Tensor& analytic, const Tensor& numeric);

// Builds a scalar loss in a fresh graph on every call.
using LossBuilder = std::function<Var(Graph&)>;

// Compares the reverse-mode adjoint of `param` against finite differences of
// the same builder, perturbing param.value in place (restored afterwards).
// Returns the relative error.
double check_parameter_gradient(const LossBuilder& build, Parameter& param,
                                double h = kFiniteDiffStep);

}  // namespace bassl
