#include "bassl/gradcheck.hpp"

#include "bassl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace bassl {

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h) {
    if (!(h > 0.0)) {
        throw ParameterError("finite difference step must be positive");
    }
    Tensor probe = x;
    Tensor grad(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(const Tensor& analytic, const Tensor& numeric) {
    if (analytic.shape() != numeric.shape()) {
        throw DimensionError("relative_error: shapes " + shape_string(analytic.shape()) + " and " +
                             shape_string(numeric.shape()) + " differ");
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    }
    const double scale = std::max({max_abs(analytic), max_abs(numeric), 1e-12});
    return diff / scale;
}

double check_parameter_gradient(const LossBuilder& build, Parameter& param, double h) {
    Tensor analytic;
    {
        Graph g;
        Var loss = build(g);
        Gradients grads = g.backward(loss);
        analytic = grads.contains(param) ? grads.at(param) : Tensor(param.value.shape(), 0.0);
    }
    const Tensor saved = param.value;
    auto f = [&](const Tensor& x) {
        param.value = x;
        Graph g;
        return build(g).value().item();
    };
    Tensor numeric = finite_diff_grad(f, saved, h);
    param.value = saved;
    return relative_error(analytic, numeric);
}

}  // namespace bassl
