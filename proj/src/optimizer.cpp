#include "bassl/optimizer.hpp"

#include "bassl/errors.hpp"

#include <cmath>

namespace bassl {

AdamW::AdamW(std::vector<Parameter*> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.push_back({"opt.m." + p->name, Tensor(p->value.shape())});
        v_.push_back({"opt.v." + p->name, Tensor(p->value.shape())});
    }
}

void AdamW::step(const Gradients& grads, double lr) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(options_.beta1, t);
    const double bc2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        if (!grads.contains(p)) {
            continue;
        }
        const Tensor& g = grads.at(p);
        Tensor& m = m_[i].value;
        Tensor& v = v_[i].value;
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
            v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
            const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + options_.eps);
            p.value[j] -= lr * (update + options_.weight_decay * p.value[j]);
        }
        if (!p.value.all_finite()) {
            throw NumericError("parameter " + p.name + " became non-finite after optimizer step " +
                               std::to_string(steps_));
        }
    }
}

}  // namespace bassl
