#include "bassl/gradcheck_suite.hpp"

#include "bassl/batch_adaptive.hpp"
#include "bassl/contrastive.hpp"
#include "bassl/gradcheck.hpp"
#include "bassl/model.hpp"
#include "bassl/rng.hpp"

#include <algorithm>

namespace bassl {

namespace {

double worst_over(const LossBuilder& build, const std::vector<Parameter*>& params) {
    double worst = 0.0;
    for (Parameter* p : params) {
        worst = std::max(worst, check_parameter_gradient(build, *p));
    }
    return worst;
}

GradcheckReport check_ba(Rng& rng) {
    // (2, 6, 2, 2) with p = 1 -> tokens (2, 4, 6).
    Parameter x{"x", rng.uniform_tensor({2, 6, 2, 2}, 0.0, 1.0)};
    Parameter weights{"w", rng.gaussian_tensor({2, 6, 2, 2}, 0.0, 1.0)};
    ConvEmbeddingParams ba(2, 2, 1, rng);
    // Dense compress side so every path is exercised.
    for (auto& layer : ba.layers()) {
        layer.expand_bias.value = rng.gaussian_tensor(layer.expand_bias.value.shape(), 0.0, 0.5);
        layer.compress_weight.value = rng.gaussian_tensor(layer.compress_weight.value.shape(), 0.0, 0.5);
        layer.compress_bias.value = rng.gaussian_tensor(layer.compress_bias.value.shape(), 0.0, 0.5);
    }
    auto build = [&](Graph& g) {
        return sum(mul(ba_forward(g.parameter(x), ba, 1), g.constant(weights.value)));
    };
    auto params = ba.parameters();
    params.push_back(&x);
    return {"ba_forward", worst_over(build, params)};
}

GradcheckReport check_ctr(Rng& rng) {
    Parameter q{"q", rng.gaussian_tensor({4, 5}, 0.0, 1.0)};
    Parameter k{"k", rng.gaussian_tensor({4, 5}, 0.0, 1.0)};
    auto build = [&](Graph& g) { return ctr(g.parameter(q), g.parameter(k), 0.2); };
    return {"ctr", worst_over(build, {&q, &k})};
}

GradcheckReport check_symmetric_ctr(Rng& rng) {
    Parameter q1{"q1", rng.gaussian_tensor({3, 4}, 0.0, 1.0)};
    Parameter q2{"q2", rng.gaussian_tensor({3, 4}, 0.0, 1.0)};
    Parameter k1{"k1", rng.gaussian_tensor({3, 4}, 0.0, 1.0)};
    Parameter k2{"k2", rng.gaussian_tensor({3, 4}, 0.0, 1.0)};
    auto build = [&](Graph& g) {
        return symmetric_ctr(g.parameter(q1), g.parameter(q2), g.parameter(k1), g.parameter(k2), 0.5);
    };
    return {"symmetric_ctr", worst_over(build, {&q1, &q2, &k1, &k2})};
}

GradcheckReport check_negative_cosine(Rng& rng) {
    Parameter p{"p", rng.gaussian_tensor({4, 3}, 0.0, 1.0)};
    Parameter z{"z", rng.gaussian_tensor({4, 3}, 0.0, 1.0)};
    auto build = [&](Graph& g) { return negative_cosine(g.parameter(p), g.parameter(z)); };
    return {"negative_cosine", worst_over(build, {&p, &z})};
}

GradcheckReport check_encoder(Rng& rng) {
    ModelConfig cfg;
    cfg.encoder.widths = {2, 2, 2};
    cfg.encoder.image_size = 8;
    cfg.projector_hidden = 4;
    cfg.projector_out = 3;
    Track track(cfg, rng, "micro");
    // Nonzero biases keep ReLU kinks away from exact zeros.
    for (Parameter* p : track.parameters()) {
        if (p->value.rank() == 1) {
            p->value = rng.gaussian_tensor(p->value.shape(), 0.0, 0.1);
        }
    }
    Parameter x{"x", rng.uniform_tensor({2, 3, 8, 8}, 0.0, 1.0)};
    Parameter weights{"w", rng.gaussian_tensor({2, 3}, 0.0, 1.0)};
    auto build = [&](Graph& g) {
        return sum(mul(track.embed(g.parameter(x), Binding::trainable), g.constant(weights.value)));
    };
    auto params = track.parameters();
    params.push_back(&x);
    return {"encoder_micro", worst_over(build, params)};
}

}  // namespace

std::vector<GradcheckReport> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradcheckReport> out;
    out.push_back(check_ba(rng));
    out.push_back(check_ctr(rng));
    out.push_back(check_symmetric_ctr(rng));
    out.push_back(check_negative_cosine(rng));
    out.push_back(check_encoder(rng));
    return out;
}

}  // namespace bassl
