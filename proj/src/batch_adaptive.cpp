#include "bassl/batch_adaptive.hpp"

#include "bassl/errors.hpp"
#include "bassl/patching.hpp"

#include <cmath>

namespace bassl {

ConvEmbeddingParams::ConvEmbeddingParams(std::size_t batch, std::size_t expansion,
                                         std::size_t layers, Rng& rng, const std::string& prefix)
    : batch_(batch), expansion_(expansion) {
    if (batch == 0 || expansion == 0) {
        throw ConfigError("conv embedding needs batch >= 1 and expansion >= 1");
    }
    const std::size_t wide = expansion * batch;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(batch));
    layers_.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::string base = prefix + ".layer" + std::to_string(l);
        layers_.push_back(ConvEmbeddingLayer{
            {base + ".expand.weight", rng.gaussian_tensor({wide, batch}, 0.0, stddev)},
            {base + ".expand.bias", Tensor({wide})},
            {base + ".compress.weight", Tensor({batch, wide})},
            {base + ".compress.bias", Tensor({batch})},
        });
    }
}

std::vector<Parameter*> ConvEmbeddingParams::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        out.insert(out.end(), {&l.expand_weight, &l.expand_bias, &l.compress_weight, &l.compress_bias});
    }
    return out;
}

std::vector<const Parameter*> ConvEmbeddingParams::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_) {
        out.insert(out.end(), {&l.expand_weight, &l.expand_bias, &l.compress_weight, &l.compress_bias});
    }
    return out;
}

std::size_t ConvEmbeddingParams::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) {
        n += p->value.size();
    }
    return n;
}

std::size_t conv_embedding_parameter_count(std::size_t batch, std::size_t expansion,
                                           std::size_t layers) noexcept {
    return layers * (2 * expansion * batch * batch + expansion * batch + batch);
}

Var conv1x1(const Var& x, const Var& kernel, const Var& bias) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || xs[0] != 1) {
        throw DimensionError("conv1x1 expects (1, C, Np, D), got " + shape_string(xs));
    }
    if (kernel.shape().size() != 2 || bias.shape().size() != 1 ||
        kernel.shape()[1] != xs[1] || bias.shape()[0] != kernel.shape()[0]) {
        throw DimensionError("conv1x1: kernel " + shape_string(kernel.shape()) + " / bias " +
                             shape_string(bias.shape()) + " incompatible with input " +
                             shape_string(xs));
    }
    const std::size_t cin = xs[1];
    const std::size_t cout = kernel.shape()[0];
    const std::size_t sites = xs[2] * xs[3];
    const Tensor* xv = &x.value();
    const Tensor* kv = &kernel.value();

    Tensor out({1, cout, xs[2], xs[3]});
    for (std::size_t o = 0; o < cout; ++o) {
        double* orow = out.data() + o * sites;
        const double b = bias.value()[o];
        for (std::size_t s = 0; s < sites; ++s) {
            orow[s] = b;
        }
        for (std::size_t c = 0; c < cin; ++c) {
            const double k = (*kv)[o * cin + c];
            const double* xrow = xv->data() + c * sites;
            for (std::size_t s = 0; s < sites; ++s) {
                orow[s] += k * xrow[s];
            }
        }
    }
    return x.graph().record(
        "conv1x1", std::move(out), {x, kernel, bias},
        [xv, kv, cin, cout, sites](const Tensor& g, std::span<Tensor* const> t) {
            for (std::size_t o = 0; o < cout; ++o) {
                const double* grow = g.data() + o * sites;
                if (t[2]) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < sites; ++i) {
                        s += grow[i];
                    }
                    (*t[2])[o] += s;
                }
                for (std::size_t c = 0; c < cin; ++c) {
                    const double* xrow = xv->data() + c * sites;
                    if (t[1]) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < sites; ++i) {
                            s += grow[i] * xrow[i];
                        }
                        (*t[1])[o * cin + c] += s;
                    }
                    if (t[0]) {
                        const double k = (*kv)[o * cin + c];
                        double* dx = t[0]->data() + c * sites;
                        for (std::size_t i = 0; i < sites; ++i) {
                            dx[i] += k * grow[i];
                        }
                    }
                }
            }
        });
}

Var conv_embedding(const Var& x, ConvEmbeddingParams& params) {
    if (x.shape().size() != 4 || x.shape()[1] != params.batch()) {
        throw DimensionError("conv embedding configured for " + std::to_string(params.batch()) +
                             " channels, got input " + shape_string(x.shape()));
    }
    Graph& g = x.graph();
    Var y = x;
    for (auto& layer : params.layers()) {
        Var hidden = relu(conv1x1(y, g.parameter(layer.expand_weight), g.parameter(layer.expand_bias)));
        Var branch = conv1x1(hidden, g.parameter(layer.compress_weight), g.parameter(layer.compress_bias));
        y = add(y, branch);
    }
    return y;
}

Var ba_forward(const Var& images, ConvEmbeddingParams& params, std::size_t patch) {
    const PatchGeometry geometry = make_patch_geometry(images.shape(), patch);
    const std::size_t batch = images.shape()[0];
    if (batch != params.batch()) {
        throw DimensionError("batch-adaptive module built for batch size " +
                             std::to_string(params.batch()) + ", got batch of " +
                             std::to_string(batch));
    }
    if (params.layer_count() == 0) {
        // Empty stack: the restored branch is identically zero.
        return relu(images);
    }
    Var tokens = patchify(images, patch);
    const Shape token_shape = tokens.shape();
    Var channels = reshape(tokens, {1, batch, geometry.tokens(), geometry.token_dim()});
    Var mixed = conv_embedding(channels, params);
    Var delta = reshape(sub(mixed, channels), token_shape);
    return relu(add(images, unpatchify(delta, geometry)));
}

Tensor ba_forward(const Tensor& images, ConvEmbeddingParams& params, std::size_t patch) {
    Graph g;
    return ba_forward(g.constant(images), params, patch).value();
}

}  // namespace bassl
