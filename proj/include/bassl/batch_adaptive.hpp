#pragma once

// Batch-adaptive (BA) fusion.
//
// The batch axis of the patch-token tensor is reinterpreted as the channel
// axis of a single "image" (1, B, Np, D). Stacked 1x1 convolutions over that
// axis mix instances at every (token, feature) site; the mixed result is
// restored to image layout and fused with the input:
//
//   T     = patchify(x)                         (B, Np, D) -> (1, B, Np, D)
//   T'    = CE(T)                               L residual layers
//   x_out = ReLU(x + unpatchify(T' - T))
//
// Each CE layer is y = x + compress(ReLU(expand(x))), expand: B -> r*B,
// compress: r*B -> B. With every compress kernel and bias at zero, T' == T
// exactly and x_out == ReLU(x) == x for inputs in [0, 1].

#include <cstddef>
#include <string>
#include <vector>

#include "bassl/autodiff.hpp"
#include "bassl/rng.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

struct ConvEmbeddingLayer {
    Parameter expand_weight;    // (r*B, B)
    Parameter expand_bias;      // (r*B)
    Parameter compress_weight;  // (B, r*B)
    Parameter compress_bias;    // (B)
};

class ConvEmbeddingParams {
public:
    ConvEmbeddingParams() = default;
    // Expand kernels ~ N(0, 1/sqrt(B)); expand biases and the whole compress
    // side start at zero.
    ConvEmbeddingParams(std::size_t batch, std::size_t expansion, std::size_t layers, Rng& rng,
                        const std::string& prefix = "ba");

    std::size_t batch() const noexcept { return batch_; }
    std::size_t expansion() const noexcept { return expansion_; }
    std::size_t layer_count() const noexcept { return layers_.size(); }

    std::vector<ConvEmbeddingLayer>& layers() noexcept { return layers_; }
    const std::vector<ConvEmbeddingLayer>& layers() const noexcept { return layers_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

private:
    std::size_t batch_ = 0;
    std::size_t expansion_ = 1;
    std::vector<ConvEmbeddingLayer> layers_;
};

// L * (2 r B^2 + r B + B)
std::size_t conv_embedding_parameter_count(std::size_t batch, std::size_t expansion,
                                           std::size_t layers) noexcept;

// x: (1, Cin, Np, D), kernel: (Cout, Cin), bias: (Cout) -> (1, Cout, Np, D)
// out[c'] = sum_c kernel[c', c] * x[c] + bias[c'] at every site.
Var conv1x1(const Var& x, const Var& kernel, const Var& bias);

// Applies all CE layers to a batch-as-channels tensor (1, B, Np, D).
Var conv_embedding(const Var& x, ConvEmbeddingParams& params);

// Full BA transform of an image batch (B, C, H, W); B must equal params.batch().
Var ba_forward(const Var& images, ConvEmbeddingParams& params, std::size_t patch);

// Graph-free convenience wrapper.
Tensor ba_forward(const Tensor& images, ConvEmbeddingParams& params, std::size_t patch);

}  // namespace bassl
