#pragma once

// Patch partition and patch restore: a bijection between image batches
// (B, C, H, W) and token tensors (B, Np, D) with Np = (H/p)(W/p), D = p*p*C.
//
// Token n runs row-major over the (H/p) x (W/p) patch grid. Inside a token the
// flattening order is channel-major, then patch row, then patch column:
//   d = c*p*p + i*p + j.

#include <cstddef>
#include <memory>
#include <vector>

#include "bassl/autodiff.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

struct PatchGeometry {
    std::size_t patch = 1;
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t grid_rows() const noexcept { return height / patch; }
    std::size_t grid_cols() const noexcept { return width / patch; }
    std::size_t tokens() const noexcept { return grid_rows() * grid_cols(); }
    std::size_t token_dim() const noexcept { return patch * patch * channels; }

    friend bool operator==(const PatchGeometry&, const PatchGeometry&) = default;
};

// Validates a (B, C, H, W) shape against patch size p.
PatchGeometry make_patch_geometry(const Shape& image_shape, std::size_t patch);

struct PatchTensor {
    Tensor data;  // (B, Np, D)
    PatchGeometry geometry;
};

PatchTensor patchify(const Tensor& images, std::size_t patch);
Tensor unpatchify(const PatchTensor& tokens);

// Differentiable forms used inside the batch-adaptive module.
Var patchify(const Var& images, std::size_t patch);
Var unpatchify(const Var& tokens, const PatchGeometry& geometry);

// For output element k of patchify (flat over (B, Np, D)), the flat source
// index into (B, C, H, W).
std::shared_ptr<const std::vector<std::size_t>> patchify_index(std::size_t batch,
                                                               const PatchGeometry& g);

}  // namespace bassl
