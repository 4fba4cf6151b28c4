#include "bassl/patching.hpp"

#include "bassl/errors.hpp"

namespace bassl {

PatchGeometry make_patch_geometry(const Shape& image_shape, std::size_t patch) {
    if (image_shape.size() != 4) {
        throw DimensionError("patchify expects (B, C, H, W), got " + shape_string(image_shape));
    }
    element_count(image_shape);
    const std::size_t h = image_shape[2];
    const std::size_t w = image_shape[3];
    if (patch == 0 || h % patch != 0 || w % patch != 0) {
        throw DimensionError("patch size " + std::to_string(patch) + " does not divide H=" +
                             std::to_string(h) + ", W=" + std::to_string(w));
    }
    return PatchGeometry{patch, image_shape[1], h, w};
}

std::shared_ptr<const std::vector<std::size_t>> patchify_index(std::size_t batch,
                                                               const PatchGeometry& g) {
    const std::size_t p = g.patch;
    const std::size_t per_image = g.channels * g.height * g.width;
    auto index = std::make_shared<std::vector<std::size_t>>();
    index->reserve(batch * per_image);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t gr = 0; gr < g.grid_rows(); ++gr) {
            for (std::size_t gc = 0; gc < g.grid_cols(); ++gc) {
                for (std::size_t c = 0; c < g.channels; ++c) {
                    for (std::size_t i = 0; i < p; ++i) {
                        for (std::size_t j = 0; j < p; ++j) {
                            const std::size_t y = gr * p + i;
                            const std::size_t x = gc * p + j;
                            index->push_back(b * per_image + (c * g.height + y) * g.width + x);
                        }
                    }
                }
            }
        }
    }
    return index;
}

namespace {

std::shared_ptr<const std::vector<std::size_t>> invert(const std::vector<std::size_t>& forward) {
    auto inverse = std::make_shared<std::vector<std::size_t>>(forward.size());
    for (std::size_t k = 0; k < forward.size(); ++k) {
        (*inverse)[forward[k]] = k;
    }
    return inverse;
}

void check_token_shape(const Shape& shape, const PatchGeometry& g) {
    if (shape.size() != 3 || shape[1] != g.tokens() || shape[2] != g.token_dim() ||
        g.patch == 0 || g.height % g.patch != 0 || g.width % g.patch != 0) {
        throw DimensionError("token tensor " + shape_string(shape) +
                             " inconsistent with patch geometry p=" + std::to_string(g.patch) +
                             " C=" + std::to_string(g.channels) + " H=" + std::to_string(g.height) +
                             " W=" + std::to_string(g.width));
    }
}

}  // namespace

PatchTensor patchify(const Tensor& images, std::size_t patch) {
    const PatchGeometry g = make_patch_geometry(images.shape(), patch);
    const std::size_t batch = images.shape()[0];
    const auto index = patchify_index(batch, g);
    Tensor out({batch, g.tokens(), g.token_dim()});
    for (std::size_t k = 0; k < index->size(); ++k) {
        out[k] = images[(*index)[k]];
    }
    return PatchTensor{std::move(out), g};
}

Tensor unpatchify(const PatchTensor& tokens) {
    const PatchGeometry& g = tokens.geometry;
    check_token_shape(tokens.data.shape(), g);
    const std::size_t batch = tokens.data.shape()[0];
    const auto index = patchify_index(batch, g);
    Tensor out({batch, g.channels, g.height, g.width});
    for (std::size_t k = 0; k < index->size(); ++k) {
        out[(*index)[k]] = tokens.data[k];
    }
    return out;
}

Var patchify(const Var& images, std::size_t patch) {
    const PatchGeometry g = make_patch_geometry(images.shape(), patch);
    const std::size_t batch = images.shape()[0];
    return gather(images, {batch, g.tokens(), g.token_dim()}, patchify_index(batch, g));
}

Var unpatchify(const Var& tokens, const PatchGeometry& g) {
    check_token_shape(tokens.shape(), g);
    const std::size_t batch = tokens.shape()[0];
    const auto forward = patchify_index(batch, g);
    return gather(tokens, {batch, g.channels, g.height, g.width}, invert(*forward));
}

}  // namespace bassl
