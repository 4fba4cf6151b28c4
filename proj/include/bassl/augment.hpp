#pragma once

#include "bassl/rng.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

struct AugmentationSpec {
    // Random resized crop: fraction of the image area kept, before resizing
    // back to the input size. Aspect ratio is drawn log-uniformly in [3/4, 4/3].
    double crop_scale_min = 0.2;
    double crop_scale_max = 1.0;
    double flip_prob = 0.5;
    double grayscale_prob = 0.2;
};

// Applies an independent random crop / horizontal flip / grayscale to every
// image of a (B, C, H, W) batch in [0, 1]. Every image consumes the same
// number of draws from `rng` regardless of which transforms fire.
Tensor augment(const Tensor& images, const AugmentationSpec& spec, Rng& rng);

}  // namespace bassl
