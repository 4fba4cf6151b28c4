#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bassl/data.hpp"
#include "bassl/model.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

struct ProbeResult {
    double top1 = 0.0;                // on the held-out split
    std::vector<double> per_class;    // held-out accuracy per class (0 if absent)
    std::size_t steps = 0;
    double final_loss = 0.0;          // train-split cross-entropy after the last step
};

struct ProbeOptions {
    std::uint64_t split_seed = 0;
    std::size_t steps = 500;
    double learning_rate = 0.1;
    double train_fraction = 0.8;
    // z-score each feature column with train-split statistics before fitting.
    bool standardize = true;
};

// Encodes every image with frozen parameters; (M, feature_dim). The
// batch-adaptive module is not involved at evaluation time.
Tensor extract_features(const LabeledImageSet& set, Encoder& encoder, std::size_t chunk = 64);

// Multinomial logistic regression by full-batch gradient descent on a seeded
// train/held-out split; reports top-1 on the held-out part.
ProbeResult linear_probe(const Tensor& features, std::span<const std::size_t> labels,
                         std::size_t classes, const ProbeOptions& options = {});

// Fraction of rows whose argmax (lowest index on ties) equals the label.
double top1(const Tensor& scores, std::span<const std::size_t> labels);

}  // namespace bassl
