#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bassl/tensor.hpp"

namespace bassl {

struct LabeledImageSet {
    Tensor images;  // (M, C, H, W), values in [0, 1]
    std::vector<std::size_t> labels;
    std::size_t classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    // Stacks the selected images into (indices.size(), C, H, W).
    Tensor gather(std::span<const std::size_t> indices) const;
};

// Two texture classes: 0 = horizontal stripes, 1 = checkerboard. Every image
// draws its own phase, amplitude, brightness and per-channel gain, then gets
// N(0, 0.05^2) pixel noise and is clamped to [0, 1]. Images are ordered
// class 0 first; labels are balanced.
LabeledImageSet make_synthetic(std::size_t per_class, std::uint64_t seed, std::size_t size = 32);

// CIFAR-10 binary layout: records of 1 label byte + 3072 pixel bytes
// (1024 R, 1024 G, 1024 B, each row-major 32x32). Pixels map to byte / 255.
inline constexpr std::size_t kCifarRecordBytes = 3073;
LabeledImageSet parse_cifar10_binary(std::span<const std::uint8_t> bytes);
LabeledImageSet read_cifar10_binary(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_cifar10_binary(const LabeledImageSet& set);

/// Shuffled fixed-size batches with the last partial batch dropped. The order
/// for each epoch is a pure function of (seed, epoch), so any step's batch can
/// be recomputed without replaying earlier ones.
class BatchIterator {
public:
    BatchIterator(const LabeledImageSet& set, std::size_t batch, std::uint64_t seed);

    std::size_t batch_size() const noexcept { return batch_; }
    std::size_t batches_per_epoch() const noexcept { return set_->size() / batch_; }

    std::vector<std::size_t> epoch_order(std::size_t epoch) const;
    // Indices of the global step-th batch (step counts across epochs).
    std::vector<std::size_t> indices_at(std::size_t step) const;
    Tensor batch_at(std::size_t step) const;

    // Sequential access: returns batch_at(0), batch_at(1), ...
    Tensor next();
    std::size_t position() const noexcept { return position_; }

private:
    const LabeledImageSet* set_;
    std::size_t batch_;
    std::uint64_t seed_;
    std::size_t position_ = 0;
};

BatchIterator iterate(const LabeledImageSet& set, std::size_t batch, std::uint64_t seed);

}  // namespace bassl
