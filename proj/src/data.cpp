#include "bassl/data.hpp"

#include "bassl/errors.hpp"
#include "bassl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace bassl {

Tensor LabeledImageSet::gather(std::span<const std::size_t> indices) const {
    const Shape& s = images.shape();
    const std::size_t per = s[1] * s[2] * s[3];
    Tensor out({indices.size(), s[1], s[2], s[3]});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= size()) {
            throw IndexError("image index " + std::to_string(indices[i]) + " out of range for set of " +
                             std::to_string(size()));
        }
        std::copy_n(images.data() + indices[i] * per, per, out.data() + i * per);
    }
    return out;
}

LabeledImageSet make_synthetic(std::size_t per_class, std::uint64_t seed, std::size_t size) {
    if (per_class == 0) {
        throw ConfigError("synthetic dataset needs at least one image per class");
    }
    constexpr std::size_t kChannels = 3;
    constexpr double kPeriod = 8.0;
    constexpr double kNoise = 0.05;
    const double two_pi = 2.0 * std::numbers::pi;

    LabeledImageSet set;
    set.classes = 2;
    set.images = Tensor({2 * per_class, kChannels, size, size});
    Rng rng(seed);
    for (std::size_t n = 0; n < 2 * per_class; ++n) {
        const std::size_t label = n < per_class ? 0 : 1;
        set.labels.push_back(label);
        // Phases stay within a quarter period so the class means differ.
        const double phase_y = rng.uniform(0.0, 0.5 * std::numbers::pi);
        const double phase_x = rng.uniform(0.0, 0.5 * std::numbers::pi);
        const double amplitude = rng.uniform(0.25, 0.45);
        const double base = rng.uniform(0.4, 0.6);
        double gain[kChannels];
        for (double& g : gain) {
            g = rng.uniform(0.8, 1.2);
        }
        for (std::size_t c = 0; c < kChannels; ++c) {
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double sy = std::sin(two_pi * static_cast<double>(y) / kPeriod + phase_y);
                    const double sx = std::sin(two_pi * static_cast<double>(x) / kPeriod + phase_x);
                    const double pattern = label == 0 ? sy : sy * sx;
                    double v = base + gain[c] * amplitude * pattern + rng.gaussian(0.0, kNoise);
                    v = std::clamp(v, 0.0, 1.0);
                    set.images.at({n, c, y, x}) = v;
                }
            }
        }
    }
    return set;
}

LabeledImageSet parse_cifar10_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw FormatError("CIFAR-10 file is empty");
    }
    if (bytes.size() % kCifarRecordBytes != 0) {
        const std::size_t offset = bytes.size() - bytes.size() % kCifarRecordBytes;
        throw FormatError("CIFAR-10 file length " + std::to_string(bytes.size()) +
                          " is not a multiple of 3073; truncated record at byte offset " +
                          std::to_string(offset));
    }
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    LabeledImageSet set;
    set.classes = 10;
    set.images = Tensor({records, 3, 32, 32});
    set.labels.resize(records);
    for (std::size_t r = 0; r < records; ++r) {
        const std::size_t offset = r * kCifarRecordBytes;
        const std::uint8_t label = bytes[offset];
        if (label > 9) {
            throw FormatError("CIFAR-10 label " + std::to_string(label) + " > 9 at byte offset " +
                              std::to_string(offset));
        }
        set.labels[r] = label;
        double* dst = set.images.data() + r * 3072;
        for (std::size_t i = 0; i < 3072; ++i) {
            dst[i] = static_cast<double>(bytes[offset + 1 + i]) / 255.0;
        }
    }
    return set;
}

LabeledImageSet read_cifar10_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open CIFAR-10 file " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_cifar10_binary(bytes);
}

std::vector<std::uint8_t> encode_cifar10_binary(const LabeledImageSet& set) {
    const Shape& s = set.images.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] != 32 || s[3] != 32) {
        throw DimensionError("CIFAR-10 layout needs (M, 3, 32, 32) images, got " + shape_string(s));
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(set.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < set.size(); ++r) {
        if (set.labels[r] > 9) {
            throw FormatError("label " + std::to_string(set.labels[r]) + " does not fit CIFAR-10");
        }
        bytes.push_back(static_cast<std::uint8_t>(set.labels[r]));
        const double* src = set.images.data() + r * 3072;
        for (std::size_t i = 0; i < 3072; ++i) {
            const double v = std::clamp(src[i], 0.0, 1.0);
            bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
    }
    return bytes;
}

BatchIterator::BatchIterator(const LabeledImageSet& set, std::size_t batch, std::uint64_t seed)
    : set_(&set), batch_(batch), seed_(seed) {
    if (batch == 0 || batch > set.size()) {
        throw ConfigError("batch size " + std::to_string(batch) + " must lie in [1, " +
                          std::to_string(set.size()) + "]");
    }
}

std::vector<std::size_t> BatchIterator::epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(set_->size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed_, {0x5348554646ULL, epoch}));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    return order;
}

std::vector<std::size_t> BatchIterator::indices_at(std::size_t step) const {
    const std::size_t epoch = step / batches_per_epoch();
    const std::size_t slot = step % batches_per_epoch();
    const auto order = epoch_order(epoch);
    return {order.begin() + static_cast<std::ptrdiff_t>(slot * batch_),
            order.begin() + static_cast<std::ptrdiff_t>((slot + 1) * batch_)};
}

Tensor BatchIterator::batch_at(std::size_t step) const {
    const auto idx = indices_at(step);
    return set_->gather(idx);
}

Tensor BatchIterator::next() {
    return batch_at(position_++);
}

BatchIterator iterate(const LabeledImageSet& set, std::size_t batch, std::uint64_t seed) {
    return BatchIterator(set, batch, seed);
}

}  // namespace bassl
