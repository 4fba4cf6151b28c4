#include "bassl/augment.hpp"

#include "bassl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bassl {

namespace {

struct CropBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double w = 0.0;
    double h = 0.0;
};

constexpr int kCropAttempts = 10;

CropBox draw_crop(const AugmentationSpec& spec, double height, double width, Rng& rng) {
    CropBox box{0.0, 0.0, width, height};
    bool found = false;
    const double area = height * width;
    const double log_lo = std::log(3.0 / 4.0);
    const double log_hi = std::log(4.0 / 3.0);
    for (int attempt = 0; attempt < kCropAttempts; ++attempt) {
        const double scale = rng.uniform(spec.crop_scale_min, spec.crop_scale_max);
        const double ratio = std::exp(rng.uniform(log_lo, log_hi));
        const double u = rng.uniform();
        const double v = rng.uniform();
        if (found || spec.crop_scale_min >= 1.0) {
            continue;
        }
        const double cw = std::sqrt(scale * area * ratio);
        const double ch = std::sqrt(scale * area / ratio);
        if (cw <= width && ch <= height) {
            box = CropBox{u * (width - cw), v * (height - ch), cw, ch};
            found = true;
        }
    }
    return box;
}

}  // namespace

Tensor augment(const Tensor& images, const AugmentationSpec& spec, Rng& rng) {
    const Shape& s = images.shape();
    if (s.size() != 4) {
        throw DimensionError("augment expects (B, C, H, W), got " + shape_string(s));
    }
    if (spec.crop_scale_min <= 0.0 || spec.crop_scale_min > spec.crop_scale_max ||
        spec.crop_scale_max > 1.0) {
        throw ConfigError("crop scale range must satisfy 0 < min <= max <= 1");
    }
    const std::size_t batch = s[0];
    const std::size_t channels = s[1];
    const std::size_t h = s[2];
    const std::size_t w = s[3];
    Tensor out(s);
    std::vector<double> plane(h * w);
    for (std::size_t b = 0; b < batch; ++b) {
        const CropBox box = draw_crop(spec, static_cast<double>(h), static_cast<double>(w), rng);
        const bool flip = rng.uniform() < spec.flip_prob;
        const bool gray = rng.uniform() < spec.grayscale_prob;

        for (std::size_t c = 0; c < channels; ++c) {
            const double* src = images.data() + (b * channels + c) * h * w;
            double* dst = out.data() + (b * channels + c) * h * w;
            // Bilinear resample of the crop box, sampling at pixel centres.
            for (std::size_t y = 0; y < h; ++y) {
                double sy = box.y0 + (static_cast<double>(y) + 0.5) * box.h / static_cast<double>(h) - 0.5;
                sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
                const auto y0 = static_cast<std::size_t>(std::floor(sy));
                const std::size_t y1 = std::min(y0 + 1, h - 1);
                const double fy = sy - static_cast<double>(y0);
                for (std::size_t x = 0; x < w; ++x) {
                    double sx = box.x0 + (static_cast<double>(x) + 0.5) * box.w / static_cast<double>(w) - 0.5;
                    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
                    const auto x0 = static_cast<std::size_t>(std::floor(sx));
                    const std::size_t x1 = std::min(x0 + 1, w - 1);
                    const double fx = sx - static_cast<double>(x0);
                    double v = src[y0 * w + x0];
                    if (fx != 0.0 || fy != 0.0) {
                        v = (1.0 - fy) * ((1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                            fy * ((1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
                    }
                    plane[y * w + (flip ? w - 1 - x : x)] = std::clamp(v, 0.0, 1.0);
                }
            }
            std::copy(plane.begin(), plane.end(), dst);
        }

        if (gray) {
            double* base = out.data() + b * channels * h * w;
            for (std::size_t i = 0; i < h * w; ++i) {
                double g = 0.0;
                if (channels == 3) {
                    g = 0.299 * base[i] + 0.587 * base[h * w + i] + 0.114 * base[2 * h * w + i];
                } else {
                    for (std::size_t c = 0; c < channels; ++c) {
                        g += base[c * h * w + i];
                    }
                    g /= static_cast<double>(channels);
                }
                g = std::clamp(g, 0.0, 1.0);
                for (std::size_t c = 0; c < channels; ++c) {
                    base[c * h * w + i] = g;
                }
            }
        }
    }
    return out;
}

}  // namespace bassl
