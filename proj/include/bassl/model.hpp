#pragma once

// Desk-scale query/key tracks.
//
// Encoder: fixed standardisation (x - mean) / std, then stages of
// (3x3 conv, padding 1) -> ReLU -> 2x2 average pool, then global average pool.
// Projector / predictor: Linear -> ReLU -> Linear.
// No normalisation layers: the forward pass is a pure function of
// (parameters, input) and each instance is encoded independently.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bassl/autodiff.hpp"
#include "bassl/rng.hpp"

namespace bassl {

// How a forward pass sees the parameters: as differentiable leaves, or as
// constants that never enter the gradient map.
enum class Binding { trainable, frozen };

Var bind(Graph& g, Parameter& p, Binding binding);

// x: (B, Cin, H, W), weight: (Cout, Cin, k, k), bias: (Cout). Stride 1,
// zero padding k/2 (k odd), so spatial size is preserved.
Var conv2d(const Var& x, const Var& weight, const Var& bias);
// (B, C, H, W) -> (B, C, H/2, W/2); H and W must be even.
Var avg_pool2x2(const Var& x);
// (B, C, H, W) -> (B, C)
Var global_avg_pool(const Var& x);

struct EncoderConfig {
    std::size_t in_channels = 3;
    std::vector<std::size_t> widths{16, 32, 64};
    std::size_t image_size = 32;
    double input_mean = 0.5;
    double input_std = 0.25;
};

struct ModelConfig {
    EncoderConfig encoder;
    std::size_t projector_hidden = 128;
    std::size_t projector_out = 64;
    bool with_predictor = false;
    // Hidden width of the predictor; defaults to projector_out when 0.
    std::size_t predictor_hidden = 0;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& config, Rng& rng, const std::string& prefix);

    const EncoderConfig& config() const noexcept { return config_; }
    std::size_t feature_dim() const { return config_.widths.back(); }

    Var forward(const Var& images, Binding binding);
    std::vector<Parameter*> parameters();

private:
    struct Stage {
        Parameter weight;
        Parameter bias;
    };
    EncoderConfig config_;
    std::vector<Stage> stages_;
};

class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, const std::string& prefix);

    std::size_t in_dim() const { return w1_.value.dim(0); }
    std::size_t out_dim() const { return w2_.value.dim(1); }

    Var forward(const Var& x, Binding binding);
    std::vector<Parameter*> parameters();

private:
    // Weights are stored (in, out) so that y = x W + b needs no transpose.
    Parameter w1_, b1_, w2_, b2_;
};

/// One side of the dual-track framework: encoder + projector (+ predictor).
class Track {
public:
    Track() = default;
    Track(const ModelConfig& config, Rng& rng, const std::string& prefix);

    // A copy with the same values under a new name prefix, dropping the
    // predictor (key tracks never carry one).
    Track key_copy(const std::string& prefix) const;

    const std::string& prefix() const noexcept { return prefix_; }
    bool has_predictor() const noexcept { return predictor_.has_value(); }

    Encoder& encoder() noexcept { return encoder_; }
    Var features(const Var& images, Binding binding) { return encoder_.forward(images, binding); }
    // encode + project
    Var embed(const Var& images, Binding binding);
    Var predict(const Var& embedding, Binding binding);

    std::vector<Parameter*> parameters();
    std::vector<Parameter*> backbone_parameters();  // encoder + projector

private:
    std::string prefix_;
    Encoder encoder_;
    Mlp projector_;
    std::optional<Mlp> predictor_;
};

/// k <- m k + (1 - m) q for every encoder/projector tensor of the key track.
/// Parameters are paired positionally; shapes must agree.
void momentum_update(Track& key, Track& query, double m);

}  // namespace bassl
