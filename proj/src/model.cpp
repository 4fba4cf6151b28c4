#include "bassl/model.hpp"

#include "bassl/errors.hpp"

#include <cmath>

namespace bassl {

Var bind(Graph& g, Parameter& p, Binding binding) {
    return binding == Binding::trainable ? g.parameter(p) : g.constant(p.value);
}

// ---- ops -------------------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 4 || ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3] || ws[2] % 2 == 0 ||
        bias.shape().size() != 1 || bias.shape()[0] != ws[0]) {
        throw DimensionError("conv2d: input " + shape_string(xs) + ", weight " + shape_string(ws) +
                             ", bias " + shape_string(bias.shape()) + " are incompatible");
    }
    const std::size_t batch = xs[0];
    const std::size_t cin = xs[1];
    const std::size_t h = xs[2];
    const std::size_t w = xs[3];
    const std::size_t cout = ws[0];
    const std::size_t k = ws[2];
    const std::size_t pad = k / 2;
    const std::size_t hw = h * w;
    const std::size_t rows = cin * k * k;

    // im2col per image: cols[b] is (cin*k*k, h*w).
    auto cols = std::make_shared<std::vector<double>>(batch * rows * hw, 0.0);
    const double* X = x.value().data();
    for (std::size_t b = 0; b < batch; ++b) {
        double* col = cols->data() + b * rows * hw;
        for (std::size_t c = 0; c < cin; ++c) {
            const double* plane = X + (b * cin + c) * hw;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    double* dst = col + ((c * k + ky) * k + kx) * hw;
                    for (std::size_t y = 0; y < h; ++y) {
                        const long sy = static_cast<long>(y + ky) - static_cast<long>(pad);
                        if (sy < 0 || sy >= static_cast<long>(h)) {
                            continue;
                        }
                        for (std::size_t xx = 0; xx < w; ++xx) {
                            const long sx = static_cast<long>(xx + kx) - static_cast<long>(pad);
                            if (sx >= 0 && sx < static_cast<long>(w)) {
                                dst[y * w + xx] = plane[sy * w + sx];
                            }
                        }
                    }
                }
            }
        }
    }

    const double* Wt = weight.value().data();
    Tensor out({batch, cout, h, w});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* col = cols->data() + b * rows * hw;
        for (std::size_t o = 0; o < cout; ++o) {
            double* orow = out.data() + (b * cout + o) * hw;
            const double bo = bias.value()[o];
            for (std::size_t s = 0; s < hw; ++s) {
                orow[s] = bo;
            }
            for (std::size_t r = 0; r < rows; ++r) {
                const double wv = Wt[o * rows + r];
                const double* crow = col + r * hw;
                for (std::size_t s = 0; s < hw; ++s) {
                    orow[s] += wv * crow[s];
                }
            }
        }
    }

    const Tensor* wv = &weight.value();
    return x.graph().record(
        "conv2d", std::move(out), {x, weight, bias},
        [cols, wv, batch, cin, cout, h, w, k, pad, hw, rows](const Tensor& g,
                                                             std::span<Tensor* const> t) {
            std::vector<double> dcol(rows * hw);
            const double* Wt = wv->data();
            for (std::size_t b = 0; b < batch; ++b) {
                const double* G = g.data() + b * cout * hw;
                const double* col = cols->data() + b * rows * hw;
                if (t[2]) {
                    for (std::size_t o = 0; o < cout; ++o) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < hw; ++i) {
                            s += G[o * hw + i];
                        }
                        (*t[2])[o] += s;
                    }
                }
                if (t[1]) {
                    double* dW = t[1]->data();
                    for (std::size_t o = 0; o < cout; ++o) {
                        const double* grow = G + o * hw;
                        for (std::size_t r = 0; r < rows; ++r) {
                            const double* crow = col + r * hw;
                            double s = 0.0;
                            for (std::size_t i = 0; i < hw; ++i) {
                                s += grow[i] * crow[i];
                            }
                            dW[o * rows + r] += s;
                        }
                    }
                }
                if (t[0]) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    for (std::size_t o = 0; o < cout; ++o) {
                        const double* grow = G + o * hw;
                        for (std::size_t r = 0; r < rows; ++r) {
                            const double wval = Wt[o * rows + r];
                            double* drow = dcol.data() + r * hw;
                            for (std::size_t i = 0; i < hw; ++i) {
                                drow[i] += wval * grow[i];
                            }
                        }
                    }
                    // col2im
                    double* dX = t[0]->data();
                    for (std::size_t c = 0; c < cin; ++c) {
                        double* plane = dX + (b * cin + c) * hw;
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const double* src = dcol.data() + ((c * k + ky) * k + kx) * hw;
                                for (std::size_t y = 0; y < h; ++y) {
                                    const long sy = static_cast<long>(y + ky) - static_cast<long>(pad);
                                    if (sy < 0 || sy >= static_cast<long>(h)) {
                                        continue;
                                    }
                                    for (std::size_t xx = 0; xx < w; ++xx) {
                                        const long sx =
                                            static_cast<long>(xx + kx) - static_cast<long>(pad);
                                        if (sx >= 0 && sx < static_cast<long>(w)) {
                                            plane[sy * w + sx] += src[y * w + xx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
}

Var avg_pool2x2(const Var& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0) {
        throw DimensionError("avg_pool2x2 needs (B, C, even H, even W), got " + shape_string(xs));
    }
    const std::size_t planes = xs[0] * xs[1];
    const std::size_t h = xs[2];
    const std::size_t w = xs[3];
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    Tensor out({xs[0], xs[1], oh, ow});
    const double* X = x.value().data();
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) {
                const double* base = X + p * h * w + 2 * y * w + 2 * xx;
                out[(p * oh + y) * ow + xx] = 0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
            }
        }
    }
    return x.graph().record("avg_pool2x2", std::move(out), {x},
                            [planes, h, w, oh, ow](const Tensor& g, std::span<Tensor* const> t) {
                                double* dX = t[0]->data();
                                for (std::size_t p = 0; p < planes; ++p) {
                                    for (std::size_t y = 0; y < oh; ++y) {
                                        for (std::size_t xx = 0; xx < ow; ++xx) {
                                            const double v = 0.25 * g[(p * oh + y) * ow + xx];
                                            double* base = dX + p * h * w + 2 * y * w + 2 * xx;
                                            base[0] += v;
                                            base[1] += v;
                                            base[w] += v;
                                            base[w + 1] += v;
                                        }
                                    }
                                }
                            });
}

Var global_avg_pool(const Var& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) {
        throw DimensionError("global_avg_pool needs (B, C, H, W), got " + shape_string(xs));
    }
    const std::size_t planes = xs[0] * xs[1];
    const std::size_t hw = xs[2] * xs[3];
    Tensor out({xs[0], xs[1]});
    const double* X = x.value().data();
    for (std::size_t p = 0; p < planes; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            s += X[p * hw + i];
        }
        out[p] = s / static_cast<double>(hw);
    }
    return x.graph().record("global_avg_pool", std::move(out), {x},
                            [planes, hw](const Tensor& g, std::span<Tensor* const> t) {
                                const double inv = 1.0 / static_cast<double>(hw);
                                for (std::size_t p = 0; p < planes; ++p) {
                                    for (std::size_t i = 0; i < hw; ++i) {
                                        (*t[0])[p * hw + i] += g[p] * inv;
                                    }
                                }
                            });
}

// ---- encoder ---------------------------------------------------------------

namespace {

Tensor he_normal(Rng& rng, Shape shape, std::size_t fan_in) {
    return rng.gaussian_tensor(std::move(shape), 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace

Encoder::Encoder(const EncoderConfig& config, Rng& rng, const std::string& prefix) : config_(config) {
    if (config.widths.empty()) {
        throw ConfigError("encoder needs at least one stage");
    }
    if (config.image_size % (std::size_t{1} << config.widths.size()) != 0) {
        throw ConfigError("image size " + std::to_string(config.image_size) +
                          " is not divisible by 2^" + std::to_string(config.widths.size()));
    }
    std::size_t cin = config.in_channels;
    for (std::size_t s = 0; s < config.widths.size(); ++s) {
        const std::size_t cout = config.widths[s];
        const std::string base = prefix + ".stage" + std::to_string(s);
        stages_.push_back(Stage{{base + ".weight", he_normal(rng, {cout, cin, 3, 3}, cin * 9)},
                                {base + ".bias", Tensor({cout})}});
        cin = cout;
    }
}

Var Encoder::forward(const Var& images, Binding binding) {
    const Shape& s = images.shape();
    if (s.size() != 4 || s[1] != config_.in_channels || s[2] != config_.image_size ||
        s[3] != config_.image_size) {
        throw DimensionError("encoder expects (B, " + std::to_string(config_.in_channels) + ", " +
                             std::to_string(config_.image_size) + ", " +
                             std::to_string(config_.image_size) + "), got " + shape_string(s));
    }
    Graph& g = images.graph();
    Var h = affine(images, 1.0 / config_.input_std, -config_.input_mean / config_.input_std);
    for (auto& stage : stages_) {
        h = conv2d(h, bind(g, stage.weight, binding), bind(g, stage.bias, binding));
        h = avg_pool2x2(relu(h));
    }
    return global_avg_pool(h);
}

std::vector<Parameter*> Encoder::parameters() {
    std::vector<Parameter*> out;
    for (auto& s : stages_) {
        out.push_back(&s.weight);
        out.push_back(&s.bias);
    }
    return out;
}

// ---- MLP -------------------------------------------------------------------

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, const std::string& prefix)
    : w1_{prefix + ".fc1.weight", he_normal(rng, {in, hidden}, in)},
      b1_{prefix + ".fc1.bias", Tensor({hidden})},
      w2_{prefix + ".fc2.weight", he_normal(rng, {hidden, out}, hidden)},
      b2_{prefix + ".fc2.bias", Tensor({out})} {}

Var Mlp::forward(const Var& x, Binding binding) {
    Graph& g = x.graph();
    Var h = relu(add_row_bias(matmul(x, bind(g, w1_, binding)), bind(g, b1_, binding)));
    return add_row_bias(matmul(h, bind(g, w2_, binding)), bind(g, b2_, binding));
}

std::vector<Parameter*> Mlp::parameters() {
    return {&w1_, &b1_, &w2_, &b2_};
}

// ---- tracks ----------------------------------------------------------------

Track::Track(const ModelConfig& config, Rng& rng, const std::string& prefix)
    : prefix_(prefix),
      encoder_(config.encoder, rng, prefix + ".encoder"),
      projector_(config.encoder.widths.back(), config.projector_hidden, config.projector_out, rng,
                 prefix + ".projector") {
    if (config.with_predictor) {
        const std::size_t hidden =
            config.predictor_hidden == 0 ? config.projector_out : config.predictor_hidden;
        predictor_.emplace(config.projector_out, hidden, config.projector_out, rng,
                           prefix + ".predictor");
    }
}

Track Track::key_copy(const std::string& prefix) const {
    Track copy = *this;
    copy.predictor_.reset();
    for (Parameter* p : copy.parameters()) {
        p->name = prefix + p->name.substr(prefix_.size());
    }
    copy.prefix_ = prefix;
    return copy;
}

Var Track::embed(const Var& images, Binding binding) {
    return projector_.forward(encoder_.forward(images, binding), binding);
}

Var Track::predict(const Var& embedding, Binding binding) {
    if (!predictor_) {
        throw StateError("track '" + prefix_ + "' has no predictor");
    }
    return predictor_->forward(embedding, binding);
}

std::vector<Parameter*> Track::backbone_parameters() {
    auto out = encoder_.parameters();
    auto proj = projector_.parameters();
    out.insert(out.end(), proj.begin(), proj.end());
    return out;
}

std::vector<Parameter*> Track::parameters() {
    auto out = backbone_parameters();
    if (predictor_) {
        auto pred = predictor_->parameters();
        out.insert(out.end(), pred.begin(), pred.end());
    }
    return out;
}

void momentum_update(Track& key, Track& query, double m) {
    if (!(m >= 0.0 && m <= 1.0)) {
        throw ParameterError("momentum must lie in [0, 1], got " + std::to_string(m));
    }
    auto ks = key.backbone_parameters();
    auto qs = query.backbone_parameters();
    if (ks.size() != qs.size()) {
        throw DimensionError("momentum update: key has " + std::to_string(ks.size()) +
                             " tensors, query has " + std::to_string(qs.size()));
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
        Tensor& k = ks[i]->value;
        const Tensor& q = qs[i]->value;
        if (k.shape() != q.shape()) {
            throw DimensionError("momentum update: " + ks[i]->name + " " + shape_string(k.shape()) +
                                 " vs " + qs[i]->name + " " + shape_string(q.shape()));
        }
        for (std::size_t j = 0; j < k.size(); ++j) {
            k[j] = m * k[j] + (1.0 - m) * q[j];
        }
    }
}

}  // namespace bassl
