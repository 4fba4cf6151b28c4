#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bassl/errors.hpp"
#include "bassl/model.hpp"
#include "bassl/rng.hpp"
#include "test_util.hpp"

using namespace bassl;
using bassl::testing::expect_tensor_near;
using bassl::testing::kGradTolerance;

namespace {

ModelConfig micro_config() {
    ModelConfig m;
    m.encoder.widths = {2, 2, 2};
    m.encoder.image_size = 8;
    m.projector_hidden = 4;
    m.projector_out = 3;
    return m;
}

void jitter_biases(Track& track, Rng& rng) {
    for (Parameter* p : track.parameters()) {
        if (p->name.ends_with(".bias")) p->value = rng.gaussian_tensor(p->value.shape(), 0.0, 0.1);
    }
}

// Zero-padded 3x3 convolution written as direct loops.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0), k = w.dim(2);
    const long pad = static_cast<long>(k / 2);
    Tensor out({n, cout, h, wd});
    for (std::size_t bi = 0; bi < n; ++bi)
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < wd; ++xx) {
                    double acc = b[co];
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const long sy = static_cast<long>(y + ky) - pad;
                                const long sx = static_cast<long>(xx + kx) - pad;
                                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd))
                                    continue;
                                acc += w.at({co, ci, ky, kx}) *
                                       x.at({bi, ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)});
                            }
                    out.at({bi, co, y, xx}) = acc;
                }
    return out;
}

}  // namespace

TEST(Conv2d, MatchesDirectLoops) {
    Rng rng(1);
    const Tensor x = rng.gaussian_tensor({2, 3, 5, 4}, 0.0, 1.0);
    const Tensor w = rng.gaussian_tensor({2, 3, 3, 3}, 0.0, 1.0);
    const Tensor b = rng.gaussian_tensor({2}, 0.0, 1.0);
    Graph g;
    expect_tensor_near(conv2d(g.constant(x), g.constant(w), g.constant(b)).value(), conv2d_oracle(x, w, b), 1e-13);
}

TEST(Conv2d, ShapeMismatch) {
    Graph g;
    EXPECT_THROW(conv2d(g.constant(Tensor({1, 2, 4, 4})), g.constant(Tensor({2, 3, 3, 3})), g.constant(Tensor({2}))),
                 DimensionError);
}

TEST(Pooling, AverageAndGlobal) {
    Graph g;
    Var x = g.constant(Tensor({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}));
    EXPECT_EQ(avg_pool2x2(x).value(), Tensor({1, 1, 1, 2}, {3.5, 5.5}));
    EXPECT_EQ(global_avg_pool(x).value(), Tensor({1, 1}, {4.5}));
    EXPECT_THROW(avg_pool2x2(g.constant(Tensor({1, 1, 3, 4}))), DimensionError);
}

TEST(ModelOps, GradientsMatchFiniteDifferences) {
    Rng rng(2);
    Parameter x{"x", rng.gaussian_tensor({2, 2, 4, 4}, 0.0, 1.0)};
    Parameter w{"w", rng.gaussian_tensor({3, 2, 3, 3}, 0.0, 1.0)};
    Parameter b{"b", rng.gaussian_tensor({3}, 0.0, 1.0)};
    const Tensor wc = rng.gaussian_tensor({2, 3, 4, 4}, 0.0, 1.0);
    auto conv = [&](Graph& g) {
        return sum(mul(conv2d(g.parameter(x), g.parameter(w), g.parameter(b)), g.constant(wc)));
    };
    for (Parameter* p : {&x, &w, &b}) EXPECT_LE(check_parameter_gradient(conv, *p), kGradTolerance) << p->name;

    const Tensor wp = rng.gaussian_tensor({2, 2, 2, 2}, 0.0, 1.0);
    EXPECT_LE(check_parameter_gradient(
                  [&](Graph& g) { return sum(mul(avg_pool2x2(g.parameter(x)), g.constant(wp))); }, x),
              kGradTolerance);
    const Tensor wg = rng.gaussian_tensor({2, 2}, 0.0, 1.0);
    EXPECT_LE(check_parameter_gradient(
                  [&](Graph& g) { return sum(mul(global_avg_pool(g.parameter(x)), g.constant(wg))); }, x),
              kGradTolerance);
}

TEST(Track, DefaultShapes) {
    Rng rng(3);
    ModelConfig cfg;
    Track q(cfg, rng, "q");
    const Tensor x = rng.uniform_tensor({8, 3, 32, 32}, 0.0, 1.0);
    Graph g;
    EXPECT_EQ(q.features(g.constant(x), Binding::frozen).shape(), (Shape{8, 64}));
    EXPECT_EQ(q.embed(g.constant(x), Binding::frozen).shape(), (Shape{8, 64}));
    EXPECT_THROW(q.embed(g.constant(Tensor({8, 3, 16, 16})), Binding::frozen), DimensionError);
}

TEST(Track, DeterministicForward) {
    Rng rng(4);
    Track q(ModelConfig{}, rng, "q");
    const Tensor x = rng.uniform_tensor({4, 3, 32, 32}, 0.0, 1.0);
    Graph g1, g2;
    EXPECT_EQ(q.embed(g1.constant(x), Binding::trainable).value(), q.embed(g2.constant(x), Binding::trainable).value());
}

TEST(Track, SameSeedSameParameters) {
    Rng a(5), b(5);
    Track ta(micro_config(), a, "q"), tb(micro_config(), b, "q");
    auto pa = ta.parameters(), pb = tb.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

TEST(Track, MicroTrunkGradcheck) {
    Rng rng(6);
    ModelConfig cfg = micro_config();
    cfg.with_predictor = true;
    Track q(cfg, rng, "q");
    jitter_biases(q, rng);
    const Tensor x = rng.uniform_tensor({2, 3, 8, 8}, 0.0, 1.0);
    const Tensor w = rng.gaussian_tensor({2, 3}, 0.0, 1.0);
    auto build = [&](Graph& g) {
        return sum(mul(q.predict(q.embed(g.constant(x), Binding::trainable), Binding::trainable), g.constant(w)));
    };
    for (Parameter* p : q.parameters()) EXPECT_LE(check_parameter_gradient(build, *p), kGradTolerance) << p->name;
}

TEST(Track, FrozenBindingHasNoGradients) {
    Rng rng(7);
    Track q(micro_config(), rng, "q");
    Parameter x{"x", rng.uniform_tensor({2, 3, 8, 8}, 0.0, 1.0)};
    Graph g;
    Gradients grads = g.backward(sum(q.embed(g.parameter(x), Binding::frozen)));
    EXPECT_EQ(grads.size(), 1u);
    EXPECT_TRUE(grads.contains(x));
}

TEST(Track, KeyCopyRenamesAndDropsPredictor) {
    Rng rng(8);
    ModelConfig cfg = micro_config();
    cfg.with_predictor = true;
    Track q(cfg, rng, "q");
    Track k = q.key_copy("k");
    EXPECT_FALSE(k.has_predictor());
    auto qb = q.backbone_parameters(), kp = k.parameters();
    ASSERT_EQ(qb.size(), kp.size());
    for (std::size_t i = 0; i < kp.size(); ++i) {
        EXPECT_EQ(kp[i]->value, qb[i]->value);
        EXPECT_EQ(kp[i]->name, "k" + qb[i]->name.substr(1));
    }
}

TEST(MomentumUpdate, FixedPointCopyAndArithmetic) {
    Rng rng(9);
    Track q(micro_config(), rng, "q");
    Track k(micro_config(), rng, "k");
    std::vector<Tensor> before;
    for (Parameter* p : k.parameters()) before.push_back(p->value);
    momentum_update(k, q, 1.0);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(k.parameters()[i]->value, before[i]);
    momentum_update(k, q, 0.0);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(k.parameters()[i]->value, q.parameters()[i]->value);

    for (Parameter* p : k.parameters()) p->value = Tensor(p->value.shape(), 0.0);
    for (Parameter* p : q.parameters()) p->value = Tensor(p->value.shape(), 1.0);
    momentum_update(k, q, 0.99);
    for (Parameter* p : k.parameters())
        for (double v : p->value.values()) EXPECT_NEAR(v, 0.01, 1e-15);
    EXPECT_THROW(momentum_update(k, q, 1.5), ParameterError);
}

TEST(MomentumUpdate, ContractionTowardQuery) {
    Rng rng(10);
    Track q(micro_config(), rng, "q");
    Track k(micro_config(), rng, "k");
    for (double m : {0.0, 0.5, 0.9, 0.99}) {
        std::vector<double> dist;
        for (std::size_t i = 0; i < k.parameters().size(); ++i)
            dist.push_back(l2_norm(k.parameters()[i]->value - q.parameters()[i]->value));
        momentum_update(k, q, m);
        for (std::size_t i = 0; i < dist.size(); ++i) {
            const double after = l2_norm(k.parameters()[i]->value - q.parameters()[i]->value);
            EXPECT_NEAR(after, m * dist[i], 1e-12 * std::max(1.0, dist[i]));
        }
    }
}

TEST(MomentumUpdate, ShapeMismatch) {
    Rng rng(11);
    ModelConfig other = micro_config();
    other.projector_out = 5;
    Track q(micro_config(), rng, "q");
    Track k(other, rng, "k");
    EXPECT_THROW(momentum_update(k, q, 0.5), DimensionError);
}

TEST(StopGradient, DetachedKeysLeaveNoKeyGradients) {
    Rng rng(12);
    Track q(micro_config(), rng, "q");
    Track k = q.key_copy("k");
    const Tensor x = rng.uniform_tensor({2, 3, 8, 8}, 0.0, 1.0);
    Graph g;
    Var qv = q.embed(g.constant(x), Binding::trainable);
    Var kv = stop_gradient(k.embed(g.constant(x), Binding::trainable));
    EXPECT_EQ(kv.value(), qv.value());
    Gradients grads = g.backward(sum(mul(qv, kv)));
    for (Parameter* p : k.parameters()) EXPECT_FALSE(grads.contains(*p)) << p->name;
    for (Parameter* p : q.parameters()) EXPECT_TRUE(grads.contains(*p)) << p->name;
}
