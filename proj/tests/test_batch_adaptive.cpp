#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bassl/batch_adaptive.hpp"
#include "bassl/errors.hpp"
#include "bassl/gradcheck.hpp"
#include "bassl/patching.hpp"
#include "bassl/rng.hpp"
#include "test_util.hpp"

using namespace bassl;
using bassl::testing::expect_tensor_near;
using bassl::testing::kGradTolerance;

namespace {

void randomize_compress(ConvEmbeddingParams& params, Rng& rng, double stddev = 0.5) {
    for (auto& layer : params.layers()) {
        layer.compress_weight.value = rng.gaussian_tensor(layer.compress_weight.value.shape(), 0.0, stddev);
        layer.compress_bias.value = rng.gaussian_tensor(layer.compress_bias.value.shape(), 0.0, 0.1);
        layer.expand_bias.value = rng.gaussian_tensor(layer.expand_bias.value.shape(), 0.0, 0.1);
    }
}

// Per-site evaluation of one CE stack over (1, B, Np, D), written as plain loops.
Tensor conv_embedding_oracle(const Tensor& x, const ConvEmbeddingParams& params) {
    const std::size_t b = x.dim(1), np = x.dim(2), d = x.dim(3);
    Tensor cur = x;
    for (const auto& layer : params.layers()) {
        const Tensor& ke = layer.expand_weight.value;
        const Tensor& be = layer.expand_bias.value;
        const Tensor& kc = layer.compress_weight.value;
        const Tensor& bc = layer.compress_bias.value;
        const std::size_t rb = ke.dim(0);
        Tensor next = cur;
        for (std::size_t n = 0; n < np; ++n)
            for (std::size_t k = 0; k < d; ++k) {
                std::vector<double> hidden(rb);
                for (std::size_t h = 0; h < rb; ++h) {
                    double acc = be[h];
                    for (std::size_t c = 0; c < b; ++c) acc += ke.at({h, c}) * cur.at({0, c, n, k});
                    hidden[h] = std::max(acc, 0.0);
                }
                for (std::size_t c = 0; c < b; ++c) {
                    double acc = bc[c];
                    for (std::size_t h = 0; h < rb; ++h) acc += kc.at({c, h}) * hidden[h];
                    next.at({0, c, n, k}) = cur.at({0, c, n, k}) + acc;
                }
            }
        cur = next;
    }
    return cur;
}

// patchify, CE, unpatchify of the residual branch, fuse with ReLU.
Tensor ba_forward_oracle(const Tensor& images, const ConvEmbeddingParams& params, std::size_t p) {
    const PatchTensor tokens = patchify(images, p);
    const Shape& ts = tokens.data.shape();
    const Tensor t = tokens.data.reshaped({1, ts[0], ts[1], ts[2]});
    const Tensor mixed = conv_embedding_oracle(t, params);
    const Tensor branch = unpatchify(PatchTensor{(mixed - t).reshaped(ts), tokens.geometry});
    Tensor out = images + branch;
    for (double& v : out.values()) v = std::max(v, 0.0);
    return out;
}

}  // namespace

TEST(Conv1x1, IdentityKernel) {
    Rng rng(1);
    const Tensor x = rng.gaussian_tensor({1, 3, 2, 4}, 0.0, 1.0);
    Graph g;
    EXPECT_EQ(conv1x1(g.constant(x), g.constant(Tensor::identity(3)), g.constant(Tensor({3}))).value(), x);
}

TEST(Conv1x1, PermutationKernelSwapsChannels) {
    const Tensor x({1, 2, 1, 2}, {1, 2, 3, 4});
    Graph g;
    const Tensor out =
        conv1x1(g.constant(x), g.constant(Tensor({2, 2}, {0, 1, 1, 0})), g.constant(Tensor({2}))).value();
    EXPECT_EQ(out, Tensor({1, 2, 1, 2}, {3, 4, 1, 2}));
}

TEST(Conv1x1, PerSiteMatrixMultiply) {
    Rng rng(2);
    const Tensor x = rng.gaussian_tensor({1, 2, 3, 2}, 0.0, 1.0);
    Graph g;
    const Tensor out =
        conv1x1(g.constant(x), g.constant(Tensor({2, 2}, {2, 1, 0, 3})), g.constant(Tensor({2}))).value();
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t d = 0; d < 2; ++d) {
            const double a = x.at({0, 0, n, d}), b = x.at({0, 1, n, d});
            EXPECT_DOUBLE_EQ(out.at({0, 0, n, d}), 2 * a + b);
            EXPECT_DOUBLE_EQ(out.at({0, 1, n, d}), 3 * b);
        }
}

TEST(Conv1x1, ChannelMismatch) {
    Graph g;
    EXPECT_THROW(conv1x1(g.constant(Tensor({1, 3, 2, 2})), g.constant(Tensor({2, 2})), g.constant(Tensor({2}))),
                 DimensionError);
}

TEST(ConvEmbedding, ZeroLayersIsIdentity) {
    Rng rng(3);
    ConvEmbeddingParams params(4, 2, 0, rng);
    const Tensor x = rng.gaussian_tensor({1, 4, 3, 5}, 0.0, 1.0);
    Graph g;
    EXPECT_EQ(conv_embedding(g.constant(x), params).value(), x);
}

TEST(ConvEmbedding, ZeroCompressIsIdentity) {
    Rng rng(4);
    ConvEmbeddingParams params(4, 3, 1, rng);
    const Tensor x = rng.gaussian_tensor({1, 4, 3, 5}, 0.0, 1.0);
    Graph g;
    EXPECT_EQ(conv_embedding(g.constant(x), params).value(), x);
}

TEST(ConvEmbedding, MatchesPerSiteOracle) {
    Rng rng(5);
    ConvEmbeddingParams params(2, 2, 1, rng);
    randomize_compress(params, rng);
    const Tensor x = rng.gaussian_tensor({1, 2, 2, 2}, 0.0, 1.0);
    Graph g;
    expect_tensor_near(conv_embedding(g.constant(x), params).value(), conv_embedding_oracle(x, params), 1e-14);

    ConvEmbeddingParams deep(3, 2, 3, rng);
    randomize_compress(deep, rng);
    const Tensor y = rng.gaussian_tensor({1, 3, 4, 2}, 0.0, 1.0);
    Graph g2;
    expect_tensor_near(conv_embedding(g2.constant(y), deep).value(), conv_embedding_oracle(y, deep), 1e-13);
}

TEST(ConvEmbeddingParams, ShapesAndInit) {
    Rng rng(6);
    ConvEmbeddingParams params(8, 2, 2, rng);
    ASSERT_EQ(params.layer_count(), 2u);
    for (const auto& layer : params.layers()) {
        EXPECT_EQ(layer.expand_weight.value.shape(), (Shape{16, 8}));
        EXPECT_EQ(layer.expand_bias.value.shape(), (Shape{16}));
        EXPECT_EQ(layer.compress_weight.value.shape(), (Shape{8, 16}));
        EXPECT_EQ(layer.compress_bias.value.shape(), (Shape{8}));
        EXPECT_EQ(max_abs(layer.compress_weight.value), 0.0);
        EXPECT_EQ(max_abs(layer.compress_bias.value), 0.0);
        EXPECT_GT(max_abs(layer.expand_weight.value), 0.0);
    }
}

TEST(ConvEmbeddingParams, ParameterCount) {
    Rng rng(7);
    EXPECT_EQ(conv_embedding_parameter_count(8, 2, 1), 280u);
    EXPECT_EQ(ConvEmbeddingParams(8, 2, 1, rng).parameter_count(), 280u);
    for (std::size_t l = 0; l <= 3; ++l) {
        for (std::size_t r : {1u, 2u, 4u}) {
            ConvEmbeddingParams p(5, r, l, rng);
            EXPECT_EQ(p.parameter_count(), l * (2 * r * 25 + r * 5 + 5));
            std::size_t counted = 0;
            for (const Parameter* q : p.parameters()) counted += q->value.size();
            EXPECT_EQ(counted, p.parameter_count());
        }
    }
}

TEST(BaForward, IdentityAtInit) {
    Rng rng(8);
    for (std::size_t layers : {0u, 1u, 3u}) {
        ConvEmbeddingParams params(4, 2, layers, rng);
        const Tensor x = rng.uniform_tensor({4, 3, 8, 8}, 0.0, 1.0);
        EXPECT_EQ(ba_forward(x, params, 4), x);
    }
}

TEST(BaForward, MatchesComposedOracles) {
    Rng rng(9);
    ConvEmbeddingParams params(2, 2, 1, rng);
    randomize_compress(params, rng);
    const Tensor x = rng.uniform_tensor({2, 3, 4, 4}, 0.0, 1.0);
    expect_tensor_near(ba_forward(x, params, 2), ba_forward_oracle(x, params, 2), 1e-14);
}

TEST(BaForward, BatchMismatch) {
    Rng rng(10);
    ConvEmbeddingParams params(4, 2, 1, rng);
    EXPECT_THROW(ba_forward(Tensor({3, 3, 8, 8}), params, 4), DimensionError);
}

TEST(BaForward, CrossBatchCoupling) {
    Rng rng(11);
    ConvEmbeddingParams params(3, 2, 1, rng);
    randomize_compress(params, rng);
    const Tensor x = rng.uniform_tensor({3, 1, 2, 2}, 0.2, 0.8);
    const Tensor base = ba_forward(x, params, 1);
    const std::size_t per = 4;
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (i == j) continue;
            double sensitivity = 0.0;
            for (std::size_t e = 0; e < per; ++e) {
                Tensor xp = x, xm = x;
                xp[j * per + e] += 1e-5;
                xm[j * per + e] -= 1e-5;
                const Tensor op = ba_forward(xp, params, 1), om = ba_forward(xm, params, 1);
                for (std::size_t k = 0; k < per; ++k) {
                    const double d = (op[i * per + k] - om[i * per + k]) / 2e-5;
                    sensitivity += d * d;
                }
            }
            EXPECT_GT(std::sqrt(sensitivity), 1e-8) << "instance " << j << " -> " << i;
        }
    }
}

TEST(BaForward, ConjugationEquivariance) {
    Rng rng(12);
    const std::size_t b = 4;
    ConvEmbeddingParams params(b, 2, 2, rng);
    randomize_compress(params, rng);
    const Tensor x = rng.uniform_tensor({b, 2, 4, 4}, 0.0, 1.0);
    const std::vector<std::size_t> perm{2, 0, 3, 1};  // new instance i is old perm[i]
    const std::size_t per = x.size() / b;

    auto permute_batch = [&](const Tensor& t) {
        Tensor out = t;
        for (std::size_t i = 0; i < b; ++i)
            std::copy_n(t.data() + perm[i] * per, per, out.data() + i * per);
        return out;
    };
    // K' = P K P^T on the batch side of each kernel; the hidden side is untouched.
    ConvEmbeddingParams conj = params;
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        const auto& src = params.layers()[l];
        auto& dst = conj.layers()[l];
        const std::size_t rb = src.expand_weight.value.dim(0);
        for (std::size_t h = 0; h < rb; ++h)
            for (std::size_t i = 0; i < b; ++i) dst.expand_weight.value.at({h, i}) = src.expand_weight.value.at({h, perm[i]});
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t h = 0; h < rb; ++h) dst.compress_weight.value.at({i, h}) = src.compress_weight.value.at({perm[i], h});
            dst.compress_bias.value[i] = src.compress_bias.value[perm[i]];
        }
    }
    expect_tensor_near(ba_forward(permute_batch(x), conj, 2), permute_batch(ba_forward(x, params, 2)), 1e-14);
}

TEST(BaForward, ParameterGradientsMatchFiniteDifferences) {
    Rng rng(13);
    ConvEmbeddingParams params(2, 2, 2, rng);
    randomize_compress(params, rng);
    const Tensor x = rng.uniform_tensor({2, 2, 2, 2}, 0.1, 0.9);
    const Tensor w = rng.gaussian_tensor(x.shape(), 0.0, 1.0);
    for (Parameter* p : params.parameters()) {
        const double err = check_parameter_gradient(
            [&](Graph& g) { return sum(mul(ba_forward(g.constant(x), params, 1), g.constant(w))); }, *p);
        EXPECT_LE(err, kGradTolerance) << p->name;
    }
    Parameter px{"x", x};
    EXPECT_LE(check_parameter_gradient(
                  [&](Graph& g) { return sum(mul(ba_forward(g.parameter(px), params, 1), g.constant(w))); }, px),
              kGradTolerance);
}

TEST(BaForward, ParameterNames) {
    Rng rng(14);
    ConvEmbeddingParams params(2, 2, 2, rng);
    std::vector<std::string> names;
    for (const Parameter* p : params.parameters()) names.push_back(p->name);
    EXPECT_NE(std::find(names.begin(), names.end(), "ba.layer0.expand.weight"), names.end());
    EXPECT_NE(std::find(names.begin(), names.end(), "ba.layer1.compress.bias"), names.end());
    EXPECT_EQ(names.size(), 8u);
}
