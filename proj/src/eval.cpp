#include "bassl/eval.hpp"

#include "bassl/autodiff.hpp"
#include "bassl/errors.hpp"
#include "bassl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace bassl {

Tensor extract_features(const LabeledImageSet& set, Encoder& encoder, std::size_t chunk) {
    const std::size_t m = set.size();
    const std::size_t dim = encoder.feature_dim();
    Tensor out({m, dim});
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < m; start += chunk) {
        const std::size_t stop = std::min(m, start + chunk);
        idx.resize(stop - start);
        std::iota(idx.begin(), idx.end(), start);
        Graph g;
        Var f = encoder.forward(g.constant(set.gather(idx)), Binding::frozen);
        std::copy_n(f.value().data(), f.value().size(), out.data() + start * dim);
    }
    return out;
}

double top1(const Tensor& scores, std::span<const std::size_t> labels) {
    if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
        throw DimensionError("top1: " + std::to_string(labels.size()) + " labels for scores " +
                             shape_string(scores.shape()));
    }
    const std::size_t classes = scores.dim(1);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double* row = scores.data() + r * classes;
        // max_element returns the first maximum, i.e. the lowest class index.
        const auto best = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
        correct += best == labels[r] ? 1 : 0;
    }
    return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows) {
    const std::size_t d = x.dim(1);
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(x.data() + rows[i] * d, d, out.data() + i * d);
    }
    return out;
}

}  // namespace

ProbeResult linear_probe(const Tensor& features, std::span<const std::size_t> labels,
                         std::size_t classes, const ProbeOptions& options) {
    if (features.rank() != 2 || features.dim(0) != labels.size()) {
        throw DimensionError("linear_probe: " + std::to_string(labels.size()) +
                             " labels for features " + shape_string(features.shape()));
    }
    const std::size_t m = labels.size();
    const std::size_t d = features.dim(1);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(options.split_seed);
    for (std::size_t i = m; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(m)));
    if (n_train == 0 || n_train >= m) {
        throw ConfigError("linear_probe: split leaves an empty train or held-out part");
    }
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    std::vector<std::size_t> train_labels, test_labels;
    for (std::size_t i : train_idx) {
        if (labels[i] >= classes) {
            throw IndexError("label " + std::to_string(labels[i]) + " out of range for " +
                             std::to_string(classes) + " classes");
        }
        train_labels.push_back(labels[i]);
    }
    for (std::size_t i : test_idx) {
        test_labels.push_back(labels[i]);
    }
    if (std::set<std::size_t>(train_labels.begin(), train_labels.end()).size() < 2) {
        throw ConfigError("linear_probe: train split contains fewer than two classes");
    }

    Tensor x_train = select_rows(features, train_idx);
    Tensor x_test = select_rows(features, test_idx);
    if (options.standardize) {
        for (std::size_t c = 0; c < d; ++c) {
            double mu = 0.0;
            for (std::size_t r = 0; r < n_train; ++r) {
                mu += x_train[r * d + c];
            }
            mu /= static_cast<double>(n_train);
            double var = 0.0;
            for (std::size_t r = 0; r < n_train; ++r) {
                var += (x_train[r * d + c] - mu) * (x_train[r * d + c] - mu);
            }
            const double sd = std::sqrt(var / static_cast<double>(n_train));
            const double inv = sd > 1e-12 ? 1.0 / sd : 0.0;
            for (std::size_t r = 0; r < n_train; ++r) {
                x_train[r * d + c] = (x_train[r * d + c] - mu) * inv;
            }
            for (std::size_t r = 0; r < x_test.dim(0); ++r) {
                x_test[r * d + c] = (x_test[r * d + c] - mu) * inv;
            }
        }
    }

    Parameter weight{"probe.weight", Tensor({d, classes})};
    Parameter bias{"probe.bias", Tensor({classes})};
    ProbeResult result;
    for (std::size_t step = 0; step < options.steps; ++step) {
        Graph g;
        Var logits = add_row_bias(matmul(g.constant(x_train), g.parameter(weight)), g.parameter(bias));
        Var loss = softmax_cross_entropy(logits, train_labels);
        Gradients grads = g.backward(loss);
        for (Parameter* p : {&weight, &bias}) {
            const Tensor& gp = grads.at(*p);
            for (std::size_t i = 0; i < gp.size(); ++i) {
                p->value[i] -= options.learning_rate * gp[i];
            }
        }
    }
    {
        Graph g;
        Var logits = add_row_bias(matmul(g.constant(x_train), g.parameter(weight)), g.parameter(bias));
        result.final_loss = softmax_cross_entropy(logits, train_labels).value().item();
    }

    Graph g;
    Var test_scores = add_row_bias(matmul(g.constant(x_test), g.constant(weight.value)),
                                   g.constant(bias.value));
    result.top1 = top1(test_scores.value(), test_labels);
    result.steps = options.steps;
    result.per_class.assign(classes, 0.0);
    std::vector<std::size_t> seen(classes, 0), hit(classes, 0);
    for (std::size_t r = 0; r < test_labels.size(); ++r) {
        const double* row = test_scores.value().data() + r * classes;
        const auto best = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
        const std::size_t label = test_labels[r];
        if (label < classes) {
            ++seen[label];
            hit[label] += best == label ? 1 : 0;
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        result.per_class[c] = seen[c] == 0 ? 0.0 : static_cast<double>(hit[c]) / static_cast<double>(seen[c]);
    }
    return result;
}

}  // namespace bassl
