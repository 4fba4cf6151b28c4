#include "bassl/contrastive.hpp"

#include "bassl/errors.hpp"

#include <numeric>
#include <vector>

namespace bassl {

namespace {

void require_embeddings(const Var& a, const Var& b, const char* op, bool same_rows) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[1] || (same_rows && as[0] != bs[0])) {
        throw DimensionError(std::string(op) + ": incompatible embeddings " + shape_string(as) +
                             " and " + shape_string(bs));
    }
}

}  // namespace

Var cosine_sim_matrix(const Var& a, const Var& b) {
    require_embeddings(a, b, "cosine_sim_matrix", false);
    return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

Var ctr(const Var& q, const Var& k, double temperature) {
    if (!(temperature > 0.0)) {
        throw ParameterError("temperature must be positive, got " + std::to_string(temperature));
    }
    require_embeddings(q, k, "ctr", true);
    const std::size_t n = q.shape()[0];
    std::vector<std::size_t> labels(n);
    std::iota(labels.begin(), labels.end(), std::size_t{0});
    Var logits = scale(cosine_sim_matrix(q, k), 1.0 / temperature);
    return scale(softmax_cross_entropy(logits, labels), 2.0 * temperature);
}

Var symmetric_ctr(const Var& q1, const Var& q2, const Var& k1, const Var& k2, double temperature) {
    return add(ctr(q1, k2, temperature), ctr(q2, k1, temperature));
}

Var negative_cosine(const Var& p, const Var& z) {
    require_embeddings(p, z, "negative_cosine", true);
    const double n = static_cast<double>(p.shape()[0]);
    return scale(sum(mul(l2_normalize_rows(p), l2_normalize_rows(z))), -1.0 / n);
}

}  // namespace bassl
