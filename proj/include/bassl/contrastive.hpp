#pragma once

#include "bassl/autodiff.hpp"

namespace bassl {

inline constexpr double kDefaultTemperature = 0.2;

/// out[i][j] = <a_i / |a_i|, b_j / |b_j|>. Inputs are (N, D) and (M, D).
Var cosine_sim_matrix(const Var& a, const Var& b);

/// InfoNCE with in-batch negatives, scaled by 2*tau:
///   2 * tau * CE(cos(q, k) / tau, labels = 0..N-1).
/// Row i treats k_i as the positive and the other N-1 keys as negatives.
/// Callers detach k when the framework requires it.
Var ctr(const Var& q, const Var& k, double temperature);

/// ctr(q1, k2) + ctr(q2, k1).
Var symmetric_ctr(const Var& q1, const Var& q2, const Var& k1, const Var& k2, double temperature);

/// mean_i -<p_i/|p_i|, z_i/|z_i|>; the BYOL / SimSiam regression loss.
Var negative_cosine(const Var& p, const Var& z);

}  // namespace bassl
