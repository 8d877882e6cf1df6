#pragma once

#include <cstdint>

#include "polar/core.hpp"
#include "polar/dataset.hpp"

namespace polar {

/// Monte-Carlo value of `policy` under the true model, Rng(seed) root.
ValueEstimate evaluate_policy_true(const DtrModel& model, const Policy& policy, long n_rollouts, std::uint64_t seed,
                                   int threads = 1);

struct OpeResult {
    double estimate = 0.0;
    double std_error = 0.0;
    /// (Σw)² / Σw².
    double ess = 0.0;
    double max_weight = 0.0;
    /// Coefficient of variation of the weights.
    double weight_cv = 0.0;
    /// ESS below 10.
    bool low_ess = false;
};

/// Trajectory-wise importance sampling:
/// (1/n) Σ_i Π_k π(a_k|h_k)/π_b(a_k|h_k) · Σ_k r_k, or the self-normalized
/// variant dividing by Σ_i w_i instead of n.
OpeResult importance_sampling_ope(const Policy& policy, const OfflineDataset& data, bool self_normalized = false);

}  // namespace polar
