#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "polar/basis.hpp"
#include "polar/core.hpp"
#include "polar/policy.hpp"

namespace polar {

enum class EtaMode {
    /// η_k = sqrt(log|A_k|) / (q̃_k sqrt(T)), q̃_k = Σ_{j>=k} reward_bound(j).
    Theoretical,
    /// η_k = eta_constant.
    Constant,
};

struct PolarConfig {
    int T = 20;
    /// Uniform state samples per (t, k, ā_k); one entry per stage, or a single
    /// value for all stages.
    std::vector<int> m{64};
    int q_rollouts = 32;
    EtaMode eta_mode = EtaMode::Theoretical;
    double eta_constant = 0.1;
    std::uint64_t seed = 0;
    int threads = 1;
    bool ridge_fallback = true;
    double ridge = 1e-8;

    int m_at(int k) const;
    void validate(const SoftmaxSievePolicy& policy) const;
};

/// Q̂_k(h, a): r̃_k(h, a) from the model's expected reward plus the mean, over
/// q_rollouts forward rollouts under `policy`, of the realized rewards of
/// stages k+1..K. Rollout j uses rng.child({j}); r̃_k uses rng.child({~0}).
/// At k = K no rollout is made.
double mc_q_eval(const DtrModel& model, const Policy& policy, int k, const History& h, int action, int q_rollouts,
                 const Rng& rng);

struct ProjectionResult {
    Eigen::VectorXd coef;
    double residual_rms = 0.0;
    bool used_fallback = false;
};

/// argmin_θ Σ_i (θ^T Υ(s̄_i) - y_i)^2 by column-pivoted QR. A rank-deficient
/// design falls back to (Φ^TΦ + ridge I)θ = Φ^T y, or throws NumericalError
/// when `ridge_fallback` is false.
ProjectionResult sieve_project(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets, bool ridge_fallback = true,
                               double ridge = 1e-8);
ProjectionResult sieve_project(const TensorBasis& tensor, std::span<const Eigen::VectorXd> samples,
                               const Eigen::VectorXd& targets, bool ridge_fallback = true, double ridge = 1e-8);

struct TraceEntry {
    int iteration = 0;
    std::shared_ptr<const SoftmaxSievePolicy> policy;
    double wall_ms = 0.0;
    std::optional<ValueEstimate> value;
    /// Per-stage RMS projection residual (empty for iteration 0).
    std::vector<double> residual_rms;
};

using TrainingTrace = std::vector<TraceEntry>;

struct PolarResult {
    SoftmaxSievePolicy policy;
    TrainingTrace trace;
    long q_evaluations = 0;
};

/// Optional per-iteration evaluation, called for t = 0..T.
using EvalHook = std::function<ValueEstimate(int iteration, const SoftmaxSievePolicy& policy)>;

/// Step sizes η_k for a run of `config.T` iterations.
std::vector<double> step_sizes(const DtrModel& model, const PolarConfig& config);

/// Sieve-projected natural policy gradient under `model` starting from
/// `initial` (normally the zero-parameter uniform policy).
PolarResult polar_train(const DtrModel& model, const SoftmaxSievePolicy& initial, const PolarConfig& config,
                        const EvalHook& hook = {});

}  // namespace polar
