#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "polar/basis.hpp"
#include "polar/core.hpp"

namespace polar {

struct DpResult {
    int action = 0;
    double value = 0.0;
    std::vector<double> q;  // per action
};

/// Sampled-tree dynamic programming on a model with enumerable actions.
///
/// Q(h_k, a) = r_k(h_k, a) + (1/n_branch) Σ_i V(h_k, a, s_i), s_i ~ P_k, and
/// V(h) = max_a Q(h, a); at stage K, Q(h_K, a) = r_K(h_K, a). Each action's
/// subtree draws from its own sub-stream of `rng`. Throws ConfigError when
/// the tree would exceed `node_cap` transition draws.
DpResult dp_optimal_action(const DtrModel& model, const History& h, int n_branch, const Rng& rng,
                           long node_cap = 100'000'000);

/// Deterministic approximately-optimal policy: stage-1 actions looked up on a
/// grid of s_1 (nearest neighbour), later stages solved on demand with a
/// sub-stream keyed by the history.
class DpOracle final : public Policy {
public:
    struct Options {
        int n_branch = 100;
        int grid_per_dim = 21;
        std::uint64_t seed = 20240601;
        int threads = 1;
    };

    DpOracle(std::shared_ptr<const DtrModel> model, Options options);

    int horizon() const override { return model_->horizon(); }
    std::vector<double> action_probs(int k, const History& h) const override;
    int sample_action(int k, const History& h, Rng& rng) const override;
    int optimal_action(int k, const History& h) const;

    /// Mean of the grid values V_1*(s_1).
    double grid_value_mean() const;
    const std::vector<Eigen::VectorXd>& grid() const { return grid_; }
    const std::vector<DpResult>& grid_results() const { return grid_results_; }

private:
    std::shared_ptr<const DtrModel> model_;
    Options opt_;
    std::vector<Eigen::VectorXd> grid_;
    std::vector<DpResult> grid_results_;
};

/// Seed stream keyed by the bit patterns of a history.
Rng history_stream(std::uint64_t seed, const History& h);

/// Takes the action of a deterministic `optimal` policy with probability p
/// and the other action with probability 1 - p (binary actions only).
class BehaviorPolicy final : public Policy {
public:
    BehaviorPolicy(std::shared_ptr<const Policy> optimal, const ModelSpec& spec, double p);

    int horizon() const override { return optimal_->horizon(); }
    std::vector<double> action_probs(int k, const History& h) const override;
    double p() const { return p_; }

private:
    std::shared_ptr<const Policy> optimal_;
    double p_;
};

std::shared_ptr<BehaviorPolicy> make_behavior_policy(std::shared_ptr<const Policy> optimal, const ModelSpec& spec,
                                                     double p);

/// Argmax with ties to the lowest index.
int argmax_lowest(std::span<const double> values);

/// Greedy policy of a linear Q-function Q_k(h, a) = θ_k[ā_k]^T Υ_k(s̄_k).
class QLearnedPolicy final : public Policy {
public:
    QLearnedPolicy(std::vector<FeatureMap> features, std::vector<Eigen::MatrixXd> thetas);

    int horizon() const override { return static_cast<int>(features_.size()); }
    std::vector<double> action_probs(int k, const History& h) const override;
    double q_value(int k, const History& h, int action) const;
    std::vector<double> q_values(int k, const History& h) const;
    int greedy_action(int k, const History& h) const;
    const Eigen::MatrixXd& theta(int k) const { return thetas_.at(static_cast<std::size_t>(k - 1)); }

private:
    std::vector<FeatureMap> features_;
    std::vector<Eigen::MatrixXd> thetas_;  // L_k x N_k^(A)
    std::vector<int> num_actions_;
};

/// Backward fitted-Q recursion with ridge λ_q: stage K regresses r_K on Φ_K;
/// stage k < K regresses r_k + max_a Q̂_{k+1}(h_{k+1}, a). A singular system
/// with λ_q = 0 retries with λ_q = 1e-8.
QLearnedPolicy dtr_q_learning(const ModelSpec& spec, std::span<const Trajectory> data, std::vector<FeatureMap> features,
                              double lambda_q = 1e-6);

/// Φ_k = B-spline ⊗ action one-hot with `per_dim` functions per state dim.
std::vector<FeatureMap> default_q_features(const ModelSpec& spec, int per_dim = 2, int max_degree = 3);

}  // namespace polar
