#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "polar/basis.hpp"
#include "polar/core.hpp"
#include "polar/gp_transition.hpp"
#include "polar/linear_transition.hpp"

namespace polar {

/// r̄_k(h_k, a_k, s_{k+1}) with a declared sup-norm. An empty `fn` is the
/// zero reward.
struct RewardFn {
    std::function<double(const History&, int, const Eigen::VectorXd&)> fn;
    double sup_norm = 0.0;

    bool is_zero() const { return !fn; }
    double operator()(const History& h, int a, const Eigen::VectorXd& next) const { return fn ? fn(h, a, next) : 0.0; }

    static RewardFn zero() { return {}; }
    static RewardFn constant(double value);
};

/// Estimated stage-k transition P̂_k with its uncertainty quantifier Γ_k.
class StageTransitionModel {
public:
    virtual ~StageTransitionModel() = default;
    virtual int stage() const = 0;
    virtual Eigen::VectorXd mean(const History& h, int action) const = 0;
    /// Draw from P̂_k(.|h, a), clipped to the next box.
    virtual Eigen::VectorXd sample_next(const History& h, int action, Rng& rng) const = 0;
    /// Γ_k(h, a) >= 0.
    virtual double gamma(const History& h, int action) const = 0;
    /// sup Γ_k.
    virtual double gamma_bound() const = 0;
};

class LinearStageModel final : public StageTransitionModel {
public:
    LinearStageModel(FeatureMap features, LinearTransitionEstimate estimate, double c2, Box next_box);

    int stage() const override { return features_.stage(); }
    Eigen::VectorXd mean(const History& h, int action) const override;
    Eigen::VectorXd sample_next(const History& h, int action, Rng& rng) const override;
    double gamma(const History& h, int action) const override;
    double gamma_bound() const override { return 2.0; }

    const FeatureMap& features() const { return features_; }
    const LinearTransitionEstimate& estimate() const { return estimate_; }
    double c2() const { return c2_; }

private:
    FeatureMap features_;
    LinearTransitionEstimate estimate_;
    double c2_;
    Box next_box_;
};

/// Maps (h_k, a_k) to a GP input: states rescaled to [0, 1] by their boxes,
/// followed by a one-hot block over action histories ā_k.
class GpInputEncoder {
public:
    GpInputEncoder(const ModelSpec& spec, int k);

    int stage() const { return k_; }
    int dim() const { return state_dim_ + index_.count(); }
    int state_dim() const { return state_dim_; }
    Eigen::VectorXd operator()(const History& h, int action) const;
    /// 0 for state inputs, 1 for action inputs.
    std::vector<int> groups() const;

private:
    int k_;
    int state_dim_;
    ActionHistoryIndex index_;
    std::vector<Box> boxes_;
};

class GpStageModel final : public StageTransitionModel {
public:
    /// `offset` is added to the posterior mean (constant prior mean).
    GpStageModel(GpInputEncoder encoder, GpPosterior posterior, Eigen::VectorXd offset, double beta, Box next_box);

    int stage() const override { return encoder_.stage(); }
    Eigen::VectorXd mean(const History& h, int action) const override;
    Eigen::VectorXd sample_next(const History& h, int action, Rng& rng) const override;
    double gamma(const History& h, int action) const override;
    double gamma_bound() const override;

    const GpPosterior& posterior() const { return posterior_; }
    double beta() const { return beta_; }

private:
    GpInputEncoder encoder_;
    GpPosterior posterior_;
    Eigen::VectorXd offset_;
    double beta_;
    Box next_box_;
};

enum class TransitionKind { Linear, Gp };

struct TransitionConfig {
    TransitionKind kind = TransitionKind::Linear;
    PenaltyScale scale = PenaltyScale::Folded;
    double delta = 0.1;
    // linear
    double lambda_reg = 1.0;
    int basis_per_dim = 2;
    int basis_max_degree = 3;
    std::optional<double> w_star_norm_bound;
    // gp
    double gp_sigma = 0.18;
    double gp_signal_variance = 1.0;
    double gp_lengthscale = 1.0;
    std::vector<double> gp_lengthscale_grid{0.25, 0.5, 1.0, 2.0, 4.0};
    int gp_n_max = 2000;

    void validate() const;
};

using StageModels = std::vector<std::shared_ptr<const StageTransitionModel>>;

/// Fits P̂_1..P̂_K from offline trajectories. `noise` is the known additive
/// noise law used by linear models; `rng` drives GP subsampling only.
StageModels fit_transition_models(const ModelSpec& spec, std::span<const Trajectory> data,
                                  const TransitionConfig& config, const NoiseSpec& noise, const Rng& rng);

/// r̂_k(h, a) = mean of r̄_k(h, a, s') over m_noise draws s' ~ P̂_k(.|h, a).
double estimate_reward(const StageTransitionModel& model, const RewardFn& reward, const History& h, int action,
                       int m_noise, Rng& rng);

/// r̂ - c Γ.
double modified_reward(double r_hat, double gamma, double c);

/// M̃ = (P̂, r̂ - c Γ).
///
/// `expected_reward` evaluates r̂ by Monte-Carlo with m_noise draws.
/// `realized_reward` returns r̄_k(h, a, s') - c_k Γ_k(h, a), an unbiased
/// single-draw estimate of r̃_k used along simulated rollouts.
class ModifiedDtrModel final : public DtrModel {
public:
    ModifiedDtrModel(ModelSpec spec, StageModels transitions, std::vector<RewardFn> rewards, std::vector<double> c,
                     int m_noise, std::function<Eigen::VectorXd(Rng&)> initial);

    const ModelSpec& spec() const override { return spec_; }
    Eigen::VectorXd sample_initial(Rng& rng) const override { return initial_(rng); }
    Eigen::VectorXd transition(int k, const History& h, int action, Rng& rng) const override;
    double expected_reward(int k, const History& h, int action, Rng& rng) const override;
    bool has_realized_reward() const override { return true; }
    double realized_reward(int k, const History& h, int action, const Eigen::VectorXd& next) const override;
    double reward_bound(int k) const override;

    const StageTransitionModel& stage_model(int k) const { return *transitions_.at(static_cast<std::size_t>(k - 1)); }
    const RewardFn& reward(int k) const { return rewards_.at(static_cast<std::size_t>(k - 1)); }
    double penalty(int k) const { return c_.at(static_cast<std::size_t>(k - 1)); }
    int m_noise() const { return m_noise_; }
    double gamma(int k, const History& h, int action) const;

private:
    ModelSpec spec_;
    StageModels transitions_;
    std::vector<RewardFn> rewards_;
    std::vector<double> c_;
    int m_noise_;
    std::function<Eigen::VectorXd(Rng&)> initial_;
};

std::shared_ptr<ModifiedDtrModel> build_modified_model(const ModelSpec& spec, StageModels transitions,
                                                       std::vector<RewardFn> rewards, std::vector<double> c,
                                                       int m_noise, std::function<Eigen::VectorXd(Rng&)> initial);

/// c̃_k = Σ_{j>=k} ||r̄_j||_∞.
std::vector<double> theoretical_penalties(std::span<const RewardFn> rewards);

}  // namespace polar
