#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>

#include "polar/basis.hpp"
#include "polar/core.hpp"
#include "polar/dataset.hpp"
#include "polar/noise.hpp"
#include "polar/pessimism.hpp"

namespace polar {

/// Three-stage environment with 2-D states and binary actions:
/// s_{k+1} = W_k^{a_k} (1, s_k) + ε_k, ε^i = 0.8 (z - 0.5), z ~ Beta(2,2),
/// s_1 ~ U[0,1]^2, r_1 = r_2 = 0 and
/// r_3 = 3.8 [(cos(-π s_3^1) + 2 cos(π s_3^2) + s_4^1 + 2 s_4^2)(1 + a_3) - 1.37].
class SimEnv final : public DtrModel {
public:
    static constexpr int kHorizon = 3;
    static constexpr int kStateDim = 2;
    static constexpr double kNoiseHalfWidth = 0.4;
    static constexpr const char* kVersion = "simenv-1";

    /// `noise_scale` multiplies the noise (0 gives deterministic dynamics);
    /// the state boxes always account for the nominal noise.
    explicit SimEnv(double noise_scale = 1.0);

    const ModelSpec& spec() const override { return spec_; }
    Eigen::VectorXd sample_initial(Rng& rng) const override;
    Eigen::VectorXd transition(int k, const History& h, int action, Rng& rng) const override;
    /// Exact: the stage-3 reward is affine in s_4 and the noise has mean 0.
    double expected_reward(int k, const History& h, int action, Rng& rng) const override;
    bool has_realized_reward() const override { return true; }
    double realized_reward(int k, const History& h, int action, const Eigen::VectorXd& next) const override;
    double reward_bound(int k) const override;

    /// W_k^a, 2 x 3.
    static const Eigen::Matrix<double, 2, 3>& weight(int k, int action);
    /// W_k^a (1, s).
    static Eigen::Vector2d mean_next(int k, int action, const Eigen::VectorXd& s);
    static double terminal_reward(const Eigen::VectorXd& s3, int a3, const Eigen::VectorXd& s4);

    double noise_scale() const { return noise_scale_; }
    /// Law of ε_k (zero noise when noise_scale is 0).
    NoiseSpec noise() const;

    /// Known stage rewards r̄_1..r̄_3 with analytic sup-norms.
    std::vector<RewardFn> reward_fns() const;

    /// W* in the coordinates of a degree-1, size-2-per-dimension feature map
    /// (multilinear interpolation reproduces the affine mean exactly).
    Eigen::MatrixXd true_weight(const FeatureMap& features) const;

private:
    ModelSpec spec_;
    double noise_scale_;
    std::array<double, kHorizon> reward_bounds_{};
};

/// n behavior-policy trajectories on `env`, with per-step behavior
/// probabilities. Trajectory i uses Rng(seed).child({i}).
OfflineDataset generate_offline_dataset(const DtrModel& env, const Policy& behavior, long n, double p,
                                        std::uint64_t seed, const std::string& env_version, int threads = 1);

}  // namespace polar
