#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "polar/core.hpp"
#include "polar/pessimism.hpp"

namespace toy {

using polar::Box;
using polar::History;
using polar::ModelSpec;
using polar::Rng;

/// K = 2, one-dimensional states in {0, 1} (box [0, 1]), binary actions.
/// P(s_1 = 1) = init1, P(s_{k+1} = 1 | s_k, a_k) = trans[k-1][s][a],
/// r_k(s_k, a_k) = reward[k-1][s][a].
class Tabular final : public polar::DtrModel {
public:
    double init1 = 0.3;
    std::array<std::array<std::array<double, 2>, 2>, 2> trans{{{{{0.2, 0.7}, {0.5, 0.9}}}, {{{0.4, 0.1}, {0.6, 0.3}}}}};
    std::array<std::array<std::array<double, 2>, 2>, 2> reward{{{{{1.0, 0.0}, {0.5, 2.0}}}, {{{0.0, 1.5}, {3.0, -1.0}}}}};

    Tabular() {
        Box b({{0.0, 1.0}});
        spec_.stages = {{1, b, 2}, {2, b, 2}};
        spec_.final_box = b;
    }

    const ModelSpec& spec() const override { return spec_; }
    Eigen::VectorXd sample_initial(Rng& rng) const override {
        return Eigen::VectorXd::Constant(1, rng.uniform() < init1 ? 1.0 : 0.0);
    }
    Eigen::VectorXd transition(int k, const History& h, int a, Rng& rng) const override {
        const int s = state(h);
        const double p1 = trans[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        return Eigen::VectorXd::Constant(1, rng.uniform() < p1 ? 1.0 : 0.0);
    }
    double expected_reward(int k, const History& h, int a, Rng&) const override {
        return reward[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(state(h))][static_cast<std::size_t>(a)];
    }
    double reward_bound(int) const override { return 3.0; }

    static int state(const History& h) { return h.states.back()[0] > 0.5 ? 1 : 0; }

    /// Exact V^π by enumeration; also returns E[G^2] in `second`.
    double exact_value(const polar::Policy& pi, double* second = nullptr) const {
        double v = 0.0;
        double v2 = 0.0;
        for (int s1 = 0; s1 < 2; ++s1) {
            const double p_s1 = s1 ? init1 : 1.0 - init1;
            History h1 = History::initial(Eigen::VectorXd::Constant(1, s1));
            const auto p1 = pi.action_probs(1, h1);
            for (int a1 = 0; a1 < 2; ++a1) {
                const double r1 = reward[0][static_cast<std::size_t>(s1)][static_cast<std::size_t>(a1)];
                for (int s2 = 0; s2 < 2; ++s2) {
                    const double q1 = trans[0][static_cast<std::size_t>(s1)][static_cast<std::size_t>(a1)];
                    const double p_s2 = s2 ? q1 : 1.0 - q1;
                    History h2 = h1.extended(a1, Eigen::VectorXd::Constant(1, s2));
                    const auto p2 = pi.action_probs(2, h2);
                    for (int a2 = 0; a2 < 2; ++a2) {
                        const double g = r1 + reward[1][static_cast<std::size_t>(s2)][static_cast<std::size_t>(a2)];
                        const double w = p_s1 * p1[static_cast<std::size_t>(a1)] * p_s2 * p2[static_cast<std::size_t>(a2)];
                        v += w * g;
                        v2 += w * g * g;
                    }
                }
            }
        }
        if (second) *second = v2;
        return v;
    }

private:
    ModelSpec spec_;
};

/// Policy given by a function of (k, history).
class FnPolicy final : public polar::Policy {
public:
    FnPolicy(int K, std::function<std::vector<double>(int, const History&)> fn) : K_(K), fn_(std::move(fn)) {}
    int horizon() const override { return K_; }
    std::vector<double> action_probs(int k, const History& h) const override { return fn_(k, h); }

private:
    int K_;
    std::function<std::vector<double>(int, const History&)> fn_;
};

/// Deterministic model: s_{k+1} = f(k, h, a), r_k = g(k, h, a).
class Deterministic final : public polar::DtrModel {
public:
    using StepFn = std::function<Eigen::VectorXd(int, const History&, int)>;
    using RewardFn = std::function<double(int, const History&, int)>;

    Deterministic(ModelSpec spec, Eigen::VectorXd s1, StepFn step, RewardFn reward, double bound = 1.0)
        : spec_(std::move(spec)), s1_(std::move(s1)), step_(std::move(step)), reward_(std::move(reward)), bound_(bound) {}

    const ModelSpec& spec() const override { return spec_; }
    Eigen::VectorXd sample_initial(Rng&) const override { return s1_; }
    Eigen::VectorXd transition(int k, const History& h, int a, Rng&) const override {
        return spec_.box(k + 1).clip(step_(k, h, a));
    }
    double expected_reward(int k, const History& h, int a, Rng&) const override { return reward_(k, h, a); }
    double reward_bound(int) const override { return bound_; }

private:
    ModelSpec spec_;
    Eigen::VectorXd s1_;
    StepFn step_;
    RewardFn reward_;
    double bound_;
};

/// Stage model with a fixed mean map, zero-mean additive noise and constant Γ.
class FixedStage final : public polar::StageTransitionModel {
public:
    FixedStage(int k, std::function<Eigen::VectorXd(const History&, int)> mean, polar::NoiseSpec noise, double gamma,
               Box next_box)
        : k_(k), mean_(std::move(mean)), noise_(std::move(noise)), gamma_(gamma), box_(std::move(next_box)) {}

    int stage() const override { return k_; }
    Eigen::VectorXd mean(const History& h, int a) const override { return mean_(h, a); }
    Eigen::VectorXd sample_next(const History& h, int a, Rng& rng) const override {
        return box_.clip(mean_(h, a) + noise_.sample(rng));
    }
    double gamma(const History&, int) const override { return gamma_; }
    double gamma_bound() const override { return gamma_; }

private:
    int k_;
    std::function<Eigen::VectorXd(const History&, int)> mean_;
    polar::NoiseSpec noise_;
    double gamma_;
    Box box_;
};

inline ModelSpec unit_spec(int K, int dim, int actions) {
    std::vector<polar::Interval> iv(static_cast<std::size_t>(dim), {0.0, 1.0});
    ModelSpec spec;
    for (int k = 1; k <= K; ++k) spec.stages.push_back({k, Box(iv), actions});
    spec.final_box = Box(iv);
    return spec;
}

}  // namespace toy
