#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polar/rng.hpp"

namespace polar {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed interval [lo, hi] with lo < hi.
struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
};

/// Axis-aligned box; one non-degenerate interval per state dimension.
class Box {
public:
    Box() = default;
    explicit Box(std::vector<Interval> dims);

    int dim() const { return static_cast<int>(dims_.size()); }
    const Interval& operator[](int i) const { return dims_[static_cast<std::size_t>(i)]; }
    const std::vector<Interval>& intervals() const { return dims_; }

    bool contains(const Eigen::VectorXd& x) const;
    Eigen::VectorXd clip(const Eigen::VectorXd& x) const;
    Eigen::VectorXd sample(Rng& rng) const;

private:
    std::vector<Interval> dims_;
};

/// Stage k (1-based) of a horizon-K problem: state space S_k and |A_k|.
struct StageSpec {
    int k = 1;
    Box state_box;
    int num_actions = 1;
};

/// Stage layout shared by models and policies. `stages[k-1]` describes S_k and
/// A_k for k = 1..K; `final_box` is S_{K+1}.
struct ModelSpec {
    std::vector<StageSpec> stages;
    Box final_box;

    int horizon() const { return static_cast<int>(stages.size()); }
    const StageSpec& stage(int k) const { return stages.at(static_cast<std::size_t>(k - 1)); }
    /// Box of S_k for k = 1..K+1.
    const Box& box(int k) const;
    /// Total state dimension of (s_1, ..., s_k).
    int history_dim(int k) const;
    /// |A_1|, ..., |A_k|.
    std::vector<int> action_sizes(int k) const;

    void validate() const;
};

/// H_k = (s_1, a_1, ..., a_{k-1}, s_k).
struct History {
    std::vector<Eigen::VectorXd> states;
    std::vector<int> actions;

    int stage() const { return static_cast<int>(states.size()); }
    /// s̄_k: states concatenated in stage order.
    Eigen::VectorXd concat_states() const;
    /// H_{k+1} = (H_k, a_k, s_{k+1}).
    History extended(int action, Eigen::VectorXd next_state) const;
    void push(int action, Eigen::VectorXd next_state);

    static History initial(Eigen::VectorXd s1);
    /// Rebuild a history from s̄_k and an action prefix of length k-1.
    static History from_concat(const ModelSpec& spec, const Eigen::VectorXd& sbar, std::span<const int> actions);
};

struct Trajectory {
    std::vector<Eigen::VectorXd> states;  // K+1
    std::vector<int> actions;             // K
    std::vector<double> rewards;          // K

    int horizon() const { return static_cast<int>(actions.size()); }
    double total_reward() const;
    History history(int k) const;
    bool structurally_valid() const;
};

/// Finite-horizon DTR model (P, r) with initial distribution.
///
/// Implementations are immutable after construction and safe to share across
/// threads. All stage indices are 1-based.
class DtrModel {
public:
    virtual ~DtrModel() = default;

    virtual const ModelSpec& spec() const = 0;
    int horizon() const { return spec().horizon(); }

    virtual Eigen::VectorXd sample_initial(Rng& rng) const = 0;

    /// Draw s_{k+1} ~ P_k(.|h_k, a_k). Result lies in box(k+1).
    virtual Eigen::VectorXd transition(int k, const History& h, int action, Rng& rng) const = 0;

    /// r_k(h_k, a_k). Models whose reward is itself an estimate draw from `rng`.
    virtual double expected_reward(int k, const History& h, int action, Rng& rng) const = 0;

    /// True if `realized_reward` is available (R_k = r̄_k(h_k, a_k, s_{k+1})).
    virtual bool has_realized_reward() const { return false; }
    virtual double realized_reward(int k, const History& h, int action, const Eigen::VectorXd& next) const;

    /// Declared sup-norm bound on the stage-k reward.
    virtual double reward_bound(int k) const = 0;
};

/// History-dependent stochastic policy over finite action sets.
class Policy {
public:
    virtual ~Policy() = default;
    virtual int horizon() const = 0;
    /// π_k(.|h_k) over A_k.
    virtual std::vector<double> action_probs(int k, const History& h) const = 0;
    virtual int sample_action(int k, const History& h, Rng& rng) const;
};

/// Inverse-CDF draw from a discrete distribution.
int sample_discrete(std::span<const double> probs, Rng& rng);

struct ValueEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(n_rollouts)
    long n_rollouts = 0;
};

Trajectory sample_trajectory(const DtrModel& model, const Policy& policy, Rng& rng);

/// Monte-Carlo estimate of V_M^π. Rollout i uses the sub-stream rng.child({i}),
/// so the result does not depend on `threads`.
ValueEstimate value_mc(const DtrModel& model, const Policy& policy, long n_rollouts, const Rng& rng,
                       int threads = 1);

/// Mean and standard error of a sample (stderr 0 for a single value).
ValueEstimate summarize(std::span<const double> values);

}  // namespace polar
