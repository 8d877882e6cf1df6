#include "polar/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "polar/parallel.hpp"

namespace polar {

Box::Box(std::vector<Interval> dims) : dims_(std::move(dims)) {
    for (const auto& iv : dims_) {
        if (!(iv.lo < iv.hi)) throw ConfigError("state box interval must satisfy lo < hi");
    }
}

bool Box::contains(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
        if (x[i] < dims_[i].lo || x[i] > dims_[i].hi) return false;
    }
    return true;
}

Eigen::VectorXd Box::clip(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw ConfigError("state dimension does not match box");
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < dim(); ++i) out[i] = std::clamp(x[i], dims_[i].lo, dims_[i].hi);
    return out;
}

Eigen::VectorXd Box::sample(Rng& rng) const {
    Eigen::VectorXd out(dim());
    for (int i = 0; i < dim(); ++i) out[i] = rng.uniform(dims_[i].lo, dims_[i].hi);
    return out;
}

const Box& ModelSpec::box(int k) const {
    if (k == horizon() + 1) return final_box;
    return stage(k).state_box;
}

int ModelSpec::history_dim(int k) const {
    int d = 0;
    for (int j = 1; j <= k; ++j) d += box(j).dim();
    return d;
}

std::vector<int> ModelSpec::action_sizes(int k) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) out.push_back(stage(j).num_actions);
    return out;
}

void ModelSpec::validate() const {
    if (stages.empty()) throw ConfigError("model horizon must be at least 1");
    for (int k = 1; k <= horizon(); ++k) {
        const auto& st = stage(k);
        if (st.k != k) throw ConfigError("stage index mismatch in model spec");
        if (st.num_actions < 1) throw ConfigError("every stage needs at least one action");
        if (st.state_box.dim() < 1) throw ConfigError("every stage needs a state box");
    }
    if (final_box.dim() < 1) throw ConfigError("missing final state box");
}

Eigen::VectorXd History::concat_states() const {
    Eigen::Index n = 0;
    for (const auto& s : states) n += s.size();
    Eigen::VectorXd out(n);
    Eigen::Index off = 0;
    for (const auto& s : states) {
        out.segment(off, s.size()) = s;
        off += s.size();
    }
    return out;
}

History History::extended(int action, Eigen::VectorXd next_state) const {
    History h = *this;
    h.push(action, std::move(next_state));
    return h;
}

void History::push(int action, Eigen::VectorXd next_state) {
    actions.push_back(action);
    states.push_back(std::move(next_state));
}

History History::initial(Eigen::VectorXd s1) {
    History h;
    h.states.push_back(std::move(s1));
    return h;
}

History History::from_concat(const ModelSpec& spec, const Eigen::VectorXd& sbar, std::span<const int> actions) {
    const int k = static_cast<int>(actions.size()) + 1;
    if (sbar.size() != spec.history_dim(k)) throw ConfigError("state history dimension mismatch");
    History h;
    Eigen::Index off = 0;
    for (int j = 1; j <= k; ++j) {
        const int d = spec.box(j).dim();
        h.states.emplace_back(sbar.segment(off, d));
        off += d;
    }
    h.actions.assign(actions.begin(), actions.end());
    return h;
}

double Trajectory::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

History Trajectory::history(int k) const {
    History h;
    h.states.assign(states.begin(), states.begin() + k);
    h.actions.assign(actions.begin(), actions.begin() + (k - 1));
    return h;
}

bool Trajectory::structurally_valid() const {
    const auto K = actions.size();
    return K >= 1 && states.size() == K + 1 && rewards.size() == K;
}

double DtrModel::realized_reward(int, const History&, int, const Eigen::VectorXd&) const {
    throw ConfigError("model does not expose realized rewards");
}

int sample_discrete(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) last_positive = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding left u above the accumulated mass.
    return last_positive;
}

int Policy::sample_action(int k, const History& h, Rng& rng) const {
    const auto p = action_probs(k, h);
    return sample_discrete(p, rng);
}

Trajectory sample_trajectory(const DtrModel& model, const Policy& policy, Rng& rng) {
    const int K = model.horizon();
    if (policy.horizon() != K) throw ConfigError("policy horizon does not match model horizon");
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(K + 1));
    traj.actions.reserve(static_cast<std::size_t>(K));
    traj.rewards.reserve(static_cast<std::size_t>(K));

    History h = History::initial(model.sample_initial(rng));
    for (int k = 1; k <= K; ++k) {
        const int a = policy.sample_action(k, h, rng);
        Eigen::VectorXd next = model.transition(k, h, a, rng);
        const double r = model.has_realized_reward() ? model.realized_reward(k, h, a, next)
                                                     : model.expected_reward(k, h, a, rng);
        traj.actions.push_back(a);
        traj.rewards.push_back(r);
        h.push(a, std::move(next));
    }
    traj.states = std::move(h.states);
    return traj;
}

ValueEstimate summarize(std::span<const double> values) {
    ValueEstimate est;
    est.n_rollouts = static_cast<long>(values.size());
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.mean) * (v - est.mean);
        const double var = ss / static_cast<double>(values.size() - 1);
        est.std_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return est;
}

ValueEstimate value_mc(const DtrModel& model, const Policy& policy, long n_rollouts, const Rng& rng, int threads) {
    if (n_rollouts < 1) throw ConfigError("value_mc needs at least one rollout");
    if (policy.horizon() != model.horizon()) throw ConfigError("policy horizon does not match model horizon");
    std::vector<double> returns(static_cast<std::size_t>(n_rollouts));
    parallel_for(n_rollouts, threads, [&](long i) {
        Rng sub = rng.child({static_cast<std::uint64_t>(i)});
        returns[static_cast<std::size_t>(i)] = sample_trajectory(model, policy, sub).total_reward();
    });
    return summarize(returns);
}

}  // namespace polar
