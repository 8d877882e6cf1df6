#include "polar/eval.hpp"

#include <cmath>
#include <vector>

namespace polar {

ValueEstimate evaluate_policy_true(const DtrModel& model, const Policy& policy, long n_rollouts, std::uint64_t seed,
                                   int threads) {
    return value_mc(model, policy, n_rollouts, Rng(seed), threads);
}

OpeResult importance_sampling_ope(const Policy& policy, const OfflineDataset& data, bool self_normalized) {
    if (data.trajectories.empty()) throw DataError("empty dataset");
    if (data.behavior_probs.size() != data.trajectories.size()) throw DataError("dataset lacks behavior probabilities");
    const auto n = data.trajectories.size();
    std::vector<double> w(n);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = data.trajectories[i];
        const auto& pb = data.behavior_probs[i];
        if (pb.size() != t.actions.size()) throw DataError("behavior probability count mismatch");
        double wi = 1.0;
        for (int k = 1; k <= t.horizon(); ++k) {
            const double b = pb[static_cast<std::size_t>(k - 1)];
            if (!(b > 0.0)) throw DataError("zero behavior probability in trajectory " + std::to_string(i));
            const int a = t.actions[static_cast<std::size_t>(k - 1)];
            const auto probs = policy.action_probs(k, t.history(k));
            wi *= probs.at(static_cast<std::size_t>(a)) / b;
            if (wi == 0.0) break;
        }
        w[i] = wi;
        g[i] = t.total_reward();
    }
    double sw = 0.0;
    double sw2 = 0.0;
    double max_w = 0.0;
    for (double wi : w) {
        sw += wi;
        sw2 += wi * wi;
        max_w = std::max(max_w, wi);
    }
    if (sw == 0.0) throw DataError("all importance weights are zero");
    OpeResult out;
    const double nd = static_cast<double>(n);
    std::vector<double> terms(n);
    if (self_normalized) {
        double num = 0.0;
        for (std::size_t i = 0; i < n; ++i) num += w[i] * g[i];
        out.estimate = num / sw;
        // delta-method standard error
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = w[i] * (g[i] - out.estimate);
            acc += r * r;
        }
        out.std_error = std::sqrt(acc) / sw;
    } else {
        for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * g[i];
        const ValueEstimate v = summarize(terms);
        out.estimate = v.mean;
        out.std_error = v.std_error;
    }
    out.ess = sw * sw / sw2;
    out.max_weight = max_w;
    const double mean_w = sw / nd;
    const double var_w = n > 1 ? (sw2 - nd * mean_w * mean_w) / (nd - 1.0) : 0.0;
    out.weight_cv = std::sqrt(std::max(0.0, var_w)) / mean_w;
    out.low_ess = out.ess < 10.0;
    return out;
}

}  // namespace polar
