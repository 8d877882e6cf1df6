#include "polar/simenv.hpp"

#include <cmath>
#include <numbers>

#include "polar/parallel.hpp"

namespace polar {

namespace {

using W = Eigen::Matrix<double, 2, 3>;

const std::array<std::array<W, 2>, 3>& weights() {
    static const std::array<std::array<W, 2>, 3> w = [] {
        std::array<std::array<W, 2>, 3> m;
        m[0][0] << 0.4, 0.2, 0.0, 0.4, 0.0, 0.2;
        m[0][1] << 0.6, 0.0, -0.2, 0.4, 0.2, 0.0;
        m[1][0] << 0.5, 0.1, -0.1, 0.5, -0.1, 0.1;
        m[1][1] << 0.5, -0.1, 0.1, 0.5, 0.1, -0.1;
        m[2][0] << 0.6, -0.12, -0.08, 0.6, -0.08, -0.12;
        m[2][1] << 0.4, 0.08, 0.12, 0.4, 0.12, 0.08;
        return m;
    }();
    return w;
}

Interval affine_range(double w0, double w1, double w2, const Box& box) {
    double lo = w0;
    double hi = w0;
    const double c[2] = {w1, w2};
    for (int i = 0; i < 2; ++i) {
        const double a = c[i] * box[i].lo;
        const double b = c[i] * box[i].hi;
        lo += std::min(a, b);
        hi += std::max(a, b);
    }
    return {lo, hi};
}

/// Range of cos(π x) over [lo, hi].
Interval cos_pi_range(Interval x) {
    double lo = std::cos(std::numbers::pi * x.lo);
    double hi = lo;
    auto take = [&](double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    take(std::cos(std::numbers::pi * x.hi));
    for (double j = std::ceil(x.lo); j <= x.hi; j += 1.0) take(std::cos(std::numbers::pi * j));
    return {lo, hi};
}

}  // namespace

SimEnv::SimEnv(double noise_scale) : noise_scale_(noise_scale) {
    if (noise_scale < 0.0) throw ConfigError("noise scale must be non-negative");
    Box box({{0.0, 1.0}, {0.0, 1.0}});
    for (int k = 1; k <= kHorizon; ++k) {
        spec_.stages.push_back({k, box, 2});
        std::vector<Interval> next(2);
        for (int i = 0; i < 2; ++i) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (int a = 0; a < 2; ++a) {
                const auto& w = weight(k, a);
                const Interval r = affine_range(w(i, 0), w(i, 1), w(i, 2), box);
                lo = std::min(lo, r.lo);
                hi = std::max(hi, r.hi);
            }
            next[static_cast<std::size_t>(i)] = {lo - kNoiseHalfWidth, hi + kNoiseHalfWidth};
        }
        box = Box(std::move(next));
    }
    spec_.final_box = box;
    spec_.validate();

    const Box& b3 = spec_.box(3);
    const Box& b4 = spec_.box(4);
    const Interval c1 = cos_pi_range(b3[0]);
    const Interval c2 = cos_pi_range(b3[1]);
    const double in_lo = c1.lo + 2.0 * c2.lo + b4[0].lo + 2.0 * b4[1].lo;
    const double in_hi = c1.hi + 2.0 * c2.hi + b4[0].hi + 2.0 * b4[1].hi;
    double bound = 0.0;
    for (double mult : {1.0, 2.0}) {
        for (double v : {in_lo, in_hi}) bound = std::max(bound, std::abs(3.8 * (v * mult - 1.37)));
    }
    reward_bounds_ = {0.0, 0.0, bound};
}

const Eigen::Matrix<double, 2, 3>& SimEnv::weight(int k, int action) {
    if (k < 1 || k > kHorizon) throw ConfigError("simenv stage out of range");
    if (action < 0 || action > 1) throw ConfigError("simenv action must be 0 or 1");
    return weights()[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(action)];
}

Eigen::Vector2d SimEnv::mean_next(int k, int action, const Eigen::VectorXd& s) {
    if (s.size() != kStateDim) throw ConfigError("simenv states are 2-dimensional");
    return weight(k, action) * Eigen::Vector3d(1.0, s[0], s[1]);
}

double SimEnv::terminal_reward(const Eigen::VectorXd& s3, int a3, const Eigen::VectorXd& s4) {
    const double pi = std::numbers::pi;
    const double inner = std::cos(-s3[0] * pi) + 2.0 * std::cos(s3[1] * pi) + s4[0] + 2.0 * s4[1];
    return 3.8 * (inner * (1.0 + a3) - 1.37);
}

Eigen::VectorXd SimEnv::sample_initial(Rng& rng) const { return spec_.box(1).sample(rng); }

NoiseSpec SimEnv::noise() const {
    if (noise_scale_ == 0.0) return NoiseSpec::zero(kStateDim);
    return NoiseSpec::scaled_beta22(kStateDim, kNoiseHalfWidth * noise_scale_);
}

Eigen::VectorXd SimEnv::transition(int k, const History& h, int action, Rng& rng) const {
    if (h.stage() != k) throw ConfigError("history length does not match stage");
    Eigen::VectorXd s = mean_next(k, action, h.states.back());
    if (noise_scale_ > 0.0) {
        for (int i = 0; i < kStateDim; ++i) s[i] += noise_scale_ * 0.8 * (rng.beta22() - 0.5);
    }
    return spec_.box(k + 1).clip(s);
}

double SimEnv::expected_reward(int k, const History& h, int action, Rng&) const {
    if (k < kHorizon) return 0.0;
    const Eigen::VectorXd& s3 = h.states.back();
    return terminal_reward(s3, action, mean_next(k, action, s3));
}

double SimEnv::realized_reward(int k, const History& h, int action, const Eigen::VectorXd& next) const {
    if (k < kHorizon) return 0.0;
    return terminal_reward(h.states.back(), action, next);
}

double SimEnv::reward_bound(int k) const {
    if (k < 1 || k > kHorizon) throw ConfigError("simenv stage out of range");
    return reward_bounds_[static_cast<std::size_t>(k - 1)];
}

std::vector<RewardFn> SimEnv::reward_fns() const {
    RewardFn terminal;
    terminal.fn = [](const History& h, int a, const Eigen::VectorXd& next) {
        return terminal_reward(h.states.back(), a, next);
    };
    terminal.sup_norm = reward_bounds_[2];
    return {RewardFn::zero(), RewardFn::zero(), terminal};
}

Eigen::MatrixXd SimEnv::true_weight(const FeatureMap& features) const {
    const int k = features.stage();
    const auto& tensor = features.tensor();
    for (const auto& f : tensor.factors()) {
        if (f.degree() != 1 || f.size() != 2) throw ConfigError("true_weight needs a degree-1, size-2 basis");
    }
    const int D = tensor.dim();
    const int L = tensor.size();
    const auto& index = features.action_index();
    const auto boxes = history_boxes(spec_, k);
    std::vector<Interval> dims;
    for (const auto& b : boxes) {
        for (const auto& iv : b.intervals()) dims.push_back(iv);
    }
    Eigen::MatrixXd Wstar(kStateDim, static_cast<Eigen::Index>(L) * index.count());
    for (int b = 0; b < index.count(); ++b) {
        const int a = index.decode(b).back();
        for (int l = 0; l < L; ++l) {
            Eigen::VectorXd corner(D);
            for (int d = 0; d < D; ++d) {
                const bool upper = (l >> (D - 1 - d)) & 1;
                corner[d] = upper ? dims[static_cast<std::size_t>(d)].hi : dims[static_cast<std::size_t>(d)].lo;
            }
            Wstar.col(static_cast<Eigen::Index>(b) * L + l) = mean_next(k, a, corner.tail(kStateDim));
        }
    }
    return Wstar;
}

OfflineDataset generate_offline_dataset(const DtrModel& env, const Policy& behavior, long n, double p,
                                        std::uint64_t seed, const std::string& env_version, int threads) {
    if (n < 1) throw ConfigError("dataset size must be at least 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
    if (behavior.horizon() != env.horizon()) throw ConfigError("policy and model horizons differ");
    OfflineDataset data;
    data.p = p;
    data.seed = seed;
    data.env_version = env_version;
    data.trajectories.resize(static_cast<std::size_t>(n));
    data.behavior_probs.resize(static_cast<std::size_t>(n));
    const Rng root(seed);
    const int K = env.horizon();
    parallel_for(n, threads, [&](long i) {
        Rng rng = root.child({static_cast<std::uint64_t>(i)});
        Trajectory t;
        std::vector<double> probs;
        History h = History::initial(env.sample_initial(rng));
        t.states.push_back(h.states.front());
        for (int k = 1; k <= K; ++k) {
            const auto pk = behavior.action_probs(k, h);
            const int a = sample_discrete(pk, rng);
            Eigen::VectorXd next = env.transition(k, h, a, rng);
            const double r =
                env.has_realized_reward() ? env.realized_reward(k, h, a, next) : env.expected_reward(k, h, a, rng);
            t.actions.push_back(a);
            t.rewards.push_back(r);
            probs.push_back(pk[static_cast<std::size_t>(a)]);
            t.states.push_back(next);
            h.push(a, std::move(next));
        }
        data.trajectories[static_cast<std::size_t>(i)] = std::move(t);
        data.behavior_probs[static_cast<std::size_t>(i)] = std::move(probs);
    });
    return data;
}

}  // namespace polar
