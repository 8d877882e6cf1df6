#include "polar/baselines.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "polar/parallel.hpp"

namespace polar {

int argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw ConfigError("argmax over an empty set");
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

namespace {

double dp_value(const DtrModel& model, const History& h, int n_branch, Rng& rng);

double dp_q(const DtrModel& model, const History& h, int a, int n_branch, Rng& rng) {
    const int k = h.stage();
    const double r = model.expected_reward(k, h, a, rng);
    if (k == model.horizon()) return r;
    double acc = 0.0;
    for (int i = 0; i < n_branch; ++i) {
        const History next = h.extended(a, model.transition(k, h, a, rng));
        acc += dp_value(model, next, n_branch, rng);
    }
    return r + acc / n_branch;
}

double dp_value(const DtrModel& model, const History& h, int n_branch, Rng& rng) {
    const int n_actions = model.spec().stage(h.stage()).num_actions;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions; ++a) best = std::max(best, dp_q(model, h, a, n_branch, rng));
    return best;
}

}  // namespace

DpResult dp_optimal_action(const DtrModel& model, const History& h, int n_branch, const Rng& rng, long node_cap) {
    if (n_branch < 1) throw ConfigError("n_branch must be at least 1");
    const int k = h.stage();
    const int K = model.horizon();
    if (k < 1 || k > K) throw ConfigError("history stage out of range");
    double nodes = 1.0;
    for (int j = k; j < K; ++j) nodes *= static_cast<double>(model.spec().stage(j).num_actions) * n_branch;
    if (nodes > static_cast<double>(node_cap)) throw ConfigError("DP tree exceeds the node cap");
    const int n_actions = model.spec().stage(k).num_actions;
    DpResult out;
    out.q.resize(static_cast<std::size_t>(n_actions));
    for (int a = 0; a < n_actions; ++a) {
        Rng r = rng.child({static_cast<std::uint64_t>(a)});
        out.q[static_cast<std::size_t>(a)] = dp_q(model, h, a, n_branch, r);
    }
    out.action = argmax_lowest(out.q);
    out.value = out.q[static_cast<std::size_t>(out.action)];
    return out;
}

Rng history_stream(std::uint64_t seed, const History& h) {
    std::uint64_t s = mix64(seed ^ static_cast<std::uint64_t>(h.stage()));
    for (const auto& state : h.states) {
        for (Eigen::Index i = 0; i < state.size(); ++i) s = mix64(s ^ std::bit_cast<std::uint64_t>(state[i]));
    }
    for (int a : h.actions) s = mix64(s ^ static_cast<std::uint64_t>(a + 1));
    return Rng(s);
}

DpOracle::DpOracle(std::shared_ptr<const DtrModel> model, Options options)
    : model_(std::move(model)), opt_(options) {
    if (!model_) throw ConfigError("DP oracle needs a model");
    if (opt_.grid_per_dim < 1) throw ConfigError("grid size must be positive");
    const Box& box = model_->spec().box(1);
    const int D = box.dim();
    long total = 1;
    for (int d = 0; d < D; ++d) total *= opt_.grid_per_dim;
    grid_.reserve(static_cast<std::size_t>(total));
    for (long flat = 0; flat < total; ++flat) {
        Eigen::VectorXd s(D);
        long rem = flat;
        for (int d = D - 1; d >= 0; --d) {
            const int j = static_cast<int>(rem % opt_.grid_per_dim);
            rem /= opt_.grid_per_dim;
            s[d] = opt_.grid_per_dim == 1 ? 0.5 * (box[d].lo + box[d].hi)
                                          : box[d].lo + box[d].width() * j / (opt_.grid_per_dim - 1);
        }
        grid_.push_back(std::move(s));
    }
    grid_results_.resize(grid_.size());
    parallel_for(static_cast<long>(grid_.size()), opt_.threads, [&](long i) {
        const History h = History::initial(grid_[static_cast<std::size_t>(i)]);
        grid_results_[static_cast<std::size_t>(i)] =
            dp_optimal_action(*model_, h, opt_.n_branch, history_stream(opt_.seed, h));
    });
}

int DpOracle::optimal_action(int k, const History& h) const {
    if (k == 1) {
        const Eigen::VectorXd s = model_->spec().box(1).clip(h.states.front());
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const double d = (grid_[i] - s).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return grid_results_[best].action;
    }
    return dp_optimal_action(*model_, h, opt_.n_branch, history_stream(opt_.seed, h)).action;
}

std::vector<double> DpOracle::action_probs(int k, const History& h) const {
    std::vector<double> p(static_cast<std::size_t>(model_->spec().stage(k).num_actions), 0.0);
    p[static_cast<std::size_t>(optimal_action(k, h))] = 1.0;
    return p;
}

int DpOracle::sample_action(int k, const History& h, Rng&) const { return optimal_action(k, h); }

double DpOracle::grid_value_mean() const {
    double acc = 0.0;
    for (const auto& r : grid_results_) acc += r.value;
    return acc / static_cast<double>(grid_results_.size());
}

BehaviorPolicy::BehaviorPolicy(std::shared_ptr<const Policy> optimal, const ModelSpec& spec, double p)
    : optimal_(std::move(optimal)), p_(p) {
    if (!optimal_) throw ConfigError("behavior policy needs an optimal policy");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
    for (const auto& st : spec.stages) {
        if (st.num_actions != 2) throw ConfigError("behavior policy flip rule needs binary actions");
    }
}

std::vector<double> BehaviorPolicy::action_probs(int k, const History& h) const {
    const auto opt = optimal_->action_probs(k, h);
    const int a_star = argmax_lowest(opt);
    std::vector<double> p(2, 1.0 - p_);
    p[static_cast<std::size_t>(a_star)] = p_;
    return p;
}

std::shared_ptr<BehaviorPolicy> make_behavior_policy(std::shared_ptr<const Policy> optimal, const ModelSpec& spec,
                                                     double p) {
    return std::make_shared<BehaviorPolicy>(std::move(optimal), spec, p);
}

QLearnedPolicy::QLearnedPolicy(std::vector<FeatureMap> features, std::vector<Eigen::MatrixXd> thetas)
    : features_(std::move(features)), thetas_(std::move(thetas)) {
    if (features_.size() != thetas_.size()) throw ConfigError("one Q coefficient matrix per stage is required");
    for (std::size_t k = 0; k < features_.size(); ++k) {
        const auto& f = features_[k];
        if (thetas_[k].rows() != f.tensor().size() || thetas_[k].cols() != f.action_index().count()) {
            throw ConfigError("Q coefficient shape mismatch");
        }
        num_actions_.push_back(f.action_index().sizes().back());
    }
}

double QLearnedPolicy::q_value(int k, const History& h, int action) const {
    const BlockFeature phi = features_.at(static_cast<std::size_t>(k - 1))(h, action);
    return theta(k).col(phi.block).dot(phi.upsilon);
}

std::vector<double> QLearnedPolicy::q_values(int k, const History& h) const {
    std::vector<double> q(static_cast<std::size_t>(num_actions_.at(static_cast<std::size_t>(k - 1))));
    for (std::size_t a = 0; a < q.size(); ++a) q[a] = q_value(k, h, static_cast<int>(a));
    return q;
}

int QLearnedPolicy::greedy_action(int k, const History& h) const { return argmax_lowest(q_values(k, h)); }

std::vector<double> QLearnedPolicy::action_probs(int k, const History& h) const {
    std::vector<double> p(static_cast<std::size_t>(num_actions_.at(static_cast<std::size_t>(k - 1))), 0.0);
    p[static_cast<std::size_t>(greedy_action(k, h))] = 1.0;
    return p;
}

namespace {

Eigen::VectorXd solve_block(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double lambda) {
    Eigen::MatrixXd G = gram;
    G.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
        G.diagonal().array() += 1e-8;
        llt.compute(G);
        if (llt.info() != Eigen::Success) throw NumericalError("Q-learning regression is singular");
    }
    return llt.solve(rhs);
}

}  // namespace

QLearnedPolicy dtr_q_learning(const ModelSpec& spec, std::span<const Trajectory> data, std::vector<FeatureMap> features,
                              double lambda_q) {
    const int K = spec.horizon();
    if (static_cast<int>(features.size()) != K) throw ConfigError("one Q feature map per stage is required");
    if (lambda_q < 0.0) throw ConfigError("lambda_q must be non-negative");
    for (const auto& t : data) {
        if (t.horizon() != K || !t.structurally_valid()) throw DataError("dataset stage count does not match model");
    }
    std::vector<Eigen::MatrixXd> thetas(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        const auto& f = features[static_cast<std::size_t>(k - 1)];
        thetas[static_cast<std::size_t>(k - 1)] = Eigen::MatrixXd::Zero(f.tensor().size(), f.action_index().count());
    }
    std::vector<double> next_value(data.size(), 0.0);
    for (int k = K; k >= 1; --k) {
        const auto& f = features[static_cast<std::size_t>(k - 1)];
        const int L = f.tensor().size();
        const int N = f.action_index().count();
        std::vector<Eigen::MatrixXd> gram(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(L, L));
        std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(L));
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& t = data[i];
            const BlockFeature phi = f(t.history(k), t.actions[static_cast<std::size_t>(k - 1)]);
            const double y = t.rewards[static_cast<std::size_t>(k - 1)] + next_value[i];
            gram[static_cast<std::size_t>(phi.block)].noalias() += phi.upsilon * phi.upsilon.transpose();
            rhs[static_cast<std::size_t>(phi.block)].noalias() += y * phi.upsilon;
        }
        auto& theta = thetas[static_cast<std::size_t>(k - 1)];
        for (int b = 0; b < N; ++b) {
            theta.col(b) = solve_block(gram[static_cast<std::size_t>(b)], rhs[static_cast<std::size_t>(b)], lambda_q);
        }
        if (k > 1) {
            const QLearnedPolicy partial(features, thetas);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto q = partial.q_values(k, data[i].history(k));
                next_value[i] = *std::max_element(q.begin(), q.end());
            }
        }
    }
    return QLearnedPolicy(std::move(features), std::move(thetas));
}

std::vector<FeatureMap> default_q_features(const ModelSpec& spec, int per_dim, int max_degree) {
    std::vector<FeatureMap> out;
    for (int k = 1; k <= spec.horizon(); ++k) {
        const auto boxes = history_boxes(spec, k);
        out.emplace_back(spec, k, TensorBasis::uniform(boxes, per_dim, max_degree));
    }
    return out;
}

}  // namespace polar
