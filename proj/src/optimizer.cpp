#include "polar/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "polar/parallel.hpp"

namespace polar {

int PolarConfig::m_at(int k) const {
    if (m.size() == 1) return m.front();
    return m.at(static_cast<std::size_t>(k - 1));
}

void PolarConfig::validate(const SoftmaxSievePolicy& policy) const {
    if (T < 0) throw ConfigError("T must be non-negative");
    if (q_rollouts < 1) throw ConfigError("q_rollouts must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (m.empty() || (m.size() != 1 && static_cast<int>(m.size()) != policy.horizon())) {
        throw ConfigError("m must have one entry or one entry per stage");
    }
    for (int k = 1; k <= policy.horizon(); ++k) {
        if (m_at(k) < policy.basis(k).size()) {
            throw ConfigError("m_k must be at least L_k at stage " + std::to_string(k));
        }
    }
    if (eta_mode == EtaMode::Constant && !(eta_constant >= 0.0)) throw ConfigError("eta must be non-negative");
    if (!(ridge > 0.0)) throw ConfigError("ridge fallback must be positive");
}

double mc_q_eval(const DtrModel& model, const Policy& policy, int k, const History& h, int action, int q_rollouts,
                 const Rng& rng) {
    const int K = model.horizon();
    if (policy.horizon() != K) throw ConfigError("policy and model horizons differ");
    if (h.stage() != k) throw ConfigError("history length does not match stage");
    if (q_rollouts < 1) throw ConfigError("q_rollouts must be at least 1");
    Rng reward_rng = rng.child({~0ULL});
    const double first = model.expected_reward(k, h, action, reward_rng);
    if (k == K) return first;
    const bool realized = model.has_realized_reward();
    double acc = 0.0;
    for (int j = 0; j < q_rollouts; ++j) {
        Rng r = rng.child({static_cast<std::uint64_t>(j)});
        History cur = h.extended(action, model.transition(k, h, action, r));
        double ret = 0.0;
        for (int t = k + 1; t <= K; ++t) {
            const int a = policy.sample_action(t, cur, r);
            if (realized) {
                Eigen::VectorXd next = model.transition(t, cur, a, r);
                ret += model.realized_reward(t, cur, a, next);
                if (t < K) cur.push(a, std::move(next));
            } else {
                ret += model.expected_reward(t, cur, a, r);
                if (t < K) cur.push(a, model.transition(t, cur, a, r));
            }
        }
        acc += ret;
    }
    return first + acc / q_rollouts;
}

ProjectionResult sieve_project(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets, bool ridge_fallback,
                               double ridge) {
    if (design.rows() < 1) throw ConfigError("projection needs at least one sample");
    if (design.rows() != targets.size()) throw ConfigError("design and target sizes differ");
    ProjectionResult out;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == design.cols()) {
        out.coef = qr.solve(targets);
    } else {
        if (!ridge_fallback) throw NumericalError("rank-deficient sieve design");
        Eigen::MatrixXd G = design.transpose() * design;
        G.diagonal().array() += ridge;
        out.coef = G.ldlt().solve(design.transpose() * targets);
        out.used_fallback = true;
    }
    out.residual_rms = std::sqrt((design * out.coef - targets).squaredNorm() / static_cast<double>(targets.size()));
    return out;
}

ProjectionResult sieve_project(const TensorBasis& tensor, std::span<const Eigen::VectorXd> samples,
                               const Eigen::VectorXd& targets, bool ridge_fallback, double ridge) {
    Eigen::MatrixXd design(static_cast<Eigen::Index>(samples.size()), tensor.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        design.row(static_cast<Eigen::Index>(i)) = tensor.eval(samples[i]).transpose();
    }
    return sieve_project(design, targets, ridge_fallback, ridge);
}

std::vector<double> step_sizes(const DtrModel& model, const PolarConfig& config) {
    const int K = model.horizon();
    std::vector<double> eta(static_cast<std::size_t>(K), config.eta_constant);
    if (config.eta_mode == EtaMode::Constant) return eta;
    double q_tilde = 0.0;
    for (int k = K; k >= 1; --k) {
        q_tilde += model.reward_bound(k);
        const int n_actions = model.spec().stage(k).num_actions;
        const double num = std::sqrt(std::log(static_cast<double>(n_actions)));
        const double den = q_tilde * std::sqrt(static_cast<double>(std::max(config.T, 1)));
        eta[static_cast<std::size_t>(k - 1)] = den > 0.0 ? num / den : 0.0;
    }
    return eta;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

PolarResult polar_train(const DtrModel& model, const SoftmaxSievePolicy& initial, const PolarConfig& config,
                        const EvalHook& hook) {
    config.validate(initial);
    const ModelSpec& spec = model.spec();
    const int K = spec.horizon();
    if (initial.horizon() != K) throw ConfigError("policy and model horizons differ");
    const auto eta = step_sizes(model, config);
    const Rng root(config.seed);
    const auto start = std::chrono::steady_clock::now();

    PolarResult result{initial, {}, 0};
    auto current = std::make_shared<const SoftmaxSievePolicy>(initial);
    auto record = [&](int t, std::vector<double> residuals) {
        TraceEntry e;
        e.iteration = t;
        e.policy = current;
        e.residual_rms = std::move(residuals);
        if (hook) e.value = hook(t, *current);
        e.wall_ms = elapsed_ms(start);
        result.trace.push_back(std::move(e));
    };
    record(0, {});

    for (int t = 0; t < config.T; ++t) {
        SoftmaxSievePolicy next = *current;
        std::vector<double> residuals(static_cast<std::size_t>(K), 0.0);
        for (int k = 1; k <= K; ++k) {
            const auto& index = current->action_index(k);
            const auto& tensor = current->basis(k);
            const int m = config.m_at(k);
            const auto boxes = history_boxes(spec, k);
            Eigen::MatrixXd theta_hat(tensor.size(), index.count());
            double res_acc = 0.0;
            for (int b = 0; b < index.count(); ++b) {
                const std::vector<int> abar = index.decode(b);
                const std::span<const int> prefix(abar.data(), abar.size() - 1);
                const int a_k = abar.back();
                const Rng batch = root.child({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k),
                                              static_cast<std::uint64_t>(b)});
                Rng sample_rng = batch.child({0});
                const Rng q_rng = batch.child({1});

                std::vector<Eigen::VectorXd> samples(static_cast<std::size_t>(m));
                for (auto& s : samples) {
                    s.resize(spec.history_dim(k));
                    Eigen::Index off = 0;
                    for (const auto& box : boxes) {
                        s.segment(off, box.dim()) = box.sample(sample_rng);
                        off += box.dim();
                    }
                }
                Eigen::VectorXd targets(m);
                Eigen::MatrixXd design(m, tensor.size());
                try {
                    parallel_for(m, config.threads, [&](long i) {
                        const auto& s = samples[static_cast<std::size_t>(i)];
                        const History h = History::from_concat(spec, s, prefix);
                        targets[i] = mc_q_eval(model, *current, k, h, a_k, config.q_rollouts, q_rng);
                        design.row(i) = tensor.eval(s).transpose();
                    });
                    const auto proj = sieve_project(design, targets, config.ridge_fallback, config.ridge);
                    theta_hat.col(b) = proj.coef;
                    res_acc += proj.residual_rms * proj.residual_rms;
                } catch (const NumericalError& e) {
                    throw NumericalError("iteration " + std::to_string(t) + ", stage " + std::to_string(k) +
                                         ", action history " + std::to_string(b) + ": " + e.what());
                }
                result.q_evaluations += m;
            }
            residuals[static_cast<std::size_t>(k - 1)] = std::sqrt(res_acc / index.count());
            next = next.npg_update(k, theta_hat, eta[static_cast<std::size_t>(k - 1)]);
        }
        current = std::make_shared<const SoftmaxSievePolicy>(std::move(next));
        record(t + 1, std::move(residuals));
    }
    result.policy = *current;
    return result;
}

}  // namespace polar
