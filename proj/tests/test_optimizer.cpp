#include "doctest.h"

#include <cmath>

#include "polar/optimizer.hpp"
#include "polar/pessimism.hpp"
#include "polar/simenv.hpp"
#include "toy_models.hpp"

using namespace polar;

namespace {

// K = 1, r(a) = a for every state.
toy::Deterministic bandit(int actions = 2) {
    return toy::Deterministic(
        toy::unit_spec(1, 1, actions), Eigen::VectorXd::Constant(1, 0.5),
        [](int, const History& h, int) { return h.states.back(); }, [](int, const History&, int a) { return double(a); });
}

class ThrowingModel final : public DtrModel {
public:
    ModelSpec spec_ = toy::unit_spec(1, 1, 2);
    const ModelSpec& spec() const override { return spec_; }
    Eigen::VectorXd sample_initial(Rng&) const override { return Eigen::VectorXd::Zero(1); }
    Eigen::VectorXd transition(int, const History&, int, Rng&) const override { return Eigen::VectorXd::Zero(1); }
    double expected_reward(int, const History&, int, Rng&) const override { throw NumericalError("bad reward"); }
    double reward_bound(int) const override { return 1.0; }
};

// Exact Q_1 on the tabular toy under a policy.
double exact_q1(const toy::Tabular& m, const Policy& pi, int s1, int a1) {
    double q = m.reward[0][static_cast<std::size_t>(s1)][static_cast<std::size_t>(a1)];
    const double p1 = m.trans[0][static_cast<std::size_t>(s1)][static_cast<std::size_t>(a1)];
    for (int s2 = 0; s2 < 2; ++s2) {
        const History h2 = History::initial(Eigen::VectorXd::Constant(1, s1)).extended(a1, Eigen::VectorXd::Constant(1, s2));
        const auto p = pi.action_probs(2, h2);
        double v = 0.0;
        for (int a2 = 0; a2 < 2; ++a2) v += p[static_cast<std::size_t>(a2)] * m.reward[1][static_cast<std::size_t>(s2)][static_cast<std::size_t>(a2)];
        q += (s2 ? p1 : 1.0 - p1) * v;
    }
    return q;
}

SoftmaxSievePolicy tabular_policy(const ModelSpec& spec) {
    const std::vector<int> budgets{2, 4};
    return SoftmaxSievePolicy::with_budgets(spec, budgets, 1);
}

}  // namespace

TEST_CASE("mc_q_eval: terminal stage returns the reward, zero rewards give zero") {
    toy::Tabular m;
    const auto pi = tabular_policy(m.spec());
    History h = History::initial(Eigen::VectorXd::Constant(1, 1.0));
    h.push(0, Eigen::VectorXd::Constant(1, 0.0));
    CHECK(mc_q_eval(m, pi, 2, h, 1, 8, Rng(1)) == m.reward[1][0][1]);

    toy::Tabular z;
    for (auto& st : z.reward)
        for (auto& row : st) row = {0.0, 0.0};
    CHECK(mc_q_eval(z, pi, 1, History::initial(Eigen::VectorXd::Zero(1)), 0, 16, Rng(2)) == 0.0);
    CHECK_THROWS_AS(mc_q_eval(m, pi, 1, h, 0, 8, Rng(1)), ConfigError);
    CHECK_THROWS_AS(mc_q_eval(m, pi, 2, h, 0, 0, Rng(1)), ConfigError);
}

TEST_CASE("mc_q_eval: matches enumeration on the tabular toy") {
    toy::Tabular m;
    Rng prng(3);
    auto pi = tabular_policy(m.spec());
    Eigen::MatrixXd th(4, 4);
    for (Eigen::Index i = 0; i < th.size(); ++i) th.data()[i] = prng.uniform(-2, 2);
    pi = pi.with_theta(2, th);
    for (int s1 = 0; s1 < 2; ++s1) {
        for (int a = 0; a < 2; ++a) {
            const History h = History::initial(Eigen::VectorXd::Constant(1, s1));
            const int reps = 400;
            std::vector<double> est(reps);
            for (int r = 0; r < reps; ++r) est[static_cast<std::size_t>(r)] = mc_q_eval(m, pi, 1, h, a, 16, Rng(1000 + r));
            const auto s = summarize(est);
            CHECK(std::abs(s.mean - exact_q1(m, pi, s1, a)) < 3.0 * s.std_error);
        }
    }
}

TEST_CASE("sieve_project: in-span, constants and the normal equations") {
    Rng rng(4);
    const std::vector<Box> boxes{Box({{0.0, 1.0}, {0.0, 1.0}})};
    const TensorBasis t = TensorBasis::uniform(boxes, 3);
    std::vector<Eigen::VectorXd> s(60);
    for (auto& v : s) v = boxes[0].sample(rng);
    Eigen::VectorXd theta(t.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.uniform(-1, 1);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) y[i] = t.eval(s[static_cast<std::size_t>(i)]).dot(theta);
    auto p = sieve_project(t, s, y);
    CHECK((p.coef - theta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(p.residual_rms <= 1e-8);
    CHECK_FALSE(p.used_fallback);

    p = sieve_project(t, s, Eigen::VectorXd::Constant(60, 3.5));
    for (int i = 0; i < 10; ++i) CHECK(t.eval(boxes[0].sample(rng)).dot(p.coef) == doctest::Approx(3.5).epsilon(1e-10));

    for (int i = 0; i < 60; ++i) y[i] = rng.uniform(-5, 5);
    Eigen::MatrixXd X(60, t.size());
    for (int i = 0; i < 60; ++i) X.row(i) = t.eval(s[static_cast<std::size_t>(i)]).transpose();
    const Eigen::VectorXd ne = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((sieve_project(X, y).coef - ne).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sieve_project: rank deficiency") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 1, 2, 2, 3, 3, 4, 4;
    const Eigen::Vector4d y(1, 2, 3, 4);
    CHECK_THROWS_AS(sieve_project(X, y, false), NumericalError);
    const auto p = sieve_project(X, y, true, 1e-8);
    CHECK(p.used_fallback);
    CHECK(p.residual_rms < 1e-6);
    CHECK_THROWS_AS(sieve_project(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), ConfigError);
}

TEST_CASE("polar_train: T = 0 returns the uniform policy") {
    auto m = bandit();
    const std::vector<int> budgets{4};
    const auto pi = SoftmaxSievePolicy::with_budgets(m.spec(), budgets);
    PolarConfig cfg;
    cfg.T = 0;
    cfg.m = {8};
    const auto r = polar_train(m, pi, cfg);
    CHECK(r.trace.size() == 1);
    CHECK(r.policy.theta(1).isZero(0.0));
    CHECK(r.q_evaluations == 0);
}

TEST_CASE("polar_train: bandit follows the multiplicative-weights trajectory") {
    auto m = bandit();
    const std::vector<int> budgets{4};
    const auto pi = SoftmaxSievePolicy::with_budgets(m.spec(), budgets);
    for (auto mode : {EtaMode::Constant, EtaMode::Theoretical}) {
        PolarConfig cfg;
        cfg.T = 50;
        cfg.m = {8};
        cfg.eta_mode = mode;
        cfg.eta_constant = 0.1;
        const auto r = polar_train(m, pi, cfg);
        const double eta = step_sizes(m, cfg)[0];
        if (mode == EtaMode::Theoretical) CHECK(eta == doctest::Approx(std::sqrt(std::log(2.0)) / std::sqrt(50.0)));
        REQUIRE(r.trace.size() == 51);
        Rng rng(5);
        for (int t : {0, 1, 10, 50}) {
            const double want = 1.0 / (1.0 + std::exp(-eta * t));
            for (int i = 0; i < 5; ++i) {
                const auto h = History::initial(m.spec().box(1).sample(rng));
                CHECK(std::abs(r.trace[static_cast<std::size_t>(t)].policy->action_probs(1, h)[1] - want) < 1e-8);
            }
        }
        for (int i = 0; i < 20; ++i) CHECK(r.policy.action_probs(1, History::initial(m.spec().box(1).sample(rng)))[1] >= 0.9);
    }
}

TEST_CASE("polar_train: Q-evaluation count and trace layout") {
    const SimEnv env;
    const std::vector<RewardFn> rewards = env.reward_fns();
    StageModels st;
    for (int k = 1; k <= 3; ++k) {
        st.push_back(std::make_shared<toy::FixedStage>(
            k, [k](const History& h, int a) -> Eigen::VectorXd { return SimEnv::mean_next(k, a, h.states.back()); },
            env.noise(), 0.1, env.spec().box(k + 1)));
    }
    auto model = build_modified_model(env.spec(), st, rewards, {1.0}, 4,
                                      [b = env.spec().box(1)](Rng& r) { return b.sample(r); });
    const std::vector<int> budgets{4, 16, 16};
    const auto pi = SoftmaxSievePolicy::with_budgets(env.spec(), budgets);
    PolarConfig cfg;
    cfg.T = 2;
    cfg.m = {5, 16, 20};
    cfg.q_rollouts = 2;
    int hook_calls = 0;
    const auto r = polar_train(*model, pi, cfg, [&](int, const SoftmaxSievePolicy&) {
        ++hook_calls;
        return ValueEstimate{1.0, 0.0, 1};
    });
    CHECK(r.q_evaluations == 2L * (2 * 5 + 4 * 16 + 8 * 20));
    CHECK(hook_calls == 3);
    CHECK(r.trace.size() == 3);
    CHECK(r.trace[0].residual_rms.empty());
    CHECK(r.trace[2].residual_rms.size() == 3);
    CHECK(r.trace[1].value.has_value());
    History h = History::initial(Eigen::Vector2d(0.2, 0.9));
    CHECK(r.trace[0].policy->action_probs(1, h)[0] == 0.5);

    cfg.m = {3, 16, 20};
    CHECK_THROWS_AS(polar_train(*model, pi, cfg), ConfigError);
    cfg.m = {16, 16};
    CHECK_THROWS_AS(polar_train(*model, pi, cfg), ConfigError);
}

TEST_CASE("polar_train: bit-exact determinism across runs and thread counts") {
    const SimEnv env;
    StageModels st;
    for (int k = 1; k <= 3; ++k) {
        st.push_back(std::make_shared<toy::FixedStage>(
            k, [k](const History& h, int a) -> Eigen::VectorXd { return SimEnv::mean_next(k, a, h.states.back()); },
            env.noise(), 0.05, env.spec().box(k + 1)));
    }
    auto model = build_modified_model(env.spec(), st, env.reward_fns(), {2.0}, 4,
                                      [b = env.spec().box(1)](Rng& r) { return b.sample(r); });
    const std::vector<int> budgets{4, 16, 16};
    const auto pi = SoftmaxSievePolicy::with_budgets(env.spec(), budgets);
    PolarConfig cfg;
    cfg.T = 3;
    cfg.m = {8, 16, 16};
    cfg.q_rollouts = 3;
    cfg.seed = 99;
    const auto a = polar_train(*model, pi, cfg);
    const auto b = polar_train(*model, pi, cfg);
    cfg.threads = 3;
    const auto c = polar_train(*model, pi, cfg);
    cfg.threads = 1;
    cfg.seed = 100;
    const auto d = polar_train(*model, pi, cfg);
    for (int k = 1; k <= 3; ++k) {
        CHECK(a.policy.theta(k) == b.policy.theta(k));
        CHECK(a.policy.theta(k) == c.policy.theta(k));
    }
    CHECK(a.policy.theta(3) != d.policy.theta(3));
}

TEST_CASE("polar_train: errors carry iteration and stage context") {
    ThrowingModel m;
    const std::vector<int> budgets{2};
    const auto pi = SoftmaxSievePolicy::with_budgets(m.spec(), budgets);
    PolarConfig cfg;
    cfg.T = 1;
    cfg.m = {4};
    try {
        polar_train(m, pi, cfg);
        FAIL("expected an exception");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("iteration 0, stage 1") != std::string::npos);
    }
}

TEST_CASE("exact-Q sieve NPG on the tabular toy improves the value monotonically") {
    toy::Tabular m;
    auto pi = tabular_policy(m.spec());
    const double eta = 0.5;
    double prev = m.exact_value(pi);
    const std::vector<Eigen::VectorXd> s1{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
    for (int t = 0; t < 30; ++t) {
        auto next = pi;
        for (int k = 1; k <= 2; ++k) {
            Eigen::MatrixXd th(pi.basis(k).size(), pi.action_index(k).count());
            for (int b = 0; b < pi.action_index(k).count(); ++b) {
                const auto abar = pi.action_index(k).decode(b);
                std::vector<Eigen::VectorXd> pts;
                std::vector<double> q;
                for (int x1 = 0; x1 < 2; ++x1) {
                    if (k == 1) {
                        pts.push_back(s1[static_cast<std::size_t>(x1)]);
                        q.push_back(exact_q1(m, pi, x1, abar[0]));
                        continue;
                    }
                    for (int x2 = 0; x2 < 2; ++x2) {
                        pts.push_back(Eigen::Vector2d(x1, x2));
                        q.push_back(m.reward[1][static_cast<std::size_t>(x2)][static_cast<std::size_t>(abar[1])]);
                    }
                }
                const auto proj = sieve_project(pi.basis(k), pts, Eigen::Map<Eigen::VectorXd>(q.data(), long(q.size())));
                CHECK(proj.residual_rms < 1e-10);
                th.col(b) = proj.coef;
            }
            next = next.npg_update(k, th, eta);
        }
        pi = next;
        const double v = m.exact_value(pi);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    // converges towards the optimal deterministic policy
    double best = -1e300;
    for (int mask = 0; mask < 64; ++mask) {
        toy::FnPolicy det(2, [mask](int k, const History& h) {
            const int bit = k == 1 ? toy::Tabular::state(h) : 2 + 2 * h.actions[0] + toy::Tabular::state(h);
            const int a = (mask >> bit) & 1;
            return std::vector<double>{1.0 - a, double(a)};
        });
        best = std::max(best, m.exact_value(det));
    }
    CHECK(prev == doctest::Approx(best).epsilon(1e-3));
}
