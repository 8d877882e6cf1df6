#include "doctest.h"

#include <cmath>

#include "polar/baselines.hpp"
#include "polar/pessimism.hpp"
#include "polar/simenv.hpp"
#include "toy_models.hpp"

using namespace polar;

namespace {

// P̂ equal to the true simenv dynamics with a constant Γ.
StageModels true_stages(const SimEnv& env, double gamma) {
    StageModels out;
    for (int k = 1; k <= 3; ++k) {
        out.push_back(std::make_shared<toy::FixedStage>(
            k, [k](const History& h, int a) -> Eigen::VectorXd { return SimEnv::mean_next(k, a, h.states.back()); },
            env.noise(), gamma, env.spec().box(k + 1)));
    }
    return out;
}

std::function<Eigen::VectorXd(Rng&)> simenv_initial(const SimEnv& env) {
    return [box = env.spec().box(1)](Rng& rng) { return box.sample(rng); };
}

OfflineDataset uniform_data(const SimEnv& env, long n, std::uint64_t seed) {
    toy::FnPolicy pi(3, [](int, const History&) { return std::vector<double>{0.5, 0.5}; });
    return generate_offline_dataset(env, pi, n, 0.5, seed, SimEnv::kVersion);
}

}  // namespace

TEST_CASE("modified_reward: arithmetic and argument checks") {
    CHECK(modified_reward(1.3, 0.7, 0.0) == 1.3);
    CHECK(modified_reward(1.0, 0.5, 2.0) == 0.0);
    CHECK(modified_reward(1.0, 2.0, 50.0) == -99.0);
    CHECK_THROWS_AS(modified_reward(1.0, 0.5, -1.0), ConfigError);
    CHECK_THROWS_AS(modified_reward(1.0, -0.5, 1.0), ConfigError);
}

TEST_CASE("estimate_reward: constant, linear and the simenv terminal reward") {
    const SimEnv env;
    auto stages = true_stages(env, 0.0);
    History h = History::initial(Eigen::Vector2d(0.3, 0.6));
    Rng rng(1);
    for (int m : {1, 7, 100}) CHECK(estimate_reward(*stages[0], RewardFn::constant(2.5), h, 1, m, rng) == 2.5);
    CHECK(estimate_reward(*stages[0], RewardFn::zero(), h, 1, 5, rng) == 0.0);
    CHECK_THROWS_AS(estimate_reward(*stages[0], RewardFn::constant(1.0), h, 1, 0, rng), ConfigError);

    RewardFn lin;
    lin.fn = [](const History&, int, const Eigen::VectorXd& s) { return s[0] + 2.0 * s[1]; };
    lin.sup_norm = 10.0;
    const int m = 20000;
    const Eigen::Vector2d mu = SimEnv::mean_next(1, 1, h.states[0]);
    const double est = estimate_reward(*stages[0], lin, h, 1, m, rng);
    // per-draw sd: sqrt(var(e1) + 4 var(e2)), var of 0.8(z - 1/2) is 0.64/20
    const double sd = std::sqrt(5.0 * 0.64 / 20.0);
    CHECK(std::abs(est - (mu[0] + 2.0 * mu[1])) < 3.0 * sd / std::sqrt(double(m)));

    const SimEnv det(0.0);
    toy::FixedStage zero3(
        3, [](const History&, int) -> Eigen::VectorXd { return Eigen::Vector2d::Zero(); }, det.noise(), 0.0,
        det.spec().box(4));
    History h3 = History::initial(Eigen::Vector2d::Zero());
    h3.push(0, Eigen::Vector2d::Zero());
    h3.push(0, Eigen::Vector2d::Zero());
    CHECK(estimate_reward(zero3, det.reward_fns()[2], h3, 0, 3, rng) == doctest::Approx(6.194).epsilon(1e-12));
}

TEST_CASE("modified model with true dynamics and c = 0 reproduces the true value") {
    const SimEnv env;
    auto m = build_modified_model(env.spec(), true_stages(env, 0.3), env.reward_fns(), {0.0}, 8, simenv_initial(env));
    toy::FnPolicy pi(3, [](int k, const History& h) {
        const double x = h.states.back()[0];
        return k == 2 ? std::vector<double>{0.2, 0.8} : std::vector<double>{x > 0.5 ? 0.9 : 0.1, x > 0.5 ? 0.1 : 0.9};
    });
    const auto a = value_mc(env, pi, 20000, Rng(5));
    const auto b = value_mc(*m, pi, 20000, Rng(6));
    CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("modified model: value is non-increasing in c under common random numbers") {
    const SimEnv env;
    const auto data = uniform_data(env, 100, 3);
    TransitionConfig cfg;
    cfg.basis_per_dim = 2;
    cfg.basis_max_degree = 1;
    const auto stages = fit_transition_models(env.spec(), data.trajectories, cfg, env.noise(), Rng(1));
    toy::FnPolicy pi(3, [](int, const History& h) {
        const double x = h.states.back()[1];
        return std::vector<double>{x, 1.0 - x};
    });
    double prev = 1e300;
    for (double c : {0.0, 1.0, 5.0, 50.0}) {
        auto m = build_modified_model(env.spec(), stages, env.reward_fns(), {c}, 4, simenv_initial(env));
        const double v = value_mc(*m, pi, 2000, Rng(77)).mean;
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("modified model: reward bound, gamma and per-stage penalties") {
    const SimEnv env;
    auto m = build_modified_model(env.spec(), true_stages(env, 0.25), env.reward_fns(), {1.0, 2.0, 3.0}, 4,
                                  simenv_initial(env));
    History h = History::initial(Eigen::Vector2d(0.5, 0.5));
    CHECK(m->penalty(2) == 2.0);
    CHECK(m->gamma(1, h, 0) == 0.25);
    CHECK(m->reward_bound(1) == doctest::Approx(0.25));
    CHECK(m->reward_bound(3) == doctest::Approx(env.reward_bound(3) + 0.75));
    Rng rng(2);
    CHECK(m->expected_reward(1, h, 0, rng) == doctest::Approx(-0.25));
    CHECK(m->realized_reward(1, h, 0, Eigen::Vector2d::Zero()) == doctest::Approx(-0.25));
    auto z = build_modified_model(env.spec(), true_stages(env, 0.25), env.reward_fns(), {0.0}, 4, simenv_initial(env));
    CHECK(z->gamma(1, h, 0) == 0.0);

    CHECK_THROWS_AS(build_modified_model(env.spec(), true_stages(env, 0.1), env.reward_fns(), {1.0, 2.0}, 4,
                                         simenv_initial(env)),
                    ConfigError);
    CHECK_THROWS_AS(
        build_modified_model(env.spec(), true_stages(env, 0.1), env.reward_fns(), {-1.0}, 4, simenv_initial(env)),
        ConfigError);
    auto stages = true_stages(env, 0.1);
    std::swap(stages[0], stages[1]);
    CHECK_THROWS_AS(build_modified_model(env.spec(), stages, env.reward_fns(), {1.0}, 4, simenv_initial(env)),
                    ConfigError);
}

TEST_CASE("theoretical penalties are suffix sums of reward sup-norms") {
    const std::vector<RewardFn> r{RewardFn::constant(1.0), RewardFn::zero(), RewardFn::constant(-3.0)};
    CHECK(theoretical_penalties(r) == std::vector<double>{4.0, 3.0, 3.0});
}

TEST_CASE("linear fit on simenv: gamma in [0, 2] and consistency of W") {
    const SimEnv env;
    TransitionConfig cfg;
    cfg.basis_per_dim = 2;
    cfg.basis_max_degree = 1;
    cfg.lambda_reg = 1e-3;
    const auto data = uniform_data(env, 20000, 9);
    const auto stages = fit_transition_models(env.spec(), data.trajectories, cfg, env.noise(), Rng(1));
    REQUIRE(stages.size() == 3);
    for (int k = 1; k <= 3; ++k) {
        const auto& lin = dynamic_cast<const LinearStageModel&>(*stages[static_cast<std::size_t>(k - 1)]);
        const Eigen::MatrixXd Wstar = env.true_weight(lin.features());
        // later stages carry sparsely visited corners of the history cube
        if (k == 1) CHECK((lin.estimate().W_hat() - Wstar).cwiseAbs().maxCoeff() < 0.05);
        Rng rng(k);
        double se = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const auto& t = data.trajectories[static_cast<std::size_t>(i)];
            const History h = t.history(k);
            const double g = lin.gamma(h, rng.uniform_int(2));
            CHECK(g >= 0.0);
            CHECK(g <= 2.0);
            const int a = t.actions[static_cast<std::size_t>(k - 1)];
            se += (lin.mean(h, a) - SimEnv::mean_next(k, a, h.states.back())).squaredNorm();
        }
        CHECK(std::sqrt(se / 2000) < 0.05);
    }
}

TEST_CASE("linear fit: theoretical scale gives a larger constant than folded") {
    const SimEnv env;
    const auto data = uniform_data(env, 200, 4);
    TransitionConfig folded;
    TransitionConfig theo;
    theo.scale = PenaltyScale::Theoretical;
    const auto a = fit_transition_models(env.spec(), data.trajectories, folded, env.noise(), Rng(1));
    const auto b = fit_transition_models(env.spec(), data.trajectories, theo, env.noise(), Rng(1));
    CHECK(dynamic_cast<const LinearStageModel&>(*a[0]).c2() == 1.0);
    CHECK(dynamic_cast<const LinearStageModel&>(*b[0]).c2() > 1.0);
}

TEST_CASE("gp encoder: rescaled states and one-hot action history") {
    const SimEnv env;
    GpInputEncoder enc(env.spec(), 2);
    CHECK(enc.dim() == 4 + 4);
    History h = History::initial(Eigen::Vector2d(0.0, 1.0));
    h.push(1, env.spec().box(2).clip(Eigen::Vector2d(-5.0, 5.0)));
    const Eigen::VectorXd x = enc(h, 0);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == 1.0);
    CHECK(x[2] == 0.0);
    CHECK(x[3] == 1.0);
    CHECK(x.tail(4) == Eigen::Vector4d(0, 0, 1, 0));
    CHECK(enc.groups() == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK_THROWS_AS(enc(History::initial(Eigen::Vector2d::Zero()), 0), ConfigError);
}

TEST_CASE("gp fit on simenv: mean close to truth, gamma within its bound") {
    const SimEnv env;
    TransitionConfig cfg;
    cfg.kind = TransitionKind::Gp;
    cfg.gp_sigma = 0.18;
    const auto data = uniform_data(env, 300, 12);
    const auto stages = fit_transition_models(env.spec(), data.trajectories, cfg, env.noise(), Rng(3));
    const auto& gp = dynamic_cast<const GpStageModel&>(*stages[0]);
    CHECK(gp.beta() == 1.0);
    Rng rng(8);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const History h = History::initial(env.spec().box(1).sample(rng));
        const int a = rng.uniform_int(2);
        worst = std::max(worst, (gp.mean(h, a) - SimEnv::mean_next(1, a, h.states[0])).cwiseAbs().maxCoeff());
        const double g = gp.gamma(h, a);
        CHECK(g >= 0.0);
        CHECK(g <= gp.gamma_bound() + 1e-12);
    }
    CHECK(worst < 0.1);

    cfg.scale = PenaltyScale::Theoretical;
    cfg.gp_n_max = 50;
    const auto sub = fit_transition_models(env.spec(), data.trajectories, cfg, env.noise(), Rng(3));
    const auto& gp2 = dynamic_cast<const GpStageModel&>(*sub[0]);
    CHECK(gp2.posterior().n() == 50);
    CHECK(gp2.beta() == doctest::Approx(beta_gp(gp2.posterior(), 0.1)));
}

TEST_CASE("fit_transition_models: argument checks") {
    const SimEnv env;
    TransitionConfig cfg;
    cfg.delta = 1.5;
    CHECK_THROWS_AS(fit_transition_models(env.spec(), {}, cfg, env.noise(), Rng(1)), ConfigError);
    cfg = TransitionConfig{};
    cfg.kind = TransitionKind::Gp;
    CHECK_THROWS_AS(fit_transition_models(env.spec(), {}, cfg, env.noise(), Rng(1)), DataError);
    std::vector<Trajectory> bad(1);
    bad[0].actions = {0};
    bad[0].states = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    bad[0].rewards = {0.0};
    CHECK_THROWS_AS(fit_transition_models(env.spec(), bad, TransitionConfig{}, env.noise(), Rng(1)), DataError);
    // no data: ridge prior only
    const auto empty = fit_transition_models(env.spec(), {}, TransitionConfig{}, env.noise(), Rng(1));
    CHECK(dynamic_cast<const LinearStageModel&>(*empty[0]).estimate().W_hat().isZero(0.0));
}
