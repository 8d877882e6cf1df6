#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "polar/gp_transition.hpp"

using namespace polar;

TEST_CASE("gp: posterior matches the dense closed form on random problems") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = oracle::random_gp_problem(rng);
        const Kernel k{p.ls, p.sv};
        const auto post = gp_fit(p.X, p.Y, k, p.sigma);
        CHECK(post.jitter == 0.0);
        for (int q = 0; q < 5; ++q) {
            Eigen::VectorXd x(p.X.cols());
            for (Eigen::Index d = 0; d < x.size(); ++d) x[d] = rng.uniform(-0.2, 1.2);
            const auto got = gp_predict(post, x);
            const auto want = oracle::gp_dense(p.X, p.Y, p.ls, p.sv, p.sigma, x);
            CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
            CHECK(std::abs(got.variance - want.variance) < 1e-8);
        }
    }
}

TEST_CASE("gp: log-det term equals the naive determinant") {
    Rng rng(102);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = oracle::random_gp_problem(rng, 12);
        const Kernel k{p.ls, p.sv};
        const auto post = gp_fit(p.X, p.Y, k, p.sigma);
        const Eigen::MatrixXd M =
            Eigen::MatrixXd::Identity(p.X.rows(), p.X.rows()) + k.gram(p.X) / (p.sigma * p.sigma);
        CHECK(post.logdet_term == doctest::Approx(std::log(M.determinant())).epsilon(1e-9));
    }
}

TEST_CASE("gp: interpolation limit") {
    Eigen::MatrixXd X(5, 2);
    X << 0.1, 0.1, 0.9, 0.2, 0.5, 0.5, 0.2, 0.8, 0.8, 0.9;
    Eigen::MatrixXd Y(1, 5);
    Y << 0.3, -0.2, 1.0, 0.5, -0.7;
    const auto post = gp_fit(X, Y, Kernel::rbf(2, 0.3), 1e-8);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(gp_predict(post, X.row(i).transpose()).mean[0] - Y(0, i)) <= 1e-4);
}

TEST_CASE("gp: prior limit far from data") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
    X(1, 0) = 0.1;
    X(2, 0) = 0.2;
    const auto post = gp_fit(X, Eigen::MatrixXd::Ones(1, 3), Kernel::rbf(1, 0.1, 1.7), 0.2);
    const auto far = gp_predict(post, Eigen::VectorXd::Constant(1, 50.0));
    CHECK(far.variance == doctest::Approx(1.7));
    CHECK(far.mean[0] == doctest::Approx(0.0));
    const double beta = 3.0;
    CHECK(gamma_gp(post, Eigen::VectorXd::Constant(1, 50.0), beta) == doctest::Approx(beta * std::sqrt(1.7) / 0.2));
    GpPrediction zero;
    zero.variance = 0.0;
    CHECK(gamma_gp(zero, 0.2, beta) == 0.0);
}

TEST_CASE("gp: duplicate inputs factor, invalid arguments") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Constant(4, 1, 0.5);
    const auto post = gp_fit(X, Eigen::MatrixXd::Ones(1, 4), Kernel::rbf(1), 1e-9);
    CHECK(post.n() == 4);
    CHECK_THROWS_AS(gp_fit(X, Eigen::MatrixXd::Ones(1, 4), Kernel::rbf(1), 0.0), ConfigError);
    CHECK_THROWS_AS(gp_fit(X, Eigen::MatrixXd::Ones(1, 3), Kernel::rbf(1), 0.1), ConfigError);
}

TEST_CASE("beta_gp: hand evaluations") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(10, 1);
    for (int i = 0; i < 10; ++i) X(i, 0) = i;
    auto post = gp_fit(X, Eigen::MatrixXd::Zero(2, 10), Kernel::rbf(1), 0.5);
    post.logdet_term = 1.0;
    const double l = std::log(20.0 / 0.1);
    CHECK(beta_gp(post, 0.1) == doctest::Approx(std::sqrt(2.0 * (2.0 + 150.0 * l * l * l))));
    post.logdet_term = 0.0;
    CHECK(beta_gp(post, 0.1) == doctest::Approx(2.0));
    CHECK_THROWS_AS(beta_gp(post, 1.5), ConfigError);
}

TEST_CASE("gp: marginal likelihood matches the Gaussian density") {
    Rng rng(103);
    const auto p = oracle::random_gp_problem(rng, 10);
    const Kernel k{p.ls, p.sv};
    const auto post = gp_fit(p.X, p.Y, k, p.sigma);
    Eigen::MatrixXd A = k.gram(p.X);
    A.diagonal().array() += p.sigma * p.sigma;
    double want = 0.0;
    for (Eigen::Index d = 0; d < p.Y.rows(); ++d) {
        const Eigen::VectorXd y = p.Y.row(d).transpose();
        want += -0.5 * y.dot(A.inverse() * y) - 0.5 * std::log(A.determinant()) -
                0.5 * p.X.rows() * std::log(2 * std::acos(-1.0));
    }
    CHECK(gp_log_marginal_likelihood(post) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("gp: lengthscale grid picks the likelihood maximizer") {
    Rng rng(104);
    const int n = 40;
    Eigen::MatrixXd X(n, 2);
    Eigen::MatrixXd Y(1, n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.uniform();
        X(i, 1) = rng.uniform();
        Y(0, i) = std::sin(6.0 * X(i, 0)) + 0.05 * rng.normal();
    }
    const std::vector<double> grid{0.1, 0.3, 1.0, 3.0};
    const Kernel best = tune_lengthscales(X, Y, Kernel::rbf(2), 0.05, {0, 1}, grid);
    const double ll_best = gp_log_marginal_likelihood(gp_fit(X, Y, best, 0.05));
    for (double a : grid)
        for (double b : grid) {
            Kernel k = Kernel::rbf(2);
            k.lengthscales << a, b;
            CHECK(gp_log_marginal_likelihood(gp_fit(X, Y, k, 0.05)) <= ll_best + 1e-12);
        }
    CHECK(best.lengthscales[1] >= best.lengthscales[0]);
    CHECK_THROWS_AS(tune_lengthscales(X, Y, Kernel::rbf(2), 0.05, {0}, grid), ConfigError);
}

TEST_CASE("sample_next_gp: noise law and clipping") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 1);
    const auto post = gp_fit(X, Eigen::MatrixXd::Constant(1, 1, 0.5), Kernel::rbf(1), 0.1);
    const double m = gp_predict(post, Eigen::VectorXd::Zero(1)).mean[0];
    Rng rng(3);
    const Box wide({{-10.0, 10.0}});
    double s = 0.0, s2 = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        const double v = sample_next_gp(post, Eigen::VectorXd::Zero(1), wide, rng)[0] - m;
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / N) < 4 * 0.1 / std::sqrt(double(N)));
    CHECK(std::sqrt(s2 / N) == doctest::Approx(0.1).epsilon(0.03));
    const Box narrow({{0.0, 0.1}});
    CHECK(sample_next_gp(post, Eigen::VectorXd::Zero(1), narrow, rng)[0] <= 0.1);
}
