#include "polar/gp_transition.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace polar {

Kernel Kernel::rbf(int input_dim, double lengthscale, double signal_variance) {
    if (!(lengthscale > 0.0) || !(signal_variance > 0.0)) throw ConfigError("kernel parameters must be positive");
    return Kernel{Eigen::VectorXd::Constant(input_dim, lengthscale), signal_variance};
}

double Kernel::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const double r2 = ((x - y).array() / lengthscales.array()).square().sum();
    return signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd Kernel::gram(const Eigen::MatrixXd& X) const {
    const Eigen::Index n = X.rows();
    const Eigen::MatrixXd Z = X.array().rowwise() / lengthscales.transpose().array();
    const Eigen::VectorXd sq = Z.rowwise().squaredNorm();
    Eigen::MatrixXd H = -2.0 * Z * Z.transpose();
    H.colwise() += sq;
    H.rowwise() += sq.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        H(i, i) = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) H(i, j) = signal_variance * std::exp(-0.5 * std::max(0.0, H(i, j)));
    }
    return H;
}

Eigen::VectorXd Kernel::cross(const Eigen::MatrixXd& X, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(X.rows());
    const Eigen::ArrayXd inv = lengthscales.array().inverse();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double r2 = ((X.row(i).transpose().array() - x.array()) * inv).square().sum();
        out[i] = signal_variance * std::exp(-0.5 * r2);
    }
    return out;
}

GpPosterior gp_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Kernel& kernel, double sigma) {
    if (X.rows() < 1) throw ConfigError("GP needs at least one training point");
    if (!(sigma > 0.0)) throw ConfigError("GP noise sigma must be positive");
    if (Y.cols() != X.rows()) throw ConfigError("GP outputs must be out_dim x n");
    if (kernel.lengthscales.size() != X.cols()) throw ConfigError("kernel lengthscale count must match input dim");

    GpPosterior post;
    post.X = X;
    post.Y = Y;
    post.kernel = kernel;
    post.sigma = sigma;
    const Eigen::MatrixXd H = kernel.gram(X);
    const double s2 = sigma * sigma;
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd A = H;
        A.diagonal().array() += s2 + jitter;
        post.chol.compute(A);
        if (post.chol.info() == Eigen::Success) break;
        if (attempt == 0) {
            jitter = 1e-10;
        } else if (jitter < 1e-6) {
            jitter *= 10.0;
        } else {
            throw NumericalError("GP Cholesky failed after jitter escalation");
        }
    }
    post.jitter = jitter;
    post.alpha = post.chol.solve(Y.transpose());
    const auto& L = post.chol.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
    post.logdet_term = logdet - static_cast<double>(X.rows()) * std::log(s2);
    return post;
}

GpPrediction gp_predict(const GpPosterior& post, const Eigen::VectorXd& x) {
    if (x.size() != post.input_dim()) throw ConfigError("GP query dimension mismatch");
    const Eigen::VectorXd k = post.kernel.cross(post.X, x);
    GpPrediction out;
    out.mean = post.alpha.transpose() * k;
    const Eigen::VectorXd v = post.chol.matrixL().solve(k);
    out.variance = std::max(0.0, post.kernel.signal_variance - v.squaredNorm());
    return out;
}

double gp_log_marginal_likelihood(const GpPosterior& post) {
    const double n = post.n();
    const auto& L = post.chol.matrixLLT();
    double half_logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) half_logdet += std::log(L(i, i));
    double acc = 0.0;
    for (int d = 0; d < post.out_dim(); ++d) {
        acc += -0.5 * post.Y.row(d).dot(post.alpha.col(d)) - half_logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }
    return acc;
}

double beta_gp(const GpPosterior& post, double delta) {
    if (post.n() < 1) throw ConfigError("beta_gp needs a fitted posterior");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    const double d = post.out_dim();
    const double l = std::log(d * post.n() / delta);
    return std::sqrt(d * (2.0 + 150.0 * l * l * l * post.logdet_term));
}

double gamma_gp(const GpPrediction& pred, double sigma, double beta) { return beta / sigma * std::sqrt(pred.variance); }

double gamma_gp(const GpPosterior& post, const Eigen::VectorXd& x, double beta) {
    return gamma_gp(gp_predict(post, x), post.sigma, beta);
}

Eigen::VectorXd sample_next_gp(const GpPosterior& post, const Eigen::VectorXd& x, const Box& next_box, Rng& rng) {
    Eigen::VectorXd s = gp_predict(post, x).mean;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += post.sigma * rng.normal();
    return next_box.clip(s);
}

Kernel tune_lengthscales(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Kernel& base, double sigma,
                         const std::vector<int>& groups, const std::vector<double>& grid) {
    if (static_cast<Eigen::Index>(groups.size()) != X.cols()) throw ConfigError("one group label per input dim");
    if (grid.empty()) return base;
    int n_groups = 0;
    for (int g : groups) n_groups = std::max(n_groups, g + 1);
    long combos = 1;
    for (int g = 0; g < n_groups; ++g) combos *= static_cast<long>(grid.size());

    Kernel best = base;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < combos; ++c) {
        Kernel k = base;
        long rem = c;
        std::vector<double> value(static_cast<std::size_t>(n_groups));
        for (int g = 0; g < n_groups; ++g) {
            value[static_cast<std::size_t>(g)] = grid[static_cast<std::size_t>(rem % static_cast<long>(grid.size()))];
            rem /= static_cast<long>(grid.size());
        }
        for (std::size_t i = 0; i < groups.size(); ++i) {
            k.lengthscales[static_cast<Eigen::Index>(i)] = value[static_cast<std::size_t>(groups[i])];
        }
        const double ll = gp_log_marginal_likelihood(gp_fit(X, Y, k, sigma));
        if (ll > best_ll) {
            best_ll = ll;
            best = k;
        }
    }
    return best;
}

}  // namespace polar
