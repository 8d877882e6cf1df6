#pragma once

#include <Eigen/Dense>

#include <vector>

#include "polar/core.hpp"
#include "polar/linear_transition.hpp"

namespace polar {

/// Squared-exponential kernel with one lengthscale per input dimension.
struct Kernel {
    Eigen::VectorXd lengthscales;
    double signal_variance = 1.0;

    static Kernel rbf(int input_dim, double lengthscale = 1.0, double signal_variance = 1.0);
    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    Eigen::MatrixXd gram(const Eigen::MatrixXd& X) const;
    /// (k(x_1, x), ..., k(x_n, x)).
    Eigen::VectorXd cross(const Eigen::MatrixXd& X, const Eigen::VectorXd& x) const;
};

/// Exact GP posterior for multi-output regression with a shared kernel and
/// isotropic noise σ²I. Outputs are independent given the kernel.
struct GpPosterior {
    int stage = 1;
    Eigen::MatrixXd X;  // n x input_dim
    Eigen::MatrixXd Y;  // out_dim x n
    Kernel kernel;
    double sigma = 0.1;
    Eigen::LLT<Eigen::MatrixXd> chol;  // of H + (σ² + jitter) I
    Eigen::MatrixXd alpha;             // n x out_dim, (H + σ²I)^{-1} Y^T
    double logdet_term = 0.0;          // log det(I + H/σ²)
    double jitter = 0.0;

    int n() const { return static_cast<int>(X.rows()); }
    int out_dim() const { return static_cast<int>(Y.rows()); }
    int input_dim() const { return static_cast<int>(X.cols()); }
};

struct GpPrediction {
    Eigen::VectorXd mean;
    double variance = 0.0;
};

/// Factors H + σ²I once, escalating jitter 1e-10 -> 1e-6 on Cholesky failure.
GpPosterior gp_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Kernel& kernel, double sigma);

/// Posterior mean and shared scalar variance ĥ(x, x), clamped at 0.
GpPrediction gp_predict(const GpPosterior& post, const Eigen::VectorXd& x);

/// Log marginal likelihood summed over independent outputs.
double gp_log_marginal_likelihood(const GpPosterior& post);

/// β = sqrt(d(2 + 150 log³(d n / δ) log det(I + H/σ²))).
double beta_gp(const GpPosterior& post, double delta);

/// Γ(x) = β/σ · sqrt(ĥ(x, x)).
double gamma_gp(const GpPosterior& post, const Eigen::VectorXd& x, double beta);
double gamma_gp(const GpPrediction& pred, double sigma, double beta);

/// Posterior mean + N(0, σ²I), clipped to `next_box`.
Eigen::VectorXd sample_next_gp(const GpPosterior& post, const Eigen::VectorXd& x, const Box& next_box, Rng& rng);

/// Grid search over per-group lengthscale values maximizing the marginal
/// likelihood. `groups[i]` assigns input dimension i to a group; each group
/// takes every value of `grid`.
Kernel tune_lengthscales(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Kernel& base, double sigma,
                         const std::vector<int>& groups, const std::vector<double>& grid);

}  // namespace polar
