#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "polar/basis.hpp"
#include "polar/noise.hpp"

namespace polar {

/// How the constant C_2 in front of the quadratic form is obtained.
enum class PenaltyScale {
    /// Full high-probability constant (unit-ball volume, sigma, C_L, beta).
    Theoretical,
    /// Constant set to 1; all unknown constants are absorbed by the penalty
    /// multiplier c.
    Folded,
};

/// Ridge estimate of s' = W φ + ε for block-structured features.
///
/// Because every φ is supported on a single action-history block, both the
/// Gram matrix Λ = Σ φφ^T + λI and Ŵ decompose block by block; the dense
/// accessors assemble the full matrices in block-major layout.
class LinearTransitionEstimate {
public:
    int stage = 1;
    int out_dim = 0;
    int block_size = 0;
    int num_blocks = 1;
    double lambda_reg = 1.0;
    long n_samples = 0;
    NoiseSpec noise = NoiseSpec::zero(1);

    int feature_dim() const { return block_size * num_blocks; }

    /// Ŵ, out_dim x feature_dim.
    Eigen::MatrixXd W_hat() const;
    /// Λ, feature_dim x feature_dim.
    Eigen::MatrixXd Lambda() const;
    const Eigen::MatrixXd& W_block(int b) const { return w_blocks_[static_cast<std::size_t>(b)]; }
    const Eigen::MatrixXd& Lambda_block(int b) const { return lambda_blocks_[static_cast<std::size_t>(b)]; }

    /// Ŵφ.
    Eigen::VectorXd mean(const BlockFeature& phi) const;
    /// φ^T Λ^{-1} φ by Cholesky solve.
    double quad_form(const BlockFeature& phi) const;
    /// log det Λ.
    double log_det_Lambda() const;
    /// ||Ŵ||_2.
    double spectral_norm() const;

private:
    friend LinearTransitionEstimate fit_ridge(std::span<const BlockFeature>, const Eigen::MatrixXd&, double,
                                              const NoiseSpec&, int, int);
    std::vector<Eigen::MatrixXd> w_blocks_;
    std::vector<Eigen::MatrixXd> lambda_blocks_;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol_blocks_;
};

/// Ŵ = (Σ s' φ^T)(Σ φφ^T + λI)^{-1}. `next_states` is n x out_dim. With
/// lambda_reg = 0 every block must be full rank, else NumericalError.
LinearTransitionEstimate fit_ridge(std::span<const BlockFeature> features, const Eigen::MatrixXd& next_states,
                                   double lambda_reg, const NoiseSpec& noise, int block_size, int num_blocks);

/// Dense-feature convenience: every row of `features` is one φ (single block).
LinearTransitionEstimate fit_ridge_dense(const Eigen::MatrixXd& features, const Eigen::MatrixXd& next_states,
                                         double lambda_reg, const NoiseSpec& noise);

struct GammaLinearParams {
    double delta = 0.1;
    /// Stand-in for ||W*||_2; the plug-in ||Ŵ||_2 is used when unset.
    std::optional<double> w_star_norm_bound;
    /// Volume of the unit ball in R^{out_dim}; computed when unset.
    std::optional<double> unit_ball_volume;
    PenaltyScale scale = PenaltyScale::Theoretical;

    void validate() const;
};

/// Lebesgue volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// β = √λ·||W*||_2 + sqrt(8σ²d·log 5 + 8σ²·log(det(Λ)^{1/2} / det(λI)^{1/2} / δ)).
double beta_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params);

/// C_2 = B_d σ C_L β (Theoretical) or 1 (Folded).
double gamma_constant_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params);

/// Γ = min{2, 2 C_2 sqrt(φ^T Λ^{-1} φ)}.
double gamma_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params, const BlockFeature& phi);
double gamma_linear_with_constant(const LinearTransitionEstimate& est, double c2, const BlockFeature& phi);

/// Ŵφ + ε clipped to `next_box`.
Eigen::VectorXd sample_next_linear(const LinearTransitionEstimate& est, const BlockFeature& phi, const Box& next_box,
                                   Rng& rng);

/// ||P_a(.|φ) - P_b(.|φ)||_1 for two linear models sharing `noise`.
double l1_distance_linear(const Eigen::MatrixXd& W_a, const Eigen::MatrixXd& W_b, const Eigen::VectorXd& phi,
                          const NoiseSpec& noise, int resolution = 200);

}  // namespace polar
