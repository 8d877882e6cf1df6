#include "polar/linear_transition.hpp"

#include <cmath>
#include <numbers>

namespace polar {

Eigen::MatrixXd LinearTransitionEstimate::W_hat() const {
    Eigen::MatrixXd W(out_dim, feature_dim());
    for (int b = 0; b < num_blocks; ++b) W.middleCols(static_cast<Eigen::Index>(b) * block_size, block_size) = W_block(b);
    return W;
}

Eigen::MatrixXd LinearTransitionEstimate::Lambda() const {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(feature_dim(), feature_dim());
    for (int b = 0; b < num_blocks; ++b) {
        const Eigen::Index off = static_cast<Eigen::Index>(b) * block_size;
        L.block(off, off, block_size, block_size) = Lambda_block(b);
    }
    return L;
}

Eigen::VectorXd LinearTransitionEstimate::mean(const BlockFeature& phi) const {
    if (phi.block_size() != block_size || phi.num_blocks != num_blocks) throw ConfigError("feature shape mismatch");
    return W_block(phi.block) * phi.upsilon;
}

double LinearTransitionEstimate::quad_form(const BlockFeature& phi) const {
    if (phi.block_size() != block_size || phi.num_blocks != num_blocks) throw ConfigError("feature shape mismatch");
    const auto& llt = chol_blocks_[static_cast<std::size_t>(phi.block)];
    Eigen::VectorXd v = llt.matrixL().solve(phi.upsilon);
    return v.squaredNorm();
}

double LinearTransitionEstimate::log_det_Lambda() const {
    double acc = 0.0;
    for (const auto& llt : chol_blocks_) {
        const auto& L = llt.matrixLLT();
        for (Eigen::Index i = 0; i < L.rows(); ++i) acc += 2.0 * std::log(L(i, i));
    }
    return acc;
}

double LinearTransitionEstimate::spectral_norm() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W_hat());
    return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

LinearTransitionEstimate fit_ridge(std::span<const BlockFeature> features, const Eigen::MatrixXd& next_states,
                                   double lambda_reg, const NoiseSpec& noise, int block_size, int num_blocks) {
    if (lambda_reg < 0.0) throw ConfigError("ridge parameter must be non-negative");
    if (static_cast<Eigen::Index>(features.size()) != next_states.rows()) {
        throw ConfigError("feature and next-state counts differ");
    }
    LinearTransitionEstimate est;
    est.out_dim = static_cast<int>(next_states.cols());
    est.block_size = block_size;
    est.num_blocks = num_blocks;
    est.lambda_reg = lambda_reg;
    est.n_samples = static_cast<long>(features.size());
    est.noise = noise;

    std::vector<Eigen::MatrixXd> gram(static_cast<std::size_t>(num_blocks),
                                      Eigen::MatrixXd::Zero(block_size, block_size));
    std::vector<Eigen::MatrixXd> cross(static_cast<std::size_t>(num_blocks),
                                       Eigen::MatrixXd::Zero(est.out_dim, block_size));
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        if (f.block_size() != block_size || f.num_blocks != num_blocks) throw ConfigError("feature shape mismatch");
        auto b = static_cast<std::size_t>(f.block);
        gram[b].selfadjointView<Eigen::Lower>().rankUpdate(f.upsilon);
        cross[b].noalias() += next_states.row(static_cast<Eigen::Index>(i)).transpose() * f.upsilon.transpose();
    }
    for (int b = 0; b < num_blocks; ++b) {
        auto& G = gram[static_cast<std::size_t>(b)];
        G = G.selfadjointView<Eigen::Lower>();
        G.diagonal().array() += lambda_reg;
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("ridge system is singular (lambda = 0 with rank-deficient design?)");
        }
        // Ŵ_b = C_b Λ_b^{-1}  <=>  Λ_b Ŵ_b^T = C_b^T
        Eigen::MatrixXd Wt = llt.solve(cross[static_cast<std::size_t>(b)].transpose());
        est.w_blocks_.push_back(Wt.transpose());
        est.lambda_blocks_.push_back(G);
        est.chol_blocks_.push_back(std::move(llt));
    }
    return est;
}

LinearTransitionEstimate fit_ridge_dense(const Eigen::MatrixXd& features, const Eigen::MatrixXd& next_states,
                                         double lambda_reg, const NoiseSpec& noise) {
    std::vector<BlockFeature> rows;
    rows.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        BlockFeature f;
        f.upsilon = features.row(i).transpose();
        rows.push_back(std::move(f));
    }
    return fit_ridge(rows, next_states, lambda_reg, noise, static_cast<int>(features.cols()), 1);
}

void GammaLinearParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (w_star_norm_bound && *w_star_norm_bound < 0.0) throw ConfigError("weight norm bound must be non-negative");
    if (unit_ball_volume && *unit_ball_volume < 0.0) throw ConfigError("unit ball volume must be non-negative");
}

double unit_ball_volume(int d) {
    const double half = 0.5 * d;
    return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

double beta_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params) {
    params.validate();
    if (!(est.lambda_reg > 0.0)) throw NumericalError("beta needs lambda > 0 (det(lambda I) = 0)");
    const double sigma = est.noise.sigma();
    const double s2 = sigma * sigma;
    const double d = est.out_dim;
    const double w_norm = params.w_star_norm_bound.value_or(est.spectral_norm());
    // log(det(Λ)^{1/2} / det(λI)^{1/2} / δ)
    const double log_ratio = 0.5 * est.log_det_Lambda() - 0.5 * est.feature_dim() * std::log(est.lambda_reg) -
                             std::log(params.delta);
    const double inner = 8.0 * s2 * d * std::log(5.0) + 8.0 * s2 * log_ratio;
    return std::sqrt(est.lambda_reg) * w_norm + std::sqrt(std::max(0.0, inner));
}

double gamma_constant_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params) {
    if (params.scale == PenaltyScale::Folded) return 1.0;
    const double ball = params.unit_ball_volume.value_or(unit_ball_volume(est.out_dim));
    return ball * est.noise.sigma() * est.noise.lipschitz() * beta_linear(est, params);
}

double gamma_linear_with_constant(const LinearTransitionEstimate& est, double c2, const BlockFeature& phi) {
    const double q = est.quad_form(phi);
    return std::min(2.0, 2.0 * c2 * std::sqrt(std::max(0.0, q)));
}

double gamma_linear(const LinearTransitionEstimate& est, const GammaLinearParams& params, const BlockFeature& phi) {
    return gamma_linear_with_constant(est, gamma_constant_linear(est, params), phi);
}

Eigen::VectorXd sample_next_linear(const LinearTransitionEstimate& est, const BlockFeature& phi, const Box& next_box,
                                   Rng& rng) {
    Eigen::VectorXd s = est.mean(phi);
    s += est.noise.sample(rng);
    return next_box.clip(s);
}

double l1_distance_linear(const Eigen::MatrixXd& W_a, const Eigen::MatrixXd& W_b, const Eigen::VectorXd& phi,
                          const NoiseSpec& noise, int resolution) {
    if (W_a.cols() != phi.size() || W_b.cols() != phi.size() || W_a.rows() != W_b.rows()) {
        throw ConfigError("weight/feature dimension mismatch");
    }
    const Eigen::VectorXd shift = (W_b - W_a) * phi;
    return l1_shift_distance(noise, shift, resolution);
}

}  // namespace polar
