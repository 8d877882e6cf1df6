#pragma once

#include <Eigen/Dense>

#include "polar/core.hpp"

namespace polar {

/// Additive, zero-mean transition noise with i.i.d. coordinates.
///
/// `sigma` is the almost-sure l2 bound on the noise vector (infinite for
/// Gaussian noise) and `lipschitz` the constant C_L used by the linear
/// uncertainty quantifier; it defaults to 1 and can be overridden.
class NoiseSpec {
public:
    enum class Kind { Zero, Uniform, ScaledBeta22, Gaussian };

    static NoiseSpec zero(int dim);
    /// Uniform on [-half_width, half_width] per coordinate.
    static NoiseSpec uniform(int dim, double half_width);
    /// half_width * (2z - 1), z ~ Beta(2,2), per coordinate.
    static NoiseSpec scaled_beta22(int dim, double half_width);
    static NoiseSpec gaussian(int dim, double sd);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double scale() const { return scale_; }
    double sigma() const { return sigma_; }
    double lipschitz() const { return lipschitz_; }
    NoiseSpec with_lipschitz(double c) const;
    NoiseSpec with_sigma(double s) const;

    Eigen::VectorXd sample(Rng& rng) const;

    bool has_density() const { return kind_ != Kind::Zero; }
    /// Joint density at eps; throws for Zero noise.
    double density(const Eigen::VectorXd& eps) const;
    double marginal_density(double e) const;
    /// Half-width of the per-coordinate integration range (support, or 8 sd
    /// for Gaussian noise).
    double quadrature_half_width() const;

    /// Lipschitz constant of the joint density, by grid search over its
    /// support (dim <= 3).
    double density_lipschitz(int grid = 201) const;

private:
    NoiseSpec(Kind kind, int dim, double scale);

    Kind kind_;
    int dim_;
    double scale_;
    double sigma_;
    double lipschitz_ = 1.0;
};

/// L1 distance between the noise density and its translate by `shift`,
/// i.e. ||P_a - P_b||_1 for two models sharing the noise and with means
/// differing by `shift`. Midpoint quadrature with `resolution` cells per
/// coordinate over the union of the two supports.
double l1_shift_distance(const NoiseSpec& noise, const Eigen::VectorXd& shift, int resolution = 200);

}  // namespace polar
