#include "polar/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace polar {

NoiseSpec::NoiseSpec(Kind kind, int dim, double scale) : kind_(kind), dim_(dim), scale_(scale) {
    if (dim < 1) throw ConfigError("noise dimension must be positive");
    if (kind != Kind::Zero && !(scale > 0.0)) throw ConfigError("noise scale must be positive");
    const double root_d = std::sqrt(static_cast<double>(dim));
    switch (kind) {
        case Kind::Zero: sigma_ = 0.0; break;
        case Kind::Uniform:
        case Kind::ScaledBeta22: sigma_ = scale * root_d; break;
        case Kind::Gaussian: sigma_ = std::numeric_limits<double>::infinity(); break;
    }
}

NoiseSpec NoiseSpec::zero(int dim) { return NoiseSpec(Kind::Zero, dim, 0.0); }
NoiseSpec NoiseSpec::uniform(int dim, double half_width) { return NoiseSpec(Kind::Uniform, dim, half_width); }
NoiseSpec NoiseSpec::scaled_beta22(int dim, double half_width) { return NoiseSpec(Kind::ScaledBeta22, dim, half_width); }
NoiseSpec NoiseSpec::gaussian(int dim, double sd) { return NoiseSpec(Kind::Gaussian, dim, sd); }

NoiseSpec NoiseSpec::with_lipschitz(double c) const {
    NoiseSpec n = *this;
    n.lipschitz_ = c;
    return n;
}

NoiseSpec NoiseSpec::with_sigma(double s) const {
    NoiseSpec n = *this;
    n.sigma_ = s;
    return n;
}

Eigen::VectorXd NoiseSpec::sample(Rng& rng) const {
    Eigen::VectorXd e(dim_);
    for (int i = 0; i < dim_; ++i) {
        switch (kind_) {
            case Kind::Zero: e[i] = 0.0; break;
            case Kind::Uniform: e[i] = scale_ * (2.0 * rng.uniform() - 1.0); break;
            case Kind::ScaledBeta22: e[i] = scale_ * (2.0 * rng.beta22() - 1.0); break;
            case Kind::Gaussian: e[i] = scale_ * rng.normal(); break;
        }
    }
    return e;
}

double NoiseSpec::marginal_density(double e) const {
    const double h = scale_;
    switch (kind_) {
        case Kind::Zero: throw std::logic_error("zero noise has no density");
        case Kind::Uniform: return std::abs(e) <= h ? 0.5 / h : 0.0;
        case Kind::ScaledBeta22: return std::abs(e) <= h ? 0.75 * (h * h - e * e) / (h * h * h) : 0.0;
        case Kind::Gaussian: return std::exp(-0.5 * e * e / (h * h)) / (h * std::sqrt(2.0 * std::numbers::pi));
    }
    return 0.0;
}

double NoiseSpec::density(const Eigen::VectorXd& eps) const {
    if (eps.size() != dim_) throw ConfigError("noise dimension mismatch");
    double p = 1.0;
    for (int i = 0; i < dim_; ++i) p *= marginal_density(eps[i]);
    return p;
}

double NoiseSpec::quadrature_half_width() const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Uniform:
        case Kind::ScaledBeta22: return scale_;
        case Kind::Gaussian: return 8.0 * scale_;
    }
    return 0.0;
}

double NoiseSpec::density_lipschitz(int grid) const {
    if (!has_density()) throw std::logic_error("zero noise has no density");
    if (kind_ == Kind::Uniform) return std::numeric_limits<double>::infinity();
    if (dim_ > 3) throw ConfigError("density_lipschitz supports at most 3 dimensions");
    const double h = quadrature_half_width();
    auto deriv = [&](double e) {
        switch (kind_) {
            case Kind::ScaledBeta22: return std::abs(e) <= h ? -1.5 * e / (h * h * h) : 0.0;
            case Kind::Gaussian: return -e / (scale_ * scale_) * marginal_density(e);
            default: return 0.0;
        }
    };
    std::vector<double> f(static_cast<std::size_t>(grid));
    std::vector<double> df(static_cast<std::size_t>(grid));
    for (int i = 0; i < grid; ++i) {
        const double e = -h + 2.0 * h * i / (grid - 1);
        f[static_cast<std::size_t>(i)] = marginal_density(e);
        df[static_cast<std::size_t>(i)] = deriv(e);
    }
    double best = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(dim_), 0);
    long total = 1;
    for (int d = 0; d < dim_; ++d) total *= grid;
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int d = 0; d < dim_; ++d) {
            idx[static_cast<std::size_t>(d)] = static_cast<int>(rem % grid);
            rem /= grid;
        }
        double g2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            double term = df[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
            for (int o = 0; o < dim_; ++o) {
                if (o != d) term *= f[static_cast<std::size_t>(idx[static_cast<std::size_t>(o)])];
            }
            g2 += term * term;
        }
        best = std::max(best, std::sqrt(g2));
    }
    return best;
}

double l1_shift_distance(const NoiseSpec& noise, const Eigen::VectorXd& shift, int resolution) {
    if (!noise.has_density()) throw std::logic_error("L1 distance needs a noise density");
    if (shift.size() != noise.dim()) throw ConfigError("shift dimension mismatch");
    if (resolution < 2) throw ConfigError("quadrature resolution too small");
    const int d = noise.dim();
    const double h = noise.quadrature_half_width();
    if (noise.kind() != NoiseSpec::Kind::Gaussian) {
        for (int i = 0; i < d; ++i) {
            if (std::abs(shift[i]) >= 2.0 * h) return 2.0;
        }
    }
    if (shift.isZero(0.0)) return 0.0;
    // Integrate |f(y) - f(y - shift)| over the bounding box of both supports.
    std::vector<double> lo(static_cast<std::size_t>(d));
    std::vector<double> step(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> fa(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> fb(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const double a = std::min(-h, shift[i] - h);
        const double b = std::max(h, shift[i] + h);
        lo[static_cast<std::size_t>(i)] = a;
        step[static_cast<std::size_t>(i)] = (b - a) / resolution;
        auto& va = fa[static_cast<std::size_t>(i)];
        auto& vb = fb[static_cast<std::size_t>(i)];
        va.resize(static_cast<std::size_t>(resolution));
        vb.resize(static_cast<std::size_t>(resolution));
        for (int j = 0; j < resolution; ++j) {
            const double y = a + (j + 0.5) * step[static_cast<std::size_t>(i)];
            va[static_cast<std::size_t>(j)] = noise.marginal_density(y);
            vb[static_cast<std::size_t>(j)] = noise.marginal_density(y - shift[i]);
        }
    }
    double cell = 1.0;
    for (double s : step) cell *= s;
    long total = 1;
    for (int i = 0; i < d; ++i) total *= resolution;
    double acc = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        double pa = 1.0;
        double pb = 1.0;
        for (int i = 0; i < d; ++i) {
            const int j = static_cast<int>(rem % resolution);
            rem /= resolution;
            pa *= fa[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            pb *= fb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        acc += std::abs(pa - pb);
    }
    return acc * cell;
}

}  // namespace polar
