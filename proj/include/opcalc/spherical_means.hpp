#pragma once

#include "opcalc/core.hpp"
#include "opcalc/multiplier.hpp"
#include "opcalc/quadrature.hpp"

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace opcalc {

/// Positive-weight rule on the unit sphere S^2: Gauss-Legendre in cos(theta)
/// times the trapezoidal rule in phi. Integrates spherical harmonics of
/// degree <= order exactly; weights sum to 4 pi.
struct SphereQuadrature {
    int order = 0;
    std::vector<std::array<double, 3>> directions;
    std::vector<double> weights;

    explicit SphereQuadrature(int order_ = 29) : order(order_) {
        if (order < 0) throw Error(Errc::InvalidArgument, "sphere quadrature order must be nonnegative");
        const int n_theta = order / 2 + 1;
        const int n_phi = order + 1;
        const GaussLegendre rule(n_theta);
        for (int i = 0; i < n_theta; ++i) {
            const double z = rule.nodes[static_cast<std::size_t>(i)];
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            for (int j = 0; j < n_phi; ++j) {
                const double phi = 2.0 * kPi * j / n_phi;
                directions.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
                weights.push_back(rule.weights[static_cast<std::size_t>(i)] * 2.0 * kPi / n_phi);
            }
        }
    }

    std::size_t size() const { return weights.size(); }
};

/// Normalizing measure 2 (2 pi)^{nu+1} r^{n-1} of the odd-dimensional
/// spherical-mean formula, n - 2 = 2 nu + 1. Equals the sphere area for n = 3.
inline double sphere_normalization(int n, double radius) {
    if (n < 3 || n % 2 == 0) throw Error(Errc::InvalidArgument, "normalization defined for odd n >= 3");
    const int nu = (n - 3) / 2;
    return 2.0 * std::pow(2.0 * kPi, nu + 1) * std::pow(radius, n - 1);
}

namespace detail {

inline void require_3d(const Grid& g) {
    if (g.dim() != 3) throw Error(Errc::InvalidArgument, "spherical means are implemented for 3-D fields only");
}

} // namespace detail

/// Trigonometric interpolant of u (given by its coefficients) at an arbitrary point.
inline cplx interpolate(const SpectralField& u_hat, std::span<const double> x) {
    const auto& g = u_hat.grid;
    const auto dims = static_cast<std::size_t>(g.dim());
    // Per-axis phase tables e^{i 2 pi k x_d / L_d}.
    std::vector<std::vector<cplx>> phase(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const auto n = g.shape()[d];
        phase[d].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int k = i < (n + 1) / 2 ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n);
            phase[d][i] = std::polar(1.0, 2.0 * kPi * k * x[d] / g.box()[d]);
        }
    }
    cplx acc = 0.0;
    std::vector<std::size_t> idx(dims);
    for (std::size_t flat = 0; flat < u_hat.data.size(); ++flat) {
        g.unravel(flat, idx);
        cplx ph = u_hat.data[flat];
        for (std::size_t d = 0; d < dims; ++d) ph *= phase[d][idx[d]];
        acc += ph;
    }
    return acc;
}

/// Mean of u over the sphere |xi - center| = radius, off-grid samples by
/// trigonometric interpolation (points wrap periodically).
inline cplx sphere_mean(const Field& u, std::span<const double> center, double radius, const SphereQuadrature& q) {
    detail::require_3d(u.grid);
    if (radius < 0.0) throw Error(Errc::InvalidArgument, "radius must be nonnegative");
    const auto u_hat = forward(u);
    if (radius == 0.0) return interpolate(u_hat, center);
    cplx acc = 0.0;
    double wsum = 0.0;
    std::array<double, 3> x{};
    for (std::size_t i = 0; i < q.size(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) x[d] = center[d] + radius * q.directions[i][d];
        acc += q.weights[i] * interpolate(u_hat, x);
        wsum += q.weights[i];
    }
    return acc / wsum;
}

/// t * (mean of u over spheres of radius a t), at every grid point: the
/// Kirchhoff-type realization of sinh(t a sqrt(Lap)) / (a sqrt(Lap)) u in 3-D.
/// Sphere samples of the whole grid are taken at once: a shift by a vector s
/// multiplies the coefficient at k by e^{i 2 pi k.s / L}, which is exact
/// trigonometric interpolation at x + s for every grid point x.
inline Field sinhc_spherical(const Field& u, double a, double t, const SphereQuadrature& q) {
    detail::require_3d(u.grid);
    if (!(a > 0.0)) throw Error(Errc::InvalidArgument, "a must be positive");
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    if (t == 0.0) return Field::zeros(u.grid);
    const double radius = a * t;
    auto u_hat = forward(u);
    const auto& g = u.grid;
    std::array<double, 3> scale{};
    for (std::size_t d = 0; d < 3; ++d) scale[d] = 2.0 * kPi / g.box()[d];
    double wsum = 0.0;
    for (double w : q.weights) wsum += w;

    std::vector<int> k(3);
    for (std::size_t i = 0; i < u_hat.data.size(); ++i) {
        g.wavevector(i, k);
        cplx mean = 0.0;
        for (std::size_t n = 0; n < q.size(); ++n) {
            double arg = 0.0;
            for (std::size_t d = 0; d < 3; ++d) arg += scale[d] * k[d] * radius * q.directions[n][d];
            mean += q.weights[n] * std::polar(1.0, arg);
        }
        u_hat.data[i] *= t * mean / wsum;
    }
    return inverse(u_hat);
}

} // namespace opcalc
