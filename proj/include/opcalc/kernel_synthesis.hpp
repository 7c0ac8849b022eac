#pragma once

#include "opcalc/core.hpp"
#include "opcalc/multiplier.hpp"
#include "opcalc/quadrature.hpp"
#include "opcalc/symbol_poly.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <tuple>
#include <vector>

namespace opcalc {

/// Measure of the inner integral in the forced repeated-root solution:
/// plain d(tau') or tau' d(tau'). Unresolved refuses to evaluate.
enum class RepeatedMeasure { Unresolved, Plain, TauPrime };

constexpr std::string_view to_string(RepeatedMeasure m) {
    switch (m) {
    case RepeatedMeasure::Unresolved: return "Unresolved";
    case RepeatedMeasure::Plain: return "PlainMeasure";
    case RepeatedMeasure::TauPrime: return "TauPrimeMeasure";
    }
    return "Unknown";
}

struct QuadConfig {
    int nodes = 64;
    RepeatedMeasure repeated_measure = RepeatedMeasure::Unresolved;
};

// ---------------------------------------------------------------------------
// Scalar time kernels K(tau) for one Fourier mode, with all derivatives.

template <class K>
concept TimeKernel = requires(const K& k, int order, double tau) {
    { k(order, tau) } -> std::convertible_to<cplx>;
};

/// K(tau) = sum_j c_j e^{tau lambda_j}, lambda_j = a_j p.
class ExpKernel {
public:
    ExpKernel(std::span<const cplx> weights, std::span<const cplx> roots, cplx p)
        : weights_(weights.begin(), weights.end()) {
        for (const cplx a : roots) rates_.push_back(a * p);
    }

    cplx operator()(int order, double tau) const {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < weights_.size(); ++j)
            acc += weights_[j] * ipow(rates_[j], order) * exp_prop(tau, rates_[j], 1.0);
        return acc;
    }

    const std::vector<cplx>& rates() const { return rates_; }

private:
    static cplx ipow(cplx z, int n) {
        cplx r = 1.0;
        for (int i = 0; i < n; ++i) r *= z;
        return r;
    }
    std::vector<cplx> weights_;
    std::vector<cplx> rates_;
};

/// K(tau) = sum_j w_j sinh(tau a_j sqrt p) / (a_j sqrt p)
///        = sum_j w_j tau sinhc_sqrt(tau^2 z_j),  z_j = a_j^2 p.
/// K'' = z K, so even derivatives stay sinh-type and odd ones are cosh-type.
class SinhKernel {
public:
    SinhKernel(std::span<const cplx> weights, std::span<const cplx> roots, cplx p)
        : weights_(weights.begin(), weights.end()) {
        for (const cplx a : roots) z_.push_back(a * a * p);
    }

    cplx operator()(int order, double tau) const {
        cplx acc = 0.0;
        const int half = order / 2;
        for (std::size_t j = 0; j < weights_.size(); ++j) {
            cplx scale = weights_[j];
            for (int i = 0; i < half; ++i) scale *= z_[j];
            const cplx arg = tau * tau * z_[j];
            acc += scale * (order % 2 == 0 ? tau * sinhc_sqrt(arg) : cosh_sqrt(arg));
        }
        return acc;
    }

private:
    std::vector<cplx> weights_;
    std::vector<cplx> z_;
};

/// Calls fn with the concrete time kernel of `spec` at symbol p.
template <class Fn>
decltype(auto) with_kernel(const CharacteristicSpec& spec, cplx p, Fn&& fn) {
    switch (spec.kind) {
    case EquationKind::FirstOrderProduct:
        return fn(ExpKernel(spec.pf, spec.roots, p));
    case EquationKind::EvenOrderProduct:
        return fn(SinhKernel(spec.pf, spec.roots, p));
    case EquationKind::RepeatedRoot:
        break;
    }
    static const std::vector<cplx> unit{1.0};
    return fn(SinhKernel(unit, unit, p));
}

// ---------------------------------------------------------------------------
// Window weights of the G_m kernels, G(T) = int_0^T w(T, s) K(s) ds.

namespace detail {

inline double repeated_norm(int m) { return double_factorial(2 * m - 2) * double_factorial(2 * m - 4); }

/// w(T, s) for the kind; `measure` only matters for RepeatedRoot.
inline double window_weight(const CharacteristicSpec& spec, RepeatedMeasure measure, double T, double s) {
    const int m = spec.m;
    switch (spec.kind) {
    case EquationKind::FirstOrderProduct: return std::pow(T - s, m - 2) / factorial(m - 2);
    case EquationKind::EvenOrderProduct: return std::pow(T - s, 2 * m - 3) / factorial(2 * m - 3);
    case EquationKind::RepeatedRoot: {
        const double base = std::pow(T * T - s * s, m - 2) / repeated_norm(m);
        return measure == RepeatedMeasure::TauPrime ? base * s : base;
    }
    }
    return 0.0;
}

inline void require_measure(const CharacteristicSpec& spec, RepeatedMeasure measure) {
    if (spec.kind == EquationKind::RepeatedRoot && spec.m >= 2 && measure == RepeatedMeasure::Unresolved)
        throw Error(Errc::UnresolvedKernel,
                    "repeated-root forcing kernel is unresolved; run the kernel discrepancy probe or set the measure explicitly");
}

} // namespace detail

/// G(T) for a concrete kernel. For m = 1 the kernel itself is the propagator.
template <TimeKernel K>
cplx propagator(const CharacteristicSpec& spec, const K& kernel, double T, const GaussLegendre& rule,
                RepeatedMeasure measure) {
    if (T <= 0.0) return 0.0;
    if (spec.m == 1) return kernel(0, T);
    return rule.integrate([&](double s) { return detail::window_weight(spec, measure, T, s) * kernel(0, s); }, 0.0, T);
}

/// G_m(p, t) = int_0^t (t - tau)^{m-2}/(m-2)! sum_j c_j e^{tau a_j p} d tau.
inline cplx gm_first(const CharacteristicSpec& spec, cplx p, double t, const QuadConfig& quad = {}) {
    if (spec.kind != EquationKind::FirstOrderProduct) throw Error(Errc::InvalidArgument, "gm_first needs a first-order spec");
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    return propagator(spec, ExpKernel(spec.pf, spec.roots, p), t, gauss_legendre(quad.nodes), quad.repeated_measure);
}

/// Even-order G_m: int_0^t (t - tau)^{2m-3}/(2m-3)! sum_j d_j sinh(tau a_j sqrt p)/(a_j sqrt p) d tau.
inline cplx gm_even(const CharacteristicSpec& spec, cplx p, double t, const QuadConfig& quad = {}) {
    if (spec.kind != EquationKind::EvenOrderProduct) throw Error(Errc::InvalidArgument, "gm_even needs an even-order spec");
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    return propagator(spec, SinhKernel(spec.pf, spec.roots, p), t, gauss_legendre(quad.nodes), quad.repeated_measure);
}

/// Repeated-root propagator with an explicit inner measure.
inline cplx gm_repeated(const CharacteristicSpec& spec, cplx p, double t, RepeatedMeasure measure, int nodes = 64) {
    if (spec.kind != EquationKind::RepeatedRoot) throw Error(Errc::InvalidArgument, "gm_repeated needs a repeated-root spec");
    detail::require_measure(spec, measure);
    return with_kernel(spec, p, [&](const auto& k) { return propagator(spec, k, t, gauss_legendre(nodes), measure); });
}

// ---------------------------------------------------------------------------
// Forced part.

/// Forced mode response from forcing samples taken at the Gauss-Legendre
/// nodes of [0, t] (rule of quad.nodes points, ascending order).
inline cplx inhomogeneous_from_samples(const CharacteristicSpec& spec, cplx p, std::span<const cplx> f_samples, double t,
                                       const QuadConfig& quad) {
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    const auto& rule = gauss_legendre(quad.nodes);
    if (f_samples.size() != rule.size()) throw Error(Errc::InvalidArgument, "forcing sample count does not match quadrature");
    if (t == 0.0) return 0.0;
    if (std::all_of(f_samples.begin(), f_samples.end(), [](cplx f) { return f == cplx{0.0}; })) return 0.0;
    detail::require_measure(spec, quad.repeated_measure);
    return with_kernel(spec, p, [&](const auto& kernel) {
        cplx acc = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double tau = 0.5 * t * (1.0 + rule.nodes[i]);
            acc += rule.weights[i] * f_samples[i] * propagator(spec, kernel, t - tau, rule, quad.repeated_measure);
        }
        return acc * (0.5 * t) / spec.lead();
    });
}

/// Outer quadrature times on [0, t] at which forcing must be sampled.
inline std::vector<double> forcing_times(double t, const QuadConfig& quad) {
    const auto& rule = gauss_legendre(quad.nodes);
    std::vector<double> out(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) out[i] = 0.5 * t * (1.0 + rule.nodes[i]);
    return out;
}

/// int_0^t int_0^{t-tau} kernel(t, tau, tau') K(tau', p) f(tau) d tau' d tau.
template <class F>
cplx inhomogeneous_mode(const CharacteristicSpec& spec, cplx p, F&& fhat, double t, const QuadConfig& quad = {}) {
    std::vector<cplx> samples;
    for (double tau : forcing_times(t, quad)) samples.push_back(cplx(fhat(tau)));
    return inhomogeneous_from_samples(spec, p, samples, t, quad);
}

/// The zero-data product formulas written out literally: nested quadrature of
/// (t - tau - tau')^q / q! * sum_j w_j K_j(tau') * f(tau), one root at a time.
template <class F>
cplx zero_data_product_formula(const CharacteristicSpec& spec, cplx p, F&& fhat, double t, const QuadConfig& quad = {}) {
    if (spec.kind == EquationKind::RepeatedRoot) throw Error(Errc::InvalidArgument, "product formula needs a product kind");
    if (spec.m < 2) throw Error(Errc::InvalidArgument, "product formula needs m >= 2");
    const auto& rule = gauss_legendre(quad.nodes);
    const bool first = spec.kind == EquationKind::FirstOrderProduct;
    const int q = first ? spec.m - 2 : 2 * spec.m - 3;
    return rule.integrate(
               [&](double tau) {
                   const cplx f = cplx(fhat(tau));
                   return rule.integrate(
                       [&](double s) {
                           cplx sum = 0.0;
                           for (std::size_t j = 0; j < spec.roots.size(); ++j) {
                               const cplx a = spec.roots[j];
                               sum += spec.pf[j] * (first ? exp_prop(s, a, p) : s * sinhc_sqrt(s * s * a * a * p));
                           }
                           return std::pow(t - tau - s, q) / factorial(q) * sum * f;
                       },
                       0.0, t - tau);
               },
               0.0, t) /
           spec.lead();
}

// ---------------------------------------------------------------------------
// Time-kernel calculus for the homogeneous part.

/// coeff * t^t_power * int_0^t tau^tau_power K^{(kernel_order)}(tau) d tau
struct IntegralTerm {
    cplx coeff;
    int t_power = 0;
    int tau_power = 0;
    int kernel_order = 0;
};

/// coeff * t^t_power * K^{(kernel_order)}(t)
struct BoundaryTerm {
    cplx coeff;
    int t_power = 0;
    int kernel_order = 0;
};

struct TermList {
    std::vector<IntegralTerm> integrals;
    std::vector<BoundaryTerm> boundary;

    bool empty() const { return integrals.empty() && boundary.empty(); }
};

namespace detail {

inline TermList merge_terms(const TermList& in) {
    std::map<std::tuple<int, int, int>, cplx> ints;
    std::map<std::pair<int, int>, cplx> bnd;
    for (const auto& t : in.integrals) ints[{t.t_power, t.tau_power, t.kernel_order}] += t.coeff;
    for (const auto& b : in.boundary) bnd[{b.t_power, b.kernel_order}] += b.coeff;
    TermList out;
    for (const auto& [key, c] : ints)
        if (c != cplx{0.0}) out.integrals.push_back({c, std::get<0>(key), std::get<1>(key), std::get<2>(key)});
    for (const auto& [key, c] : bnd)
        if (c != cplx{0.0}) out.boundary.push_back({c, key.first, key.second});
    return out;
}

} // namespace detail

/// Applies d/dt `order` times, exactly:
///   d/dt [t^a int_0^t s^b K] = a t^{a-1} int_0^t s^b K + t^{a+b} K(t)
///   d/dt [t^a K^{(d)}(t)]    = a t^{a-1} K^{(d)}(t) + t^a K^{(d+1)}(t)
inline TermList derivative_reduce(const TermList& terms, int order) {
    if (order < 0) throw Error(Errc::InvalidArgument, "derivative order must be nonnegative");
    TermList cur = terms;
    for (int step = 0; step < order; ++step) {
        TermList next;
        for (const auto& t : cur.integrals) {
            if (t.t_power > 0) next.integrals.push_back({t.coeff * double(t.t_power), t.t_power - 1, t.tau_power, t.kernel_order});
            next.boundary.push_back({t.coeff, t.t_power + t.tau_power, t.kernel_order});
        }
        for (const auto& b : cur.boundary) {
            if (b.t_power > 0) next.boundary.push_back({b.coeff * double(b.t_power), b.t_power - 1, b.kernel_order});
            next.boundary.push_back({b.coeff, b.t_power, b.kernel_order + 1});
        }
        cur = detail::merge_terms(next);
    }
    return cur;
}

/// Binomially expanded G(t) of the homogeneous part: (t - s)^q / q! for the
/// product kinds, (t^2 - s^2)^{m-2} s / ((2m-2)!! (2m-4)!!) for the repeated root.
inline TermList propagator_terms(const CharacteristicSpec& spec) {
    TermList out;
    if (spec.m == 1) {
        out.boundary.push_back({1.0, 0, 0});
        return out;
    }
    if (spec.kind == EquationKind::RepeatedRoot) {
        const int q = spec.m - 2;
        const double norm = detail::repeated_norm(spec.m);
        for (int i = 0; i <= q; ++i)
            out.integrals.push_back({binomial(q, i) * (i % 2 ? -1.0 : 1.0) / norm, 2 * (q - i), 2 * i + 1, 0});
        return out;
    }
    const int q = spec.kind == EquationKind::FirstOrderProduct ? spec.m - 2 : 2 * spec.m - 3;
    const double norm = factorial(q);
    for (int i = 0; i <= q; ++i) out.integrals.push_back({binomial(q, i) * (i % 2 ? -1.0 : 1.0) / norm, q - i, i, 0});
    return out;
}

/// Evaluates a TermList at time t, integrals by Gauss-Legendre on [0, t].
template <TimeKernel K>
cplx evaluate_terms(const TermList& terms, const K& kernel, double t, const GaussLegendre& rule) {
    cplx acc = 0.0;
    std::map<int, std::vector<cplx>> node_values;
    const double half = 0.5 * t;
    for (const auto& term : terms.integrals) {
        if (t == 0.0) break;
        auto& vals = node_values[term.kernel_order];
        if (vals.empty())
            for (std::size_t i = 0; i < rule.size(); ++i) vals.push_back(kernel(term.kernel_order, half * (1.0 + rule.nodes[i])));
        cplx integral = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double s = half * (1.0 + rule.nodes[i]);
            integral += rule.weights[i] * std::pow(s, term.tau_power) * vals[i];
        }
        acc += term.coeff * std::pow(t, term.t_power) * integral * half;
    }
    for (const auto& b : terms.boundary) acc += b.coeff * std::pow(t, b.t_power) * kernel(b.kernel_order, t);
    return acc;
}

/// Weight of d^q G / dt^q in the homogeneous solution, q = 0..order-1, from
/// the initial data (Laplace-domain numerator coefficients).
inline std::vector<cplx> derivative_weights(const CharacteristicSpec& spec, cplx p, std::span<const cplx> phi) {
    const int q = spec.order();
    if (static_cast<int>(phi.size()) != q)
        throw Error(Errc::InvalidArgument, "expected " + std::to_string(q) + " initial values, got " + std::to_string(phi.size()));
    auto ppow = [p](int n) {
        cplx r = 1.0;
        for (int i = 0; i < n; ++i) r *= p;
        return r;
    };
    std::vector<cplx> w(static_cast<std::size_t>(q), 0.0);
    const int m = spec.m;
    switch (spec.kind) {
    case EquationKind::FirstOrderProduct:
        for (int k = 1; k <= m; ++k)
            for (int r = 0; r <= k - 1; ++r)
                w[static_cast<std::size_t>(k - 1 - r)] += spec.b[static_cast<std::size_t>(k)] / spec.lead() * ppow(m - k) * phi[static_cast<std::size_t>(r)];
        break;
    case EquationKind::EvenOrderProduct:
        for (int k = 1; k <= m; ++k)
            for (int r = 0; r <= 2 * k - 1; ++r)
                w[static_cast<std::size_t>(2 * k - 1 - r)] += spec.b[static_cast<std::size_t>(k)] / spec.lead() * ppow(m - k) * phi[static_cast<std::size_t>(r)];
        break;
    case EquationKind::RepeatedRoot:
        for (int k = 0; k <= m - 1; ++k)
            for (int j = 0; j <= 2 * m - 1 - 2 * k; ++j)
                w[static_cast<std::size_t>(2 * m - 1 - 2 * k - j)] +=
                    (k % 2 ? -1.0 : 1.0) * binomial(m, k) * ppow(k) * phi[static_cast<std::size_t>(j)];
        break;
    }
    return w;
}

/// Free evolution of one mode from initial data phi_r = d^r u/dt^r (0).
inline cplx homogeneous_mode(const CharacteristicSpec& spec, cplx p, std::span<const cplx> phi, double t,
                             const QuadConfig& quad = {}) {
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    const auto weights = derivative_weights(spec, p, phi);
    if (std::all_of(weights.begin(), weights.end(), [](cplx w) { return w == cplx{0.0}; })) return 0.0;
    const auto base = propagator_terms(spec);
    const auto& rule = gauss_legendre(quad.nodes);
    return with_kernel(spec, p, [&](const auto& kernel) {
        cplx acc = 0.0;
        for (std::size_t q = 0; q < weights.size(); ++q) {
            if (weights[q] == cplx{0.0}) continue;
            acc += weights[q] * evaluate_terms(derivative_reduce(base, static_cast<int>(q)), kernel, t, rule);
        }
        return acc;
    });
}

/// Full single-mode solution: free evolution plus forced response.
template <class F>
cplx mode_solution(const CharacteristicSpec& spec, cplx p, std::span<const cplx> phi, F&& fhat, double t,
                   const QuadConfig& quad = {}) {
    return homogeneous_mode(spec, p, phi, t, quad) + inhomogeneous_mode(spec, p, std::forward<F>(fhat), t, quad);
}

// ---------------------------------------------------------------------------
// Grid-level solve.

/// Largest e-folding rate of the mode's free evolution.
inline double mode_growth(const CharacteristicSpec& spec, cplx p, std::size_t root) {
    if (spec.kind == EquationKind::FirstOrderProduct) return (spec.roots[root] * p).real();
    const cplx a = spec.kind == EquationKind::RepeatedRoot ? cplx{1.0} : spec.roots[root];
    return std::abs((a * std::sqrt(p)).real());
}

using ForcingFn = std::function<cplx(std::span<const double> x, double t)>;

struct CauchyProblem {
    CharacteristicSpec spec;
    SymbolPolynomial P;
    Grid grid;
    std::vector<Field> phi;
    ForcingFn forcing; ///< empty means f = 0
    std::vector<double> t_points;

    void validate() const {
        spec.check();
        if (P.dim != grid.dim()) throw Error(Errc::Validation, "operator dimension does not match grid dimension");
        if (static_cast<int>(phi.size()) != spec.order())
            throw Error(Errc::Validation, "expected " + std::to_string(spec.order()) + " initial fields, got " + std::to_string(phi.size()));
        for (const auto& f : phi)
            if (!(f.grid == grid)) throw Error(Errc::Validation, "initial fields must share the problem grid");
        double prev = -1.0;
        for (double t : t_points) {
            if (!(t >= 0.0) || t <= prev) throw Error(Errc::Validation, "output times must be nonnegative and increasing");
            prev = t;
        }
    }
};

struct StabilityReport {
    std::vector<double> max_growth;             ///< per root, max over the grid
    std::vector<std::vector<int>> overflowed;   ///< wavevectors with growth * t > overflow exponent
    double condition = 1.0;                     ///< max_j |partial-fraction coefficient|

    bool any_overflow() const { return !overflowed.empty(); }
};

struct Snapshot {
    double t = 0.0;
    Field u;
};

struct SolveResult {
    std::vector<Snapshot> snapshots;
    StabilityReport report;
};

inline StabilityReport stability_report(const CharacteristicSpec& spec, std::span<const cplx> symbols, const Grid& grid,
                                        double t_max) {
    StabilityReport rep;
    const std::size_t nroots = spec.kind == EquationKind::RepeatedRoot ? 1 : spec.roots.size();
    rep.max_growth.assign(nroots, -std::numeric_limits<double>::infinity());
    for (const cplx c : spec.pf) rep.condition = std::max(rep.condition, std::abs(c));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nroots; ++j) {
            const double g = mode_growth(spec, symbols[i], j);
            rep.max_growth[j] = std::max(rep.max_growth[j], g);
            worst = std::max(worst, g);
        }
        if (worst * t_max > kOverflowExponent) rep.overflowed.push_back(grid.wavevector(i));
    }
    return rep;
}

inline SolveResult solve(const CauchyProblem& problem, const QuadConfig& quad = {}) {
    problem.validate();
    const auto& spec = problem.spec;
    const auto& grid = problem.grid;
    const auto symbols = symbol_table(problem.P, grid);

    std::vector<SpectralField> phi_hat;
    for (const auto& f : problem.phi) phi_hat.push_back(forward(f));

    SolveResult result;
    const double t_max = problem.t_points.empty() ? 0.0 : problem.t_points.back();
    result.report = stability_report(spec, symbols, grid, t_max);

    const std::size_t n = grid.size();
    std::vector<cplx> phi_mode(phi_hat.size());
    for (double t : problem.t_points) {
        // Forcing spectra at the outer quadrature nodes of [0, t].
        std::vector<SpectralField> f_hat;
        if (problem.forcing && t > 0.0) {
            for (double tau : forcing_times(t, quad))
                f_hat.push_back(forward(Field::sample(grid, [&](std::span<const double> x) { return problem.forcing(x, tau); })));
        }
        SpectralField u_hat{grid, std::vector<cplx>(n, 0.0)};
        std::vector<cplx> f_mode(f_hat.size());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t r = 0; r < phi_hat.size(); ++r) phi_mode[r] = phi_hat[r].data[i];
            cplx u = homogeneous_mode(spec, symbols[i], phi_mode, t, quad);
            if (!f_hat.empty()) {
                for (std::size_t k = 0; k < f_hat.size(); ++k) f_mode[k] = f_hat[k].data[i];
                u += inhomogeneous_from_samples(spec, symbols[i], f_mode, t, quad);
            }
            u_hat.data[i] = u;
        }
        result.snapshots.push_back({t, inverse(u_hat)});
    }
    return result;
}

} // namespace opcalc
