#pragma once

#include "opcalc/core.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace opcalc {

/// Relative threshold under which two roots count as coincident.
inline constexpr double kDistinctRootTol = 1e-8;

enum class EquationKind {
    FirstOrderProduct, ///< prod_j (d/dt - a_j P) u = f
    EvenOrderProduct,  ///< prod_j (d2/dt2 - a_j^2 P) u = f
    RepeatedRoot,      ///< (d2/dt2 - P)^m u = f
};

constexpr std::string_view to_string(EquationKind kind) {
    switch (kind) {
    case EquationKind::FirstOrderProduct: return "first_order_product";
    case EquationKind::EvenOrderProduct: return "even_order_product";
    case EquationKind::RepeatedRoot: return "repeated_root";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Polynomial helpers (coefficients in ascending powers).

inline cplx horner(std::span<const cplx> coeffs, cplx x) {
    cplx acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
}

/// Coefficients of lead * prod_j (x - roots_j), ascending.
inline std::vector<cplx> poly_from_roots(std::span<const cplx> roots, cplx lead = 1.0) {
    std::vector<cplx> c{lead};
    for (const cplx r : roots) {
        std::vector<cplx> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    return c;
}

inline double max_abs(std::span<const cplx> v) {
    double m = 0.0;
    for (const cplx z : v) m = std::max(m, std::abs(z));
    return m;
}

inline double min_pairwise_gap(std::span<const cplx> v) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) gap = std::min(gap, std::abs(v[i] - v[j]));
    return gap;
}

namespace detail {

inline void require_distinct(std::span<const cplx> values, double tol, const char* what) {
    const double gap = min_pairwise_gap(values);
    if (gap < tol * (1.0 + max_abs(values)))
        throw Error(Errc::DegenerateRoots,
                    std::string(what) + " are not pairwise distinct (min gap " + std::to_string(gap) + ")");
}

inline void sort_roots(std::vector<cplx>& roots) {
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
}

} // namespace detail

/// Roots of b_0 + b_1 x + ... + b_m x^m from the companion-matrix spectrum,
/// each refined with one Newton step.
inline std::vector<cplx> roots_from_coeffs(std::span<const cplx> b, double tol = kDistinctRootTol) {
    if (b.size() < 3) throw Error(Errc::InvalidArgument, "need degree m >= 2 (got " + std::to_string(b.size()) + " coefficients)");
    const std::size_t m = b.size() - 1;
    const cplx lead = b[m];
    if (lead == cplx{0.0}) throw Error(Errc::NonmonicZero, "leading coefficient b_m is zero");

    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i + 1 < m; ++i) companion(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t i = 0; i < m; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m - 1)) = -b[i] / lead;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw Error(Errc::InvalidArgument, "companion eigenvalue iteration failed");

    std::vector<cplx> derivative(m);
    for (std::size_t k = 1; k <= m; ++k) derivative[k - 1] = static_cast<double>(k) * b[k];

    std::vector<cplx> roots(m);
    for (std::size_t j = 0; j < m; ++j) {
        cplx a = solver.eigenvalues()(static_cast<Eigen::Index>(j));
        const cplx slope = horner(derivative, a);
        if (slope != cplx{0.0}) a -= horner(b, a) / slope;
        roots[j] = a;
    }
    detail::require_distinct(roots, tol, "polynomial roots");
    detail::sort_roots(roots);

    // Reconstruction check at Chebyshev points on a circle of the root-bound radius.
    const double radius = 1.0 + max_abs(roots);
    const auto rebuilt = poly_from_roots(roots, 1.0);
    for (std::size_t i = 0; i <= m; ++i) {
        const double theta = kPi * (2.0 * i + 1.0) / (2.0 * (m + 1));
        const cplx x = std::polar(radius, theta);
        const cplx want = horner(b, x) / lead;
        const cplx got = horner(rebuilt, x);
        if (std::abs(got - want) > tol * std::max(1.0, std::abs(want)))
            throw Error(Errc::InvalidArgument, "root reconstruction residual too large");
    }
    return roots;
}

/// c_j = a_j^{m-1} / prod_{i != j} (a_j - a_i).
inline std::vector<cplx> partial_fraction_first(std::span<const cplx> roots) {
    const std::size_t m = roots.size();
    if (m < 2) throw Error(Errc::InvalidArgument, "partial fractions need m >= 2 roots");
    detail::require_distinct(roots, kDistinctRootTol, "roots");
    std::vector<cplx> c(m);
    for (std::size_t j = 0; j < m; ++j) {
        cplx denom = 1.0;
        for (std::size_t i = 0; i < m; ++i)
            if (i != j) denom *= roots[j] - roots[i];
        c[j] = std::pow(roots[j], static_cast<int>(m - 1)) / denom;
    }
    return c;
}

/// d_j = a_j^{2m-2} / prod_{i != j} (a_j^2 - a_i^2).
inline std::vector<cplx> partial_fraction_even(std::span<const cplx> roots) {
    const std::size_t m = roots.size();
    if (m < 2) throw Error(Errc::InvalidArgument, "partial fractions need m >= 2 roots");
    const double scale = max_abs(roots);
    for (const cplx a : roots)
        if (std::abs(a) <= kDistinctRootTol * scale || a == cplx{0.0})
            throw Error(Errc::ZeroRoot, "even-order kernels need nonzero roots");
    std::vector<cplx> squares(m);
    for (std::size_t j = 0; j < m; ++j) squares[j] = roots[j] * roots[j];
    detail::require_distinct(squares, kDistinctRootTol, "squared roots");
    std::vector<cplx> d(m);
    for (std::size_t j = 0; j < m; ++j) {
        cplx denom = 1.0;
        for (std::size_t i = 0; i < m; ++i)
            if (i != j) denom *= squares[j] - squares[i];
        d[j] = std::pow(squares[j], static_cast<int>(m - 1)) / denom;
    }
    return d;
}

// ---------------------------------------------------------------------------

/// Characteristic data of the time factor. For the product kinds `roots`
/// and `pf` are filled; `b` holds b_0..b_m (first order, ascending powers
/// of x) or b_0, b_2, ..., b_2m (even order, ascending powers of x^2).
/// RepeatedRoot only carries m.
struct CharacteristicSpec {
    EquationKind kind = EquationKind::FirstOrderProduct;
    int m = 0;
    std::vector<cplx> b;
    std::vector<cplx> roots;
    std::vector<cplx> pf;

    /// Number of time derivatives in the equation (m or 2m).
    int order() const { return kind == EquationKind::FirstOrderProduct ? m : 2 * m; }

    /// Leading coefficient; the equation is normalized by it.
    cplx lead() const { return b.empty() ? cplx{1.0} : b.back(); }

    static CharacteristicSpec first_order(std::vector<cplx> roots, cplx lead = 1.0) {
        if (roots.empty()) throw Error(Errc::InvalidArgument, "first-order spec needs at least one root");
        if (lead == cplx{0.0}) throw Error(Errc::NonmonicZero, "leading coefficient is zero");
        CharacteristicSpec s;
        s.kind = EquationKind::FirstOrderProduct;
        s.m = static_cast<int>(roots.size());
        s.b = poly_from_roots(roots, lead);
        s.pf = roots.size() == 1 ? std::vector<cplx>{1.0} : partial_fraction_first(roots);
        s.roots = std::move(roots);
        s.check();
        return s;
    }

    static CharacteristicSpec first_order_from_coeffs(std::vector<cplx> b) {
        if (b.size() == 2) {
            if (b[1] == cplx{0.0}) throw Error(Errc::NonmonicZero, "leading coefficient b_1 is zero");
            return first_order({-b[0] / b[1]}, b[1]);
        }
        auto roots = roots_from_coeffs(b);
        auto s = first_order(std::move(roots), b.back());
        s.b = std::move(b);
        s.check();
        return s;
    }

    static CharacteristicSpec even_order(std::vector<cplx> roots) {
        if (roots.empty()) throw Error(Errc::InvalidArgument, "even-order spec needs at least one root");
        CharacteristicSpec s;
        s.kind = EquationKind::EvenOrderProduct;
        s.m = static_cast<int>(roots.size());
        std::vector<cplx> squares;
        for (const cplx a : roots) squares.push_back(a * a);
        s.b = poly_from_roots(squares, 1.0);
        if (roots.size() == 1) {
            if (roots[0] == cplx{0.0}) throw Error(Errc::ZeroRoot, "even-order kernels need nonzero roots");
            s.pf = {1.0};
        } else {
            s.pf = partial_fraction_even(roots);
        }
        s.roots = std::move(roots);
        s.check();
        return s;
    }

    /// From b_0, b_2, ..., b_2m (must be monic up to scaling). Roots are the
    /// principal square roots of the zeros in x^2.
    static CharacteristicSpec even_order_from_coeffs(std::vector<cplx> b2k) {
        if (b2k.size() < 2) throw Error(Errc::InvalidArgument, "need at least b_0 and b_2");
        if (b2k.back() == cplx{0.0}) throw Error(Errc::NonmonicZero, "leading coefficient is zero");
        std::vector<cplx> squares;
        if (b2k.size() == 2) squares = {-b2k[0] / b2k[1]};
        else squares = roots_from_coeffs(b2k);
        std::vector<cplx> roots;
        for (const cplx y : squares) roots.push_back(std::sqrt(y));
        auto s = even_order(std::move(roots));
        s.b = std::move(b2k);
        s.check();
        return s;
    }

    static CharacteristicSpec repeated_root(int m) {
        if (m < 1) throw Error(Errc::InvalidArgument, "repeated-root order must be positive");
        CharacteristicSpec s;
        s.kind = EquationKind::RepeatedRoot;
        s.m = m;
        return s;
    }

    /// Verifies the structural invariants; throws on violation.
    void check() const {
        if (m < 1) throw Error(Errc::InvalidArgument, "m must be positive");
        if (kind == EquationKind::RepeatedRoot) return;
        if (static_cast<int>(roots.size()) != m || static_cast<int>(pf.size()) != m || static_cast<int>(b.size()) != m + 1)
            throw Error(Errc::InvalidArgument, "characteristic spec sizes inconsistent with m");
        if (lead() == cplx{0.0}) throw Error(Errc::NonmonicZero, "leading coefficient is zero");
        std::vector<cplx> factors = roots;
        if (kind == EquationKind::EvenOrderProduct)
            for (auto& a : factors) a *= a;
        if (m >= 2) detail::require_distinct(factors, kDistinctRootTol, "roots");
        const auto rebuilt = poly_from_roots(factors, lead());
        const double radius = 1.0 + max_abs(factors);
        for (int i = 0; i <= m; ++i) {
            const cplx x = std::polar(radius, kPi * (2.0 * i + 1.0) / (2.0 * (m + 1)));
            const cplx want = horner(b, x);
            if (std::abs(horner(rebuilt, x) - want) > 1e-8 * std::max(1.0, std::abs(want)))
                throw Error(Errc::InvalidArgument, "coefficients do not match the roots");
        }
    }
};

// ---------------------------------------------------------------------------

struct SymbolTerm {
    std::vector<int> alpha; ///< multi-index, one entry per axis
    cplx coeff{1.0};
};

/// P(d/dx) = sum_alpha c_alpha d^alpha on an n-dimensional domain.
struct SymbolPolynomial {
    int dim = 1;
    std::vector<SymbolTerm> terms;

    SymbolPolynomial() = default;
    SymbolPolynomial(int dim_, std::vector<SymbolTerm> terms_) : dim(dim_), terms(std::move(terms_)) {
        if (dim < 1) throw Error(Errc::InvalidArgument, "symbol dimension must be >= 1");
        normalize();
    }

    static SymbolPolynomial laplacian(int dim) {
        std::vector<SymbolTerm> t;
        for (int d = 0; d < dim; ++d) {
            std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
            alpha[static_cast<std::size_t>(d)] = 2;
            t.push_back({alpha, 1.0});
        }
        return {dim, t};
    }

    static SymbolPolynomial derivative(int dim, int axis, int order, cplx coeff = 1.0) {
        std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
        alpha.at(static_cast<std::size_t>(axis)) = order;
        return {dim, {{alpha, coeff}}};
    }

    friend SymbolPolynomial operator+(const SymbolPolynomial& a, const SymbolPolynomial& b) {
        if (a.dim != b.dim) throw Error(Errc::InvalidArgument, "symbol dimensions differ");
        auto t = a.terms;
        t.insert(t.end(), b.terms.begin(), b.terms.end());
        return {a.dim, t};
    }

    /// Operator composition (polynomial product).
    friend SymbolPolynomial operator*(const SymbolPolynomial& a, const SymbolPolynomial& b) {
        if (a.dim != b.dim) throw Error(Errc::InvalidArgument, "symbol dimensions differ");
        std::vector<SymbolTerm> t;
        for (const auto& x : a.terms)
            for (const auto& y : b.terms) {
                SymbolTerm z{x.alpha, x.coeff * y.coeff};
                for (std::size_t d = 0; d < z.alpha.size(); ++d) z.alpha[d] += y.alpha[d];
                t.push_back(std::move(z));
            }
        return {a.dim, t};
    }

private:
    // Merge duplicate multi-indices so they stay unique.
    void normalize() {
        std::vector<SymbolTerm> merged;
        for (auto& term : terms) {
            if (static_cast<int>(term.alpha.size()) != dim)
                throw Error(Errc::InvalidArgument, "multi-index length does not match dimension");
            for (int a : term.alpha)
                if (a < 0) throw Error(Errc::InvalidArgument, "negative multi-index entry");
            auto it = std::find_if(merged.begin(), merged.end(), [&](const SymbolTerm& s) { return s.alpha == term.alpha; });
            if (it == merged.end()) merged.push_back(term);
            else it->coeff += term.coeff;
        }
        terms = std::move(merged);
    }
};

/// p(k) = sum_alpha c_alpha prod_d (i 2 pi k_d / L_d)^{alpha_d}.
inline cplx symbol_eval(const SymbolPolynomial& P, std::span<const int> k, std::span<const double> box) {
    if (static_cast<int>(k.size()) != P.dim || static_cast<int>(box.size()) != P.dim)
        throw Error(Errc::InvalidArgument, "wavevector/box dimension does not match the symbol");
    cplx p = 0.0;
    for (const auto& term : P.terms) {
        cplx v = term.coeff;
        for (std::size_t d = 0; d < k.size(); ++d) {
            const cplx ik{0.0, 2.0 * kPi * k[d] / box[d]};
            for (int e = 0; e < term.alpha[d]; ++e) v *= ik;
        }
        p += v;
    }
    return p;
}

} // namespace opcalc
