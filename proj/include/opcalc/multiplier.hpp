#pragma once

#include "opcalc/core.hpp"
#include "opcalc/symbol_poly.hpp"

#include <fftw3.h>

#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <type_traits>
#include <vector>

namespace opcalc {

// ---------------------------------------------------------------------------
// Scalar operator functions. sinh(sqrt z)/sqrt z and cosh(sqrt z) are even
// in sqrt z, so they are entire in z and need no branch choice.

namespace detail {

inline constexpr double kSeriesRadius = 0.25;
inline constexpr int kSeriesTerms = 12;

// Clamp Re(w) so that e^{|Re w|} stays representable.
inline cplx saturate(cplx w, bool& overflow) {
    if (std::abs(w.real()) > kOverflowExponent) {
        overflow = true;
        return {std::copysign(kOverflowExponent, w.real()), w.imag()};
    }
    return w;
}

} // namespace detail

inline Evaluated sinhc_sqrt_checked(cplx z) {
    Evaluated out;
    if (std::abs(z) < detail::kSeriesRadius) {
        // sum z^k / (2k+1)!, Horner from the top term down
        cplx acc = 0.0;
        for (int k = detail::kSeriesTerms - 1; k >= 0; --k) acc = 1.0 + acc * z / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        out.value = acc;
        return out;
    }
    const cplx w = detail::saturate(std::sqrt(z), out.overflow);
    out.value = std::sinh(w) / w;
    return out;
}

inline Evaluated cosh_sqrt_checked(cplx z) {
    Evaluated out;
    if (std::abs(z) < detail::kSeriesRadius) {
        cplx acc = 0.0;
        for (int k = detail::kSeriesTerms - 1; k >= 0; --k) acc = 1.0 + acc * z / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        out.value = acc;
        return out;
    }
    const cplx w = detail::saturate(std::sqrt(z), out.overflow);
    out.value = std::cosh(w);
    return out;
}

inline Evaluated exp_prop_checked(double t, cplx a, cplx p) {
    Evaluated out;
    const cplx e = detail::saturate(t * a * p, out.overflow);
    out.value = std::exp(e);
    return out;
}

/// sinh(sqrt z) / sqrt z
inline cplx sinhc_sqrt(cplx z) { return sinhc_sqrt_checked(z).value; }
/// cosh(sqrt z)
inline cplx cosh_sqrt(cplx z) { return cosh_sqrt_checked(z).value; }
/// e^{t a p}
inline cplx exp_prop(double t, cplx a, cplx p) { return exp_prop_checked(t, a, p).value; }

// ---------------------------------------------------------------------------
// Periodic grids.

/// Periodic box [0, L_0) x ... x [0, L_{n-1}) sampled at N_d points per axis,
/// row-major with the last axis fastest.
class Grid {
public:
    Grid() = default;
    Grid(std::vector<std::size_t> shape, std::vector<double> box) : shape_(std::move(shape)), box_(std::move(box)) {
        if (shape_.empty() || shape_.size() != box_.size())
            throw Error(Errc::InvalidArgument, "grid shape and box must have the same nonzero length");
        for (std::size_t n : shape_)
            if (n < 2) throw Error(Errc::InvalidArgument, "grid axes need at least 2 points");
        for (double l : box_)
            if (!(l > 0.0)) throw Error(Errc::InvalidArgument, "box lengths must be positive");
    }

    int dim() const { return static_cast<int>(shape_.size()); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<double>& box() const { return box_; }
    std::size_t size() const {
        return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    }

    void unravel(std::size_t flat, std::span<std::size_t> idx) const {
        for (std::size_t d = shape_.size(); d-- > 0;) {
            idx[d] = flat % shape_[d];
            flat /= shape_[d];
        }
    }

    /// Physical coordinates of grid point `flat`.
    void point(std::size_t flat, std::span<double> x) const {
        for (std::size_t d = shape_.size(); d-- > 0;) {
            x[d] = box_[d] * static_cast<double>(flat % shape_[d]) / static_cast<double>(shape_[d]);
            flat /= shape_[d];
        }
    }

    /// Integer wavevector of spectral index `flat` in standard DFT ordering
    /// (index i maps to i for i < ceil(N/2), else i - N).
    void wavevector(std::size_t flat, std::span<int> k) const {
        for (std::size_t d = shape_.size(); d-- > 0;) {
            const auto n = shape_[d];
            const auto i = flat % n;
            k[d] = i < (n + 1) / 2 ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n);
            flat /= n;
        }
    }

    std::vector<int> wavevector(std::size_t flat) const {
        std::vector<int> k(shape_.size());
        wavevector(flat, k);
        return k;
    }

    bool operator==(const Grid&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> box_;
};

/// Physical-space samples.
struct Field {
    Grid grid;
    std::vector<cplx> data;

    static Field zeros(const Grid& g) { return {g, std::vector<cplx>(g.size(), 0.0)}; }

    /// Sample f(x) at every grid point.
    template <class F>
    static Field sample(const Grid& g, F&& f) {
        Field u = zeros(g);
        std::vector<double> x(static_cast<std::size_t>(g.dim()));
        for (std::size_t i = 0; i < u.data.size(); ++i) {
            g.point(i, x);
            u.data[i] = cplx(f(std::span<const double>(x)));
        }
        return u;
    }
};

/// Fourier coefficients u_hat(k) with u(x) = sum_k u_hat(k) e^{i 2 pi k.x / L}.
struct SpectralField {
    Grid grid;
    std::vector<cplx> data;
};

// ---------------------------------------------------------------------------
// FFTW wrapper. Planning is serialized; execution with the new-array
// interface is thread safe.

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* plan) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline void dft(const Grid& g, std::span<const cplx> in, std::span<cplx> out, int sign) {
    std::vector<int> n(g.shape().begin(), g.shape().end());
    std::vector<cplx> src(in.begin(), in.end());
    PlanPtr plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan.reset(fftw_plan_dft(g.dim(), n.data(), reinterpret_cast<fftw_complex*>(src.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE));
    }
    if (!plan) throw Error(Errc::InvalidArgument, "FFTW could not plan the transform");
    fftw_execute_dft(plan.get(), reinterpret_cast<fftw_complex*>(src.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

} // namespace detail

inline SpectralField forward(const Field& u) {
    SpectralField s{u.grid, std::vector<cplx>(u.data.size())};
    detail::dft(u.grid, u.data, s.data, FFTW_FORWARD);
    const double scale = 1.0 / static_cast<double>(u.data.size());
    for (auto& c : s.data) c *= scale;
    return s;
}

inline Field inverse(const SpectralField& s) {
    Field u{s.grid, std::vector<cplx>(s.data.size())};
    detail::dft(s.grid, s.data, u.data, FFTW_BACKWARD);
    return u;
}

/// Symbol p(k) at every spectral index of the grid.
inline std::vector<cplx> symbol_table(const SymbolPolynomial& P, const Grid& g) {
    if (P.dim != g.dim()) throw Error(Errc::InvalidArgument, "symbol dimension does not match grid");
    std::vector<cplx> table(g.size());
    std::vector<int> k(static_cast<std::size_t>(g.dim()));
    for (std::size_t i = 0; i < table.size(); ++i) {
        g.wavevector(i, k);
        table[i] = symbol_eval(P, k, g.box());
    }
    return table;
}

struct MultiplierResult {
    Field field;
    std::vector<std::vector<int>> overflowed; ///< wavevectors whose multiplier saturated
};

/// Multiply each Fourier coefficient of u by g(p(k)). `g` returns either a
/// complex value or an Evaluated (whose overflow flag is collected).
/// u must be resolved on its grid; nothing is dealiased.
template <class G>
MultiplierResult apply_multiplier(const Field& u, G&& g, const SymbolPolynomial& P) {
    auto spec = forward(u);
    const auto symbols = symbol_table(P, u.grid);
    MultiplierResult out;
    for (std::size_t i = 0; i < spec.data.size(); ++i) {
        using R = std::invoke_result_t<G&, cplx>;
        if constexpr (std::is_same_v<std::decay_t<R>, Evaluated>) {
            const Evaluated e = g(symbols[i]);
            spec.data[i] *= e.value;
            if (e.overflow) out.overflowed.push_back(u.grid.wavevector(i));
        } else {
            spec.data[i] *= cplx(g(symbols[i]));
        }
    }
    out.field = inverse(spec);
    return out;
}

/// Relative L2 distance ||a - b|| / ||b|| (absolute when b vanishes).
inline double relative_l2(std::span<const cplx> a, std::span<const cplx> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

} // namespace opcalc
