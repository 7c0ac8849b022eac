#pragma once

#include "opcalc/core.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace opcalc {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
        if (n < 1) throw Error(Errc::InvalidArgument, "Gauss-Legendre rule needs at least one node");
        // P_n(x) and P_n'(x) by the three-term recurrence.
        auto legendre = [n](double x) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
        };
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            for (int iter = 0; iter < 100; ++iter) {
                const auto [p, dp] = legendre(x);
                const double dx = p / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            const double dp = legendre(x).second;
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
            nodes[lo] = -x;
            nodes[hi] = x;
            weights[lo] = w;
            weights[hi] = w;
        }
        if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    }

    std::size_t size() const { return nodes.size(); }

    /// Integrate f over [a, b].
    template <class F>
    auto integrate(F&& f, double a, double b) const {
        const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
        using R = decltype(f(a));
        R acc{};
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(mid + half * nodes[i]);
        return acc * half;
    }
};

/// Shared, immutable rule for n nodes.
inline const GaussLegendre& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussLegendre>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussLegendre>(n);
    return *slot;
}

} // namespace opcalc
