#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opcalc {

using cplx = std::complex<double>;

enum class Errc {
    InvalidArgument,
    DegenerateRoots,
    NonmonicZero,
    ZeroRoot,
    UnresolvedKernel,
    SyntaxError,
    UnknownVariable,
    NonIntegerExponent,
    InsufficientSnapshots,
    Inconclusive,
    Validation,
    Io,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateRoots: return "DegenerateRoots";
    case Errc::NonmonicZero: return "NonmonicZero";
    case Errc::ZeroRoot: return "ZeroRoot";
    case Errc::UnresolvedKernel: return "UnresolvedKernel";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::NonIntegerExponent: return "NonIntegerExponent";
    case Errc::InsufficientSnapshots: return "InsufficientSnapshots";
    case Errc::Inconclusive: return "Inconclusive";
    case Errc::Validation: return "Validation";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Library-wide exception. Every failure carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// A value together with a saturation flag. Scalar operator functions
/// never throw on overflow; they clamp and raise the flag instead.
struct Evaluated {
    cplx value{};
    bool overflow = false;
};

inline constexpr double kPi = 3.14159265358979323846;
/// Exponent magnitude beyond which e^z is considered overflowed.
inline constexpr double kOverflowExponent = 700.0;

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

/// n!! with 0!! = (-1)!! = 1.
inline double double_factorial(int n) {
    if (n < -1) throw Error(Errc::InvalidArgument, "double factorial of " + std::to_string(n));
    double r = 1.0;
    for (int i = n; i > 1; i -= 2) r *= i;
    return r;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

} // namespace opcalc
