#pragma once

#include "opcalc/core.hpp"
#include "opcalc/expr.hpp"
#include "opcalc/kernel_synthesis.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace opcalc {

// ---------------------------------------------------------------------------
// INI-style problem files:
//
//   [equation]  kind = first_order_product | even_order_product | repeated_root
//               m = 2
//               roots = 1,0; 2,0        (re,im pairs; "re" alone is real)
//               coeffs = 2; -3; 1       (alternative: b_0..b_m, or b_0,b_2,..,b_2m)
//               measure = tau_prime | plain   (optional, repeated root only)
//   [operator]  dim = 1
//               terms = alpha=2: coeff=1; ...
//   [grid]      shape = 64
//               box = 2*pi
//   [initial]   phi0 = sin(x1)  ... one key per required derivative
//   [forcing]   f = cos(t)*sin(x1)   (optional section)
//   [output]    times = 0.5, 1
//
// '#' starts a comment line. Values in box/times/roots may be constant
// expressions.

using IniSections = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline cplx constant_value(const std::string& text, const std::string& key) {
    try {
        const Expr e = parse(text, 0, false);
        return e.eval({}, 0.0);
    } catch (const Error& err) {
        throw Error(Errc::Validation, "key '" + key + "': " + err.what());
    }
}

inline double real_value(const std::string& text, const std::string& key) {
    const cplx v = constant_value(text, key);
    if (v.imag() != 0.0) throw Error(Errc::Validation, "key '" + key + "' must be real");
    return v.real();
}

/// "re" or "re,im".
inline cplx complex_pair(const std::string& text, const std::string& key) {
    const auto parts = split(text, ',');
    if (parts.size() == 1) return constant_value(parts[0], key);
    if (parts.size() == 2) return {real_value(parts[0], key), real_value(parts[1], key)};
    throw Error(Errc::Validation, "key '" + key + "': expected 're' or 're,im', got '" + text + "'");
}

} // namespace detail

inline IniSections parse_ini(std::istream& in) {
    IniSections out;
    std::string section, line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim(line);
        if (text.empty() || text[0] == '#') continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw Error(Errc::Validation, "line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
            out[section];
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw Error(Errc::Validation, "line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty()) throw Error(Errc::Validation, "line " + std::to_string(lineno) + ": key outside of a section");
        out[section][detail::trim(std::string_view(text).substr(0, eq))] = detail::trim(std::string_view(text).substr(eq + 1));
    }
    return out;
}

struct LoadedProblem {
    CauchyProblem problem;
    std::optional<RepeatedMeasure> measure_override;
    std::vector<std::string> phi_sources;
    std::string forcing_source;
};

inline LoadedProblem load_problem(std::istream& in) {
    const auto ini = parse_ini(in);
    auto section = [&](const std::string& name) -> const std::map<std::string, std::string>& {
        const auto it = ini.find(name);
        if (it == ini.end()) throw Error(Errc::Validation, "missing section [" + name + "]");
        return it->second;
    };
    auto get = [&](const std::string& sec, const std::string& key) -> const std::string& {
        const auto& s = section(sec);
        const auto it = s.find(key);
        if (it == s.end()) throw Error(Errc::Validation, "missing key '" + key + "' in [" + sec + "]");
        return it->second;
    };
    auto find = [&](const std::string& sec, const std::string& key) -> const std::string* {
        const auto it = ini.find(sec);
        if (it == ini.end()) return nullptr;
        const auto k = it->second.find(key);
        return k == it->second.end() ? nullptr : &k->second;
    };

    LoadedProblem out;
    auto& prob = out.problem;

    // [equation]
    const auto kind = get("equation", "kind");
    const auto m_text = get("equation", "m");
    const double m_val = detail::real_value(m_text, "m");
    if (m_val < 1 || m_val != std::floor(m_val)) throw Error(Errc::Validation, "key 'm' must be a positive integer");
    const int m = static_cast<int>(m_val);
    auto read_list = [&](const std::string& key) {
        std::vector<cplx> v;
        for (const auto& item : detail::split(get("equation", key), ';')) v.push_back(detail::complex_pair(item, key));
        return v;
    };
    try {
        if (kind == "repeated_root") {
            prob.spec = CharacteristicSpec::repeated_root(m);
        } else if (kind == "first_order_product" || kind == "even_order_product") {
            const bool first = kind == "first_order_product";
            if (find("equation", "roots")) {
                auto roots = read_list("roots");
                if (static_cast<int>(roots.size()) != m)
                    throw Error(Errc::Validation, "key 'roots' has " + std::to_string(roots.size()) + " entries, expected m = " + std::to_string(m));
                prob.spec = first ? CharacteristicSpec::first_order(std::move(roots)) : CharacteristicSpec::even_order(std::move(roots));
            } else if (find("equation", "coeffs")) {
                auto b = read_list("coeffs");
                if (static_cast<int>(b.size()) != m + 1)
                    throw Error(Errc::Validation, "key 'coeffs' needs m + 1 = " + std::to_string(m + 1) + " entries");
                prob.spec = first ? CharacteristicSpec::first_order_from_coeffs(std::move(b))
                                  : CharacteristicSpec::even_order_from_coeffs(std::move(b));
            } else {
                throw Error(Errc::Validation, "[equation] needs 'roots' or 'coeffs'");
            }
        } else {
            throw Error(Errc::Validation, "key 'kind' must be first_order_product, even_order_product or repeated_root");
        }
    } catch (const Error& e) {
        if (e.code() == Errc::Validation) throw;
        throw Error(Errc::Validation, std::string("[equation]: ") + e.what());
    }
    if (const auto* measure = find("equation", "measure")) {
        if (*measure == "tau_prime") out.measure_override = RepeatedMeasure::TauPrime;
        else if (*measure == "plain") out.measure_override = RepeatedMeasure::Plain;
        else throw Error(Errc::Validation, "key 'measure' must be tau_prime or plain");
    }

    // [operator]
    const double dim_val = detail::real_value(get("operator", "dim"), "dim");
    if (dim_val < 1 || dim_val != std::floor(dim_val)) throw Error(Errc::Validation, "key 'dim' must be a positive integer");
    const int dim = static_cast<int>(dim_val);
    std::vector<SymbolTerm> terms;
    for (const auto& entry : detail::split(get("operator", "terms"), ';')) {
        if (entry.empty()) continue;
        const auto colon = entry.find(':');
        if (colon == std::string::npos) throw Error(Errc::Validation, "key 'terms': expected 'alpha=...: coeff=...', got '" + entry + "'");
        const auto lhs = detail::trim(std::string_view(entry).substr(0, colon));
        const auto rhs = detail::trim(std::string_view(entry).substr(colon + 1));
        if (lhs.rfind("alpha=", 0) != 0 || rhs.rfind("coeff=", 0) != 0)
            throw Error(Errc::Validation, "key 'terms': expected 'alpha=...: coeff=...', got '" + entry + "'");
        SymbolTerm term;
        for (const auto& a : detail::split(lhs.substr(6), ',')) {
            const double v = detail::real_value(a, "terms.alpha");
            if (v < 0 || v != std::floor(v)) throw Error(Errc::Validation, "key 'terms': alpha entries must be nonnegative integers");
            term.alpha.push_back(static_cast<int>(v));
        }
        if (static_cast<int>(term.alpha.size()) != dim)
            throw Error(Errc::Validation, "key 'terms': alpha has " + std::to_string(term.alpha.size()) + " entries, dim is " + std::to_string(dim));
        term.coeff = detail::complex_pair(rhs.substr(6), "terms.coeff");
        terms.push_back(std::move(term));
    }
    if (terms.empty()) throw Error(Errc::Validation, "key 'terms' is empty");
    prob.P = SymbolPolynomial(dim, std::move(terms));

    // [grid]
    std::vector<std::size_t> shape;
    for (const auto& s : detail::split(get("grid", "shape"), ',')) {
        const double v = detail::real_value(s, "shape");
        if (v < 2 || v != std::floor(v)) throw Error(Errc::Validation, "key 'shape': entries must be integers >= 2");
        shape.push_back(static_cast<std::size_t>(v));
    }
    std::vector<double> box;
    for (const auto& s : detail::split(get("grid", "box"), ',')) box.push_back(detail::real_value(s, "box"));
    if (static_cast<int>(shape.size()) != dim || static_cast<int>(box.size()) != dim)
        throw Error(Errc::Validation, "keys 'shape' and 'box' need dim = " + std::to_string(dim) + " entries");
    try {
        prob.grid = Grid(shape, box);
    } catch (const Error& e) {
        throw Error(Errc::Validation, std::string("[grid]: ") + e.what());
    }

    // [initial]
    for (int r = 0; r < prob.spec.order(); ++r) {
        const std::string key = "phi" + std::to_string(r);
        const auto& src = get("initial", key);
        Expr e = [&] {
            try {
                return parse(src, dim, false);
            } catch (const Error& err) {
                throw Error(Errc::Validation, "key '" + key + "': " + err.what());
            }
        }();
        prob.phi.push_back(Field::sample(prob.grid, [&](std::span<const double> x) { return e.eval(x); }));
        out.phi_sources.push_back(src);
    }

    // [forcing]
    if (const auto* f = find("forcing", "f")) {
        try {
            auto e = std::make_shared<const Expr>(parse(*f, dim, true));
            prob.forcing = [e](std::span<const double> x, double t) { return e->eval(x, t); };
        } catch (const Error& err) {
            throw Error(Errc::Validation, std::string("key 'f': ") + err.what());
        }
        out.forcing_source = *f;
    }

    // [output]
    for (const auto& s : detail::split(get("output", "times"), ',')) prob.t_points.push_back(detail::real_value(s, "times"));

    try {
        prob.validate();
    } catch (const Error& e) {
        if (e.code() == Errc::Validation) throw;
        throw Error(Errc::Validation, e.what());
    }
    return out;
}

inline LoadedProblem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Validation, "cannot open problem file " + path.string());
    return load_problem(static_cast<std::istream&>(in));
}

// ---------------------------------------------------------------------------
// Outputs.

/// One CSV per snapshot: x1..xn, re, im.
inline void write_csv(const std::filesystem::path& path, const Field& u) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.precision(17);
    const int dim = u.grid.dim();
    for (int d = 0; d < dim; ++d) out << 'x' << (d + 1) << ',';
    out << "re,im\n";
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        u.grid.point(i, x);
        for (double v : x) out << v << ',';
        out << u.data[i].real() << ',' << u.data[i].imag() << '\n';
    }
}

inline Field read_csv(const std::filesystem::path& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    Field u = Field::zeros(grid);
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        if (!std::getline(in, line)) throw Error(Errc::Io, "truncated CSV " + path.string());
        const auto cols = detail::split(line, ',');
        u.data[i] = {std::stod(cols[cols.size() - 2]), std::stod(cols.back())};
    }
    return u;
}

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw Error(Errc::Io, "truncated binary dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

} // namespace detail

/// Binary dump, little-endian throughout:
///   "OPC1" | u64 dims | u64 shape[dims] | f64 box[dims] | u64 ntimes |
///   f64 times[ntimes] | per time, per grid point (row-major): f64 re, f64 im
inline void write_dump(const std::filesystem::path& path, std::span<const Snapshot> snaps) {
    if (snaps.empty()) throw Error(Errc::InvalidArgument, "nothing to dump");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    const auto& g = snaps.front().u.grid;
    out.write("OPC1", 4);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.dim()));
    for (auto n : g.shape()) detail::put_le<std::uint64_t>(out, n);
    for (double l : g.box()) detail::put_le<double>(out, l);
    detail::put_le<std::uint64_t>(out, snaps.size());
    for (const auto& s : snaps) detail::put_le<double>(out, s.t);
    for (const auto& s : snaps)
        for (const cplx z : s.u.data) {
            detail::put_le<double>(out, z.real());
            detail::put_le<double>(out, z.imag());
        }
}

inline std::vector<Snapshot> read_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != "OPC1") throw Error(Errc::Io, "bad magic in " + path.string());
    const auto dims = detail::get_le<std::uint64_t>(in);
    if (dims == 0 || dims > 16) throw Error(Errc::Io, "implausible dimension in dump");
    std::vector<std::size_t> shape;
    std::vector<double> box;
    for (std::uint64_t d = 0; d < dims; ++d) shape.push_back(detail::get_le<std::uint64_t>(in));
    for (std::uint64_t d = 0; d < dims; ++d) box.push_back(detail::get_le<double>(in));
    const Grid g(shape, box);
    const auto nt = detail::get_le<std::uint64_t>(in);
    std::vector<Snapshot> snaps(nt);
    for (auto& s : snaps) s.t = detail::get_le<double>(in);
    for (auto& s : snaps) {
        s.u = Field::zeros(g);
        for (auto& z : s.u.data) {
            const double re = detail::get_le<double>(in);
            const double im = detail::get_le<double>(in);
            z = {re, im};
        }
    }
    return snaps;
}

inline void write_stability(const std::filesystem::path& path, const StabilityReport& rep) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.precision(10);
    out << "# stability report\n";
    out << "max_growth =";
    for (std::size_t j = 0; j < rep.max_growth.size(); ++j) out << (j ? ", " : " ") << rep.max_growth[j];
    out << "\ncondition = " << rep.condition << "\n";
    out << "overflowed_modes = " << rep.overflowed.size() << "\n";
    for (const auto& k : rep.overflowed) {
        out << "overflow =";
        for (std::size_t d = 0; d < k.size(); ++d) out << (d ? "," : " ") << k[d];
        out << "\n";
    }
}

} // namespace opcalc
