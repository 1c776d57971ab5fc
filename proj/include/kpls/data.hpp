#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "kpls.hpp"
#include "linalg.hpp"

namespace kpls {

/// xorshift64* seeded through splitmix64; normals by Box–Muller.
///   x ^= x >> 12; x ^= x << 25; x ^= x >> 27; out = x · 0x2545F4914F6CDD1D
class Rng {
public:
    explicit Rng(std::uint64_t seed)
    {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        state_ = z ^ (z >> 31);
        if (state_ == 0)
            state_ = 0x9E3779B97F4A7C15ULL;
    }

    std::uint64_t next()
    {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double two_pi = 6.28318530717958647692;
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        has_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// sin(x)/x with sinc(0) = 1.
inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// x ~ U[−π, π], y = sinc(x) + N(0, σ²).
inline Dataset synth_sinc(std::size_t n, double sigma, std::uint64_t seed)
{
    const double pi = 3.14159265358979323846;
    Rng rng(seed);
    Dataset d{DenseMatrix(n, 1), Vector(n)};
    for (std::size_t i = 0; i < n; ++i)
        d.X(i, 0) = rng.uniform(-pi, pi);
    for (std::size_t i = 0; i < n; ++i)
        d.y[i] = sinc(d.X(i, 0)) + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
    return d;
}

inline double polymix_function(double x) { return (x - 1.0) * (x + 2.0) * (x - 1.5) * std::exp(-x * x / 10.0); }

/// x from the equal mixture of N(−2, 1) and N(3, 1), y = f(x) + N(0, σ²).
inline Dataset synth_polymix(std::size_t n, std::uint64_t seed, double sigma = 1.0)
{
    Rng rng(seed);
    Dataset d{DenseMatrix(n, 1), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double center = rng.uniform() < 0.5 ? -2.0 : 3.0;
        d.X(i, 0) = center + rng.normal();
    }
    for (std::size_t i = 0; i < n; ++i)
        d.y[i] = polymix_function(d.X(i, 0)) + sigma * rng.normal();
    return d;
}

/// Planar 8-link arm with links of length 1/8: y is the x-coordinate of the end
/// effector, Σₖ cos(θ₁ + … + θₖ)/8, for joint angles θ ~ U[−π/4, π/4], plus N(0, 0.02²).
inline Dataset synth_kinlike(std::size_t n, std::uint64_t seed)
{
    const double pi = 3.14159265358979323846;
    constexpr std::size_t joints = 8;
    Rng rng(seed);
    Dataset d{DenseMatrix(n, joints), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double angle = 0.0, x = 0.0;
        for (std::size_t j = 0; j < joints; ++j) {
            d.X(i, j) = rng.uniform(-pi / 4.0, pi / 4.0);
            angle += d.X(i, j);
            x += std::cos(angle) / static_cast<double>(joints);
        }
        d.y[i] = x + 0.02 * rng.normal();
    }
    return d;
}

/// Leading rows of a dataset (nested sub-samples).
inline Dataset head(const Dataset& d, std::size_t n)
{
    if (n == 0 || n > d.n())
        throw invalid_input("head: sub-sample size out of range");
    Dataset out{DenseMatrix(n, d.dim()), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        out.y[i] = d.y[i];
        for (std::size_t j = 0; j < d.dim(); ++j)
            out.X(i, j) = d.X(i, j);
    }
    return out;
}

/// Shortest-round-trip text is not required; 17 significant digits always round-trip.
inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t p = line.find(',', start);
        out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos)
            break;
        start = p + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace detail

/// CSV with header x1..xd,y followed by numeric rows.
inline Dataset read_csv(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line))
        throw parse_error("csv: empty input", 1);
    ++lineno;
    std::vector<std::string> header;
    for (auto cell : detail::split_commas(line))
        header.emplace_back(detail::trim(cell));
    if (header.size() < 2)
        throw parse_error("csv: header needs at least one input column and y", 1);
    for (std::size_t j = 0; j + 1 < header.size(); ++j)
        if (header[j] != "x" + std::to_string(j + 1))
            throw parse_error("csv: header column " + std::to_string(j + 1) + " must be x" + std::to_string(j + 1), 1,
                              j + 1);
    if (header.back() != "y")
        throw parse_error("csv: last header column must be y", 1, header.size());
    std::size_t d = header.size() - 1;
    std::vector<double> xs, ys;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        auto cells = detail::split_commas(line);
        if (cells.size() != d + 1)
            throw parse_error("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                  " fields, expected " + std::to_string(d + 1),
                              lineno);
        for (std::size_t j = 0; j <= d; ++j) {
            double v;
            if (!detail::parse_double(cells[j], v) || !std::isfinite(v))
                throw parse_error("csv: line " + std::to_string(lineno) + ", column " + std::to_string(j + 1) + " (" +
                                      header[j] + "): not a finite number '" +
                                      std::string(detail::trim(cells[j])) + "'",
                                  lineno, j + 1);
            (j < d ? xs : ys).push_back(v);
        }
    }
    if (ys.empty())
        throw parse_error("csv: no data rows", lineno);
    Dataset out{DenseMatrix(ys.size(), d, std::move(xs)), std::move(ys)};
    return out;
}

inline Dataset load_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw invalid_input("cannot open '" + path + "'");
    return read_csv(in);
}

inline void write_csv(std::ostream& out, const Dataset& d)
{
    for (std::size_t j = 0; j < d.dim(); ++j)
        out << 'x' << (j + 1) << ',';
    out << "y\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.dim(); ++j)
            out << format_real(d.X(i, j)) << ',';
        out << format_real(d.y[i]) << '\n';
    }
}

} // namespace kpls
