#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "indexforge/error.hpp"

namespace indexforge {

/// Correctly rounded sum of doubles (Shewchuk's exact partials).
inline double exact_sum(std::span<const double> xs) {
    std::vector<double> partials;
    for (double x : xs) {
        std::size_t i = 0;
        for (double y : partials) {
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[i++] = lo;
            x = hi;
        }
        partials.resize(i);
        partials.push_back(x);
    }
    // Round the partials to a single double, as Python's math.fsum does.
    if (partials.empty()) return 0.0;
    std::size_t n = partials.size();
    double hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) hi = x;
    }
    return hi;
}

namespace detail {

/// Nearest double to num / den (ties to even) for den > 0; normal range only.
inline double round_ratio(boost::multiprecision::cpp_int num, const boost::multiprecision::cpp_int& den) {
    using boost::multiprecision::cpp_int;
    if (num == 0) return 0.0;
    const bool negative = num < 0;
    if (negative) num = -num;
    // Scale so the quotient has exactly 53 significant bits.
    long e = static_cast<long>(boost::multiprecision::msb(num)) - static_cast<long>(boost::multiprecision::msb(den)) - 53;
    cpp_int q, r;
    for (;;) {
        const cpp_int n = e < 0 ? cpp_int(num << static_cast<unsigned>(-e)) : cpp_int(num);
        const cpp_int d = e > 0 ? cpp_int(den << static_cast<unsigned>(e)) : cpp_int(den);
        q = n / d;
        r = n % d;
        if (q >= (cpp_int(1) << 53)) {
            ++e;
            continue;
        }
        if (q < (cpp_int(1) << 52)) {
            --e;
            continue;
        }
        const cpp_int twice = r * 2;
        if (twice > d || (twice == d && (q & 1) != 0)) ++q;
        break;
    }
    const double v = std::ldexp(static_cast<double>(q), static_cast<int>(e));
    return negative ? -v : v;
}

}  // namespace detail

/// Correctly rounded arithmetic mean. Exact arithmetic makes it monotone:
/// raising any element, or dropping the smallest, never lowers the result.
inline double mean(std::span<const double> xs) {
    using boost::multiprecision::cpp_int;
    if (xs.empty()) throw ContractError("mean of an empty sample");
    // Every finite double is m * 2^(k - 53) with |m| < 2^53 and k >= -1074.
    constexpr int kShift = 1074 + 53;
    cpp_int total = 0;
    for (double x : xs) {
        if (!std::isfinite(x)) throw ContractError("mean of a non-finite value");
        if (x == 0.0) continue;
        int exp = 0;
        const double frac = std::frexp(x, &exp);
        const auto mant = static_cast<long long>(std::ldexp(frac, 53));
        cpp_int term = mant;
        term <<= static_cast<unsigned>(exp - 53 + kShift);
        total += term;
    }
    cpp_int den = cpp_int(1) << kShift;
    den *= xs.size();
    return detail::round_ratio(total, den);
}

/// Pearson correlation; 0 when either sample has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw ContractError("pearson: samples must be non-empty and equal length");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// t statistic of a sample correlation r over n pairs: r * sqrt((n-2)/(1-r^2)).
inline double correlation_t(double r, std::size_t n) {
    if (n < 3) throw ContractError("correlation_t needs n >= 3");
    if (std::abs(r) >= 1.0) return std::copysign(INFINITY, r);
    return r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
}

/// Two-sided p-value of t under Student's t with n-2 degrees of freedom.
inline double correlation_p(double t, std::size_t n) {
    if (n < 3) throw ContractError("correlation_p needs n >= 3");
    if (!std::isfinite(t)) return 0.0;
    const boost::math::students_t dist(static_cast<double>(n - 2));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace indexforge
