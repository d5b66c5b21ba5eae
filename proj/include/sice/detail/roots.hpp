#pragma once

#include <cmath>
#include <functional>
#include <optional>

namespace sice::detail {

/// Bisection on a bracket [lo, hi] where f(lo) and f(hi) have opposite signs
/// (or one is zero). Runs until the bracket collapses to adjacent doubles or
/// its width drops below x_tol.
template <typename T, typename F>
T bisect(F&& f, T lo, T hi, T x_tol = T(0)) {
    T f_lo = f(lo);
    if (f_lo == T(0)) return lo;
    if (f(hi) == T(0)) return hi;
    for (int iter = 0; iter < 400; ++iter) {
        T mid = lo + (hi - lo) / 2;
        if (mid <= lo || mid >= hi || (hi - lo) <= x_tol) break;
        T f_mid = f(mid);
        if (f_mid == T(0)) return mid;
        if ((f_mid < T(0)) == (f_lo < T(0))) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return lo + (hi - lo) / 2;
}

/// Find the inverse of a nondecreasing function: x with g(x) = target.
/// Expands the starting bracket geometrically until it contains the target.
template <typename T, typename G>
std::optional<T> invert_monotone(G&& g, T target, T lo, T hi, int max_expand = 64) {
    auto f = [&](T x) { return g(x) - target; };
    for (int i = 0; i < max_expand && f(lo) > T(0); ++i) lo = lo - (hi - lo);
    for (int i = 0; i < max_expand && f(hi) < T(0); ++i) hi = hi + (hi - lo);
    if (f(lo) > T(0) || f(hi) < T(0)) return std::nullopt;
    return bisect(f, lo, hi);
}

}  // namespace sice::detail
