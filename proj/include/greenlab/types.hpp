#ifndef GREENLAB_TYPES_HPP
#define GREENLAB_TYPES_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "greenlab/dual.hpp"

namespace greenlab {

template <std::size_t N> using Point = std::array<double, N>;
template <std::size_t N> using MultiIndex = std::array<int, N>;

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by an operation contract has its own type
// so that callers (and the CLI exit-code mapping) can tell them apart.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : Error { using Error::Error; };
struct ResolutionError : Error { using Error::Error; };
struct CollarError : Error { using Error::Error; };
struct SolverError : Error { using Error::Error; };
struct StencilError : Error { using Error::Error; };
struct CapabilityError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct RefusalError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Small fixed-size vector helpers.

template <class T, std::size_t N>
std::array<T, N> operator+(const std::array<T, N>& a, const std::array<T, N>& b) {
    std::array<T, N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + b[i];
    return r;
}
template <class T, std::size_t N>
std::array<T, N> operator-(const std::array<T, N>& a, const std::array<T, N>& b) {
    std::array<T, N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] - b[i];
    return r;
}
template <std::size_t N>
std::array<double, N> operator*(double s, const std::array<double, N>& a) {
    std::array<double, N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = s * a[i];
    return r;
}
template <std::size_t N>
double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}
template <std::size_t N>
double norm(const std::array<double, N>& a) { return std::sqrt(dot(a, a)); }
template <std::size_t N>
double distance(const std::array<double, N>& a, const std::array<double, N>& b) { return norm(a - b); }

template <std::size_t N> int order(const MultiIndex<N>& beta) {
    int s = 0;
    for (int b : beta) s += b;
    return s;
}
template <std::size_t N> MultiIndex<N> unit_index(int axis, int times = 1) {
    MultiIndex<N> m{};
    m[axis] = times;
    return m;
}

// ---------------------------------------------------------------------------
// Exact partial derivatives of templated closed-form functions via nested duals.

template <int L> struct NestedDual { using type = Dual<typename NestedDual<L - 1>::type>; };
template <> struct NestedDual<0> { using type = double; };
template <int L> using Nest = typename NestedDual<L>::type;

namespace detail {
template <int L, std::size_t K>
Nest<L> seed_variable(double value, int var, const std::array<int, K>& dirs) {
    if constexpr (L == 0) {
        return value;
    } else {
        Nest<L - 1> d = Nest<L - 1>(dirs[L - 1] == var ? 1.0 : 0.0);
        return Nest<L>(seed_variable<L - 1>(value, var, dirs), d);
    }
}
template <int L> double extract(const Nest<L>& x) {
    if constexpr (L == 0) return x;
    else return extract<L - 1>(x.d);
}
}  // namespace detail

/// Mixed partial ∂_{dirs[0]}…∂_{dirs[K-1]} f(p) for f written generically in its scalar.
template <std::size_t K, std::size_t M, class F>
double partial(F&& f, const std::array<double, M>& p, const std::array<int, K>& dirs) {
    constexpr int L = static_cast<int>(K);
    std::array<Nest<L>, M> q;
    for (std::size_t i = 0; i < M; ++i) q[i] = detail::seed_variable<L>(p[i], static_cast<int>(i), dirs);
    return detail::extract<L>(f(q));
}

/// Partial derivative of order |beta| following a multi-index (|beta| ≤ 3).
template <std::size_t M, class F>
double partial_multi(F&& f, const std::array<double, M>& p, const std::array<int, M>& beta) {
    int k = 0;
    std::array<int, 3> dirs{};
    for (std::size_t i = 0; i < M; ++i)
        for (int t = 0; t < beta[i]; ++t) {
            if (k >= 3) throw CapabilityError("partial_multi: order > 3 not supported");
            dirs[static_cast<std::size_t>(k++)] = static_cast<int>(i);
        }
    switch (k) {
        case 0: {
            std::array<double, M> q = p;
            return f(q);
        }
        case 1: return partial(f, p, std::array<int, 1>{dirs[0]});
        case 2: return partial(f, p, std::array<int, 2>{dirs[0], dirs[1]});
        default: return partial(f, p, std::array<int, 3>{dirs[0], dirs[1], dirs[2]});
    }
}

}  // namespace greenlab

#endif  // GREENLAB_TYPES_HPP
