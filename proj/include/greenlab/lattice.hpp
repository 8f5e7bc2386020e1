#ifndef GREENLAB_LATTICE_HPP
#define GREENLAB_LATTICE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "greenlab/types.hpp"

namespace greenlab {

template <std::size_t N> using NodeIndex = std::array<std::int64_t, N>;

/// Regular lattice origin + h·k restricted to an inclusive integer index box.
/// Lattices sharing origin and spacing share node coordinates exactly, which
/// is how solver grids and extension boxes line up.
template <std::size_t N>
struct Lattice {
    Point<N> origin{};
    double h = 1.0;
    NodeIndex<N> lo{};
    NodeIndex<N> hi{};

    /// points_per_axis nodes spanning [lo_corner, hi_corner] (a cube is assumed
    /// for uniform spacing: h from the first axis).
    static Lattice spanning(const Point<N>& lo_corner, const Point<N>& hi_corner, int points_per_axis) {
        Lattice l;
        l.origin = lo_corner;
        l.h = (hi_corner[0] - lo_corner[0]) / (points_per_axis - 1);
        for (int i = 0; i < N; ++i) {
            l.lo[i] = 0;
            l.hi[i] = static_cast<std::int64_t>(std::ceil((hi_corner[i] - lo_corner[i]) / l.h - 1e-9));
        }
        return l;
    }

    /// Same origin and spacing, index box grown to cover [a, b].
    Lattice covering(const Point<N>& a, const Point<N>& b) const {
        Lattice l = *this;
        for (int i = 0; i < N; ++i) {
            l.lo[i] = static_cast<std::int64_t>(std::floor((a[i] - origin[i]) / h + 1e-9));
            l.hi[i] = static_cast<std::int64_t>(std::ceil((b[i] - origin[i]) / h - 1e-9));
        }
        return l;
    }

    std::int64_t extent(int axis) const { return hi[axis] - lo[axis] + 1; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < N; ++i) s *= static_cast<std::size_t>(extent(i));
        return s;
    }

    bool contains(const NodeIndex<N>& k) const {
        for (int i = 0; i < N; ++i)
            if (k[i] < lo[i] || k[i] > hi[i]) return false;
        return true;
    }

    /// Row-major linear index (last axis fastest).
    std::size_t linear(const NodeIndex<N>& k) const {
        std::size_t r = 0;
        for (int i = 0; i < N; ++i) r = r * static_cast<std::size_t>(extent(i)) + static_cast<std::size_t>(k[i] - lo[i]);
        return r;
    }

    NodeIndex<N> unlinear(std::size_t r) const {
        NodeIndex<N> k{};
        for (int i = N - 1; i >= 0; --i) {
            auto e = static_cast<std::size_t>(extent(i));
            k[i] = lo[i] + static_cast<std::int64_t>(r % e);
            r /= e;
        }
        return k;
    }

    Point<N> point(const NodeIndex<N>& k) const {
        Point<N> p;
        for (int i = 0; i < N; ++i) p[i] = origin[i] + h * static_cast<double>(k[i]);
        return p;
    }

    NodeIndex<N> nearest(const Point<N>& p) const {
        NodeIndex<N> k;
        for (int i = 0; i < N; ++i) k[i] = static_cast<std::int64_t>(std::llround((p[i] - origin[i]) / h));
        return k;
    }

    /// The node at p, if p is a lattice point within tol·h.
    std::optional<NodeIndex<N>> node_at(const Point<N>& p, double tol = 1e-6) const {
        NodeIndex<N> k = nearest(p);
        for (int i = 0; i < N; ++i)
            if (std::abs(origin[i] + h * static_cast<double>(k[i]) - p[i]) > tol * h) return std::nullopt;
        return k;
    }
};

template <std::size_t N>
NodeIndex<N> shifted(NodeIndex<N> k, int axis, std::int64_t by) {
    k[axis] += by;
    return k;
}

}  // namespace greenlab

#endif  // GREENLAB_LATTICE_HPP
