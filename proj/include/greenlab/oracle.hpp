#ifndef GREENLAB_ORACLE_HPP
#define GREENLAB_ORACLE_HPP

// Green's function of −Δ on the unit ball in R³ by the method of images:
//   G(x,y) = (1/4π) (1/|x−y| − 1/√(|x|²|y|² − 2x·y + 1)).

#include "greenlab/numerics.hpp"
#include "greenlab/types.hpp"

namespace greenlab {

template <class T, std::size_t N>
T ball_green(const std::array<T, N>& x, const std::array<T, N>& y) {
    static_assert(N == 3, "the image formula is written for n = 3");
    T dxy = T(0.0), xx = T(0.0), yy = T(0.0), xy = T(0.0);
    for (std::size_t i = 0; i < N; ++i) {
        T d = x[i] - y[i];
        dxy = dxy + d * d;
        xx = xx + x[i] * x[i];
        yy = yy + y[i] * y[i];
        xy = xy + x[i] * y[i];
    }
    T image = xx * yy - 2.0 * xy + 1.0;
    return (1.0 / sqrt(dxy) - 1.0 / sqrt(image)) * (1.0 / (4.0 * kPi));
}

/// Free-space fundamental solution of −Δ in R³.
template <class T, std::size_t N>
T newton_kernel(const std::array<T, N>& x, const std::array<T, N>& y) {
    T d = T(0.0);
    for (std::size_t i = 0; i < N; ++i) d = d + (x[i] - y[i]) * (x[i] - y[i]);
    return (1.0 / sqrt(d)) * (1.0 / (4.0 * kPi));
}

/// ∂_x^γ ∂_y^β G(x,y) for |γ|+|β| ≤ 3, exact.
inline double ball_green_derivative(const Point<3>& x, const Point<3>& y, const MultiIndex<3>& gamma,
                                    const MultiIndex<3>& beta) {
    std::array<double, 6> p{x[0], x[1], x[2], y[0], y[1], y[2]};
    std::array<int, 6> idx{gamma[0], gamma[1], gamma[2], beta[0], beta[1], beta[2]};
    return partial_multi(
        [](const auto& q) {
            using T = std::decay_t<decltype(q[0])>;
            std::array<T, 3> a{q[0], q[1], q[2]}, b{q[3], q[4], q[5]};
            return ball_green(a, b);
        },
        p, idx);
}

}  // namespace greenlab

#endif  // GREENLAB_ORACLE_HPP
