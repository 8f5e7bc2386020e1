#ifndef GREENLAB_GEOMETRY_HPP
#define GREENLAB_GEOMETRY_HPP

// Bounded C^{2,α} domains: membership, signed distance, boundary charts and
// the uniformity / coplumpness constants.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "greenlab/lattice.hpp"
#include "greenlab/numerics.hpp"
#include "greenlab/types.hpp"

namespace greenlab {

template <std::size_t N> using Matrix = Eigen::Matrix<double, N, N>;

// ---------------------------------------------------------------------------
// Shapes are level sets F < 0. The level function is exposed for the nested
// dual scalar types the charts need (up to third order).

template <std::size_t N>
class Shape {
public:
    virtual ~Shape() = default;
    virtual std::string name() const = 0;

    virtual double level(const std::array<double, N>& x) const = 0;
    virtual Nest<1> level(const std::array<Nest<1>, N>& x) const = 0;
    virtual Nest<2> level(const std::array<Nest<2>, N>& x) const = 0;
    virtual Nest<3> level(const std::array<Nest<3>, N>& x) const = 0;

    virtual std::optional<double> exact_sdist(const Point<N>&) const { return std::nullopt; }
    virtual std::optional<Point<N>> exact_projection(const Point<N>&) const { return std::nullopt; }
    /// Starting points for the Newton projection; the closest converged result wins.
    virtual std::vector<Point<N>> projection_guesses(const Point<N>& x) const { return {x}; }
    virtual bool bounded() const { return true; }
    virtual std::pair<Point<N>, Point<N>> bounding_box() const = 0;
    virtual double diameter() const = 0;
};

template <std::size_t N, class Derived>
class LevelSetShape : public Shape<N> {
public:
    double level(const std::array<double, N>& x) const override { return self().F(x); }
    Nest<1> level(const std::array<Nest<1>, N>& x) const override { return self().F(x); }
    Nest<2> level(const std::array<Nest<2>, N>& x) const override { return self().F(x); }
    Nest<3> level(const std::array<Nest<3>, N>& x) const override { return self().F(x); }

private:
    const Derived& self() const { return static_cast<const Derived&>(*this); }
};

template <class T, std::size_t N>
T norm_t(const std::array<T, N>& x) {
    T s = x[0] * x[0];
    for (std::size_t i = 1; i < N; ++i) s = s + x[i] * x[i];
    return sqrt(s);
}

template <std::size_t N>
class BallShape final : public LevelSetShape<N, BallShape<N>> {
public:
    BallShape(Point<N> center, double radius) : c_(center), r_(radius) {}
    std::string name() const override { return "ball"; }

    template <class T>
    T F(const std::array<T, N>& x) const {
        std::array<T, N> y;
        for (int i = 0; i < N; ++i) y[i] = x[i] - c_[i];
        return norm_t(y) - r_;
    }
    std::optional<double> exact_sdist(const Point<N>& x) const override { return r_ - distance(x, c_); }
    std::optional<Point<N>> exact_projection(const Point<N>& x) const override {
        Point<N> d = x - c_;
        double n = norm(d);
        if (n < 1e-300) {
            d = Point<N>{};
            d[0] = 1.0;
            n = 1.0;
        }
        return c_ + (r_ / n) * d;
    }
    std::pair<Point<N>, Point<N>> bounding_box() const override {
        Point<N> lo, hi;
        for (int i = 0; i < N; ++i) {
            lo[i] = c_[i] - r_;
            hi[i] = c_[i] + r_;
        }
        return {lo, hi};
    }
    double diameter() const override { return 2.0 * r_; }
    const Point<N>& center() const { return c_; }
    double radius() const { return r_; }

private:
    Point<N> c_;
    double r_;
};

template <std::size_t N>
class EllipsoidShape final : public LevelSetShape<N, EllipsoidShape<N>> {
public:
    EllipsoidShape(Point<N> center, Point<N> semi_axes) : c_(center), a_(semi_axes) {}
    std::string name() const override { return "ellipsoid"; }

    template <class T>
    T F(const std::array<T, N>& x) const {
        T s = T(0.0);
        for (int i = 0; i < N; ++i) {
            T u = (x[i] - c_[i]) / a_[i];
            s = s + u * u;
        }
        return s - 1.0;
    }
    std::vector<Point<N>> projection_guesses(const Point<N>& x) const override {
        std::vector<Point<N>> g;
        Point<N> d = x - c_;
        double q = 0.0;
        for (int i = 0; i < N; ++i) q += (d[i] / a_[i]) * (d[i] / a_[i]);
        if (q > 1e-24) g.push_back(c_ + (1.0 / std::sqrt(q)) * d);
        // Axis-aligned rays from x catch the nearest point for deep interior points.
        for (int i = 0; i < N; ++i)
            for (double s : {-1.0, 1.0}) {
                double rest = 1.0;
                for (int j = 0; j < N; ++j)
                    if (j != i) rest -= (d[j] / a_[j]) * (d[j] / a_[j]);
                if (rest <= 0.0) continue;
                Point<N> p = x;
                p[i] = c_[i] + s * a_[i] * std::sqrt(rest);
                g.push_back(p);
            }
        if (g.empty()) g.push_back(x);
        return g;
    }
    std::pair<Point<N>, Point<N>> bounding_box() const override { return {c_ - a_, c_ + a_}; }
    double diameter() const override { return 2.0 * *std::max_element(a_.begin(), a_.end()); }
    const Point<N>& semi_axes() const { return a_; }

private:
    Point<N> c_, a_;
};

/// Star-shaped ball with radius 1 + amplitude·exp(-width·(1 - x̂_N)) around the origin.
template <std::size_t N>
class BumpedBallShape final : public LevelSetShape<N, BumpedBallShape<N>> {
public:
    BumpedBallShape(double amplitude, double width) : amp_(amplitude), width_(width) {
        // Star-shaped: the diameter is attained between two boundary points; a
        // dense direction sample bounds it from below within 1e-3.
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        std::vector<Point<N>> pts;
        for (int k = 0; k < 3000; ++k) {
            Point<N> u;
            for (auto& v : u) v = nd(rng);
            u = (1.0 / norm(u)) * u;
            pts.push_back(radial(u) * u);
        }
        Point<N> pole{};
        pole[N - 1] = 1.0;
        pts.push_back(radial(pole) * pole);
        double d = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, distance(pts[i], pts[j]));
        diam_ = d;
    }
    std::string name() const override { return "bumped_ball"; }

    double radial(const Point<N>& unit) const { return 1.0 + amp_ * std::exp(-width_ * (1.0 - unit[N - 1])); }

    template <class T>
    T F(const std::array<T, N>& x) const {
        T r = norm_t(x) + 1e-300;
        T cosang = x[N - 1] / r;
        return r - (1.0 + amp_ * exp((cosang - 1.0) * width_));
    }
    std::vector<Point<N>> projection_guesses(const Point<N>& x) const override {
        // Radial guess along x, plus the axis directions for points near the
        // centre where the radial direction says little.
        std::vector<Point<N>> out;
        double r = norm(x);
        if (r >= 1e-12) out.push_back(radial((1.0 / r) * x) * ((1.0 / r) * x));
        if (r < 0.5)
            for (std::size_t i = 0; i < N; ++i)
                for (double s : {-1.0, 1.0}) {
                    Point<N> u{};
                    u[i] = s;
                    out.push_back(radial(u) * u);
                }
        return out;
    }
    std::pair<Point<N>, Point<N>> bounding_box() const override {
        Point<N> lo, hi;
        double R = 1.0 + amp_;
        for (int i = 0; i < N; ++i) {
            lo[i] = -R;
            hi[i] = R;
        }
        return {lo, hi};
    }
    double diameter() const override { return diam_; }

private:
    double amp_, width_, diam_ = 0.0;
};

/// Upper half-space {x_N > 0}; unbounded, used for flat charts and tests.
/// The bounding box is a sampling window, not a bound.
template <std::size_t N>
class HalfSpaceShape final : public LevelSetShape<N, HalfSpaceShape<N>> {
public:
    explicit HalfSpaceShape(double window) : w_(window) {}
    std::string name() const override { return "half_space"; }
    template <class T>
    T F(const std::array<T, N>& x) const { return -x[N - 1]; }
    std::optional<double> exact_sdist(const Point<N>& x) const override { return x[N - 1]; }
    std::optional<Point<N>> exact_projection(const Point<N>& x) const override {
        Point<N> p = x;
        p[N - 1] = 0.0;
        return p;
    }
    bool bounded() const override { return false; }
    std::pair<Point<N>, Point<N>> bounding_box() const override {
        Point<N> lo, hi;
        for (int i = 0; i < N; ++i) {
            lo[i] = -w_;
            hi[i] = w_;
        }
        lo[N - 1] = 0.0;
        return {lo, hi};
    }
    double diameter() const override { return kInf; }

private:
    double w_;
};

/// Slab {|x_N| < thickness/2}, windowed laterally for grid searches.
template <std::size_t N>
class SlabShape final : public LevelSetShape<N, SlabShape<N>> {
public:
    SlabShape(double thickness, double window) : t_(thickness), w_(window) {}
    std::string name() const override { return "slab"; }
    template <class T>
    T F(const std::array<T, N>& x) const { return x[N - 1] * x[N - 1] - 0.25 * t_ * t_; }
    std::optional<double> exact_sdist(const Point<N>& x) const override { return 0.5 * t_ - std::abs(x[N - 1]); }
    std::optional<Point<N>> exact_projection(const Point<N>& x) const override {
        Point<N> p = x;
        p[N - 1] = x[N - 1] >= 0.0 ? 0.5 * t_ : -0.5 * t_;
        return p;
    }
    bool bounded() const override { return false; }
    std::pair<Point<N>, Point<N>> bounding_box() const override {
        Point<N> lo, hi;
        for (int i = 0; i < N; ++i) {
            lo[i] = -w_;
            hi[i] = w_;
        }
        lo[N - 1] = -0.5 * t_;
        hi[N - 1] = 0.5 * t_;
        return {lo, hi};
    }
    double diameter() const override { return kInf; }

private:
    double t_, w_;
};

// ---------------------------------------------------------------------------

template <std::size_t N> class Chart;

/// A domain: shape plus the chart radius ρ and chart norm bound K.
template <std::size_t N>
class Domain {
public:
    static_assert(N >= 2);

    Domain(std::shared_ptr<const Shape<N>> shape, double rho, std::string name)
        : shape_(std::move(shape)), rho_(rho), name_(std::move(name)) {
        if (shape_->bounded() && !(rho_ / shape_->diameter() < 0.25))
            throw DomainError("chart radius must satisfy rho/diam < 1/4");
        if (!(rho_ > 0.0)) throw DomainError("chart radius must be positive");
    }

    const std::string& name() const { return name_; }
    const Shape<N>& shape() const { return *shape_; }
    std::shared_ptr<const Shape<N>> shape_ptr() const { return shape_; }
    int dimension() const { return N; }
    double rho() const { return rho_; }
    double diam() const { return shape_->diameter(); }
    bool bounded() const { return shape_->bounded(); }
    double chart_bound() const { return chart_bound_; }
    void set_chart_bound(double K) { chart_bound_ = K; }
    std::pair<Point<N>, Point<N>> bounding_box() const { return shape_->bounding_box(); }

    double level(const Point<N>& x) const { return shape_->level(x); }
    bool contains(const Point<N>& x) const { return sdist(x) > 0.0; }

    Point<N> level_gradient(const Point<N>& x) const {
        Point<N> g;
        for (int i = 0; i < N; ++i)
            g[i] = partial([this](const auto& q) { return shape_->level(q); }, x, std::array<int, 1>{i});
        return g;
    }
    Matrix<N> level_hessian(const Point<N>& x) const {
        Matrix<N> H;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                H(i, j) = partial([this](const auto& q) { return shape_->level(q); }, x, std::array<int, 2>{i, j});
                H(j, i) = H(i, j);
            }
        return H;
    }

    /// Outward unit normal of the level set through x.
    Point<N> outward_normal(const Point<N>& x) const {
        Point<N> g = level_gradient(x);
        return (1.0 / norm(g)) * g;
    }

    /// Closest boundary point. Exact where the shape provides it; otherwise a
    /// damped Newton solve of the Lagrange system (50 iterations, 1e-10).
    Point<N> nearest_boundary(const Point<N>& x) const {
        if (auto p = shape_->exact_projection(x)) return *p;
        std::optional<Point<N>> best;
        double best_d = kInf;
        for (const auto& guess : shape_->projection_guesses(x)) {
            auto p = newton_projection(x, guess);
            if (!p) continue;
            double d = distance(*p, x);
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        if (!best) throw DomainError("nearest_boundary: projection did not converge");
        return *best;
    }

    /// Positive inside, negative outside.
    double sdist(const Point<N>& x) const {
        if (auto s = shape_->exact_sdist(x)) return *s;
        double F = level(x);
        if (F == 0.0) return 0.0;
        double d = distance(nearest_boundary(x), x);
        return F < 0.0 ? d : -d;
    }

    double boundary_distance(const Point<N>& x) const { return std::max(sdist(x), 0.0); }

    /// Root of the level set on the segment a→b, as a fraction of the segment;
    /// requires level(a) < 0 <= level(b).
    double crossing_fraction(const Point<N>& a, const Point<N>& b) const {
        auto at = [&](double t) { return level(a + t * (b - a)); };
        double lo = 0.0, hi = 1.0, flo = at(0.0), fhi = at(1.0);
        if (!(flo < 0.0) || fhi < 0.0) throw DomainError("crossing_fraction: segment does not cross the boundary");
        if (auto s = shape_->exact_sdist(a)) {
            // Ball and flat shapes: solve the distance equation in closed form via bisection on sdist,
            // which is exact up to rounding.
            (void)s;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            // Illinois-flavoured regula falsi with bisection safeguard.
            double t = lo - flo * (hi - lo) / (fhi - flo);
            if (!(t > lo && t < hi) || it % 3 == 2) t = 0.5 * (lo + hi);
            double ft = at(t);
            if (ft < 0.0) {
                lo = t;
                flo = ft;
            } else {
                hi = t;
                fhi = ft;
            }
        }
        return std::clamp(hi, 1e-12, 1.0);
    }

private:
    std::optional<Point<N>> newton_projection(const Point<N>& x, Point<N> p) const {
        using Vec = Eigen::Matrix<double, N + 1, 1>;
        using Mat = Eigen::Matrix<double, N + 1, N + 1>;
        // Land on the surface first.
        for (int k = 0; k < 20; ++k) {
            double F = level(p);
            Point<N> g = level_gradient(p);
            double gg = dot(g, g);
            if (gg < 1e-300) return std::nullopt;
            p = p - (F / gg) * g;
            if (std::abs(F) < 1e-14) break;
        }
        Point<N> g = level_gradient(p);
        double mu = -dot(p - x, g) / dot(g, g);
        auto residual = [&](const Point<N>& q, double m) {
            Vec r;
            Point<N> gq = level_gradient(q);
            for (int i = 0; i < N; ++i) r[i] = q[i] - x[i] + m * gq[i];
            r[N] = level(q);
            return r;
        };
        Vec r = residual(p, mu);
        for (int it = 0; it < 50; ++it) {
            if (r.norm() < 1e-10 * std::max(1.0, norm(x))) return p;
            Point<N> gp = level_gradient(p);
            Matrix<N> H = level_hessian(p);
            Mat J = Mat::Zero();
            J.template topLeftCorner<N, N>() = Matrix<N>::Identity() + mu * H;
            for (int i = 0; i < N; ++i) {
                J(i, N) = gp[i];
                J(N, i) = gp[i];
            }
            Vec step = J.fullPivLu().solve(-r);
            double damp = 1.0;
            for (int ls = 0; ls < 30; ++ls) {
                Point<N> q = p;
                for (int i = 0; i < N; ++i) q[i] += damp * step[i];
                double m = mu + damp * step[N];
                Vec rq = residual(q, m);
                if (rq.norm() < r.norm() || ls == 29) {
                    p = q;
                    mu = m;
                    r = rq;
                    break;
                }
                damp *= 0.5;
            }
        }
        if (r.norm() < 1e-8) return p;
        return std::nullopt;
    }

    std::shared_ptr<const Shape<N>> shape_;
    double rho_;
    double chart_bound_ = 1.0;
    std::string name_;
};

/// δ(x) = max(sdist(x), 0).
template <std::size_t N>
double boundary_distance(const Domain<N>& d, const Point<N>& x) { return d.boundary_distance(x); }

// ---------------------------------------------------------------------------
// Charts: rotation into a frame whose last axis is the outward normal at the
// chart centre, then graph flattening w = (z', g(z') - z_N).

template <std::size_t N>
class Chart {
public:
    Chart(std::shared_ptr<const Shape<N>> shape, const Point<N>& center, const Point<N>& outward_normal, double radius)
        : shape_(std::move(shape)), center_(center), radius_(radius) {
        // Orthonormal frame with the normal as last row (Gram-Schmidt from the standard basis).
        std::vector<Point<N>> rows;
        for (int k = 0; k < N && static_cast<int>(rows.size()) < N - 1; ++k) {
            Point<N> e{};
            e[k] = 1.0;
            Point<N> v = e - dot(e, outward_normal) * outward_normal;
            for (const auto& r : rows) v = v - dot(v, r) * r;
            double nv = norm(v);
            if (nv > 1e-6) rows.push_back((1.0 / nv) * v);
        }
        rows.push_back(outward_normal);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) frame_[i][j] = rows[i][j];
    }

    const Point<N>& center() const { return center_; }
    double radius() const { return radius_; }
    bool in_ball(const Point<N>& x) const { return distance(x, center_) < radius_; }

    /// Height of the boundary over the tangent coordinates zt.
    template <class T>
    T graph(const std::array<T, N - 1>& zt) const {
        std::array<double, N - 1> zd;
        for (int i = 0; i < N - 1; ++i) zd[i] = primal(zt[i]);
        double t = 0.0;
        bool ok = false;
        for (int it = 0; it < 60; ++it) {
            std::array<Nest<1>, N> p = embed<Nest<1>>(lift_all<Nest<1>>(zd), Nest<1>(t, 1.0));
            Nest<1> F = shape_->level(p);
            if (std::abs(F.d) < 1e-300) break;
            double dt = F.v / F.d;
            t -= dt;
            if (std::abs(dt) < 1e-15 * (1.0 + std::abs(t))) {
                ok = true;
                break;
            }
        }
        if (!ok) throw DomainError("chart graph: Newton did not converge");
        if constexpr (std::is_same_v<T, double>) {
            return t;
        } else {
            // Two Newton steps in T arithmetic recover derivatives through order three.
            T tt = T(t);
            for (int step = 0; step < 2; ++step) {
                std::array<Dual<T>, N - 1> zl;
                for (int i = 0; i < N - 1; ++i) zl[i] = Dual<T>(zt[i], T(0.0));
                auto p = embed<Dual<T>>(zl, Dual<T>(tt, T(1.0)));
                Dual<T> F = shape_->level(p);
                tt = tt - F.v / F.d;
            }
            return tt;
        }
    }

    template <class T>
    std::array<T, N> forward(const std::array<T, N>& x) const {
        std::array<T, N> z;
        for (int i = 0; i < N; ++i) {
            z[i] = T(0.0);
            for (int j = 0; j < N; ++j) z[i] = z[i] + frame_[i][j] * (x[j] - center_[j]);
        }
        std::array<T, N - 1> zt;
        for (int i = 0; i < N - 1; ++i) zt[i] = z[i];
        std::array<T, N> w;
        for (int i = 0; i < N - 1; ++i) w[i] = z[i];
        w[N - 1] = graph(zt) - z[N - 1];
        return w;
    }

    template <class T>
    std::array<T, N> inverse(const std::array<T, N>& w) const {
        std::array<T, N - 1> zt;
        for (int i = 0; i < N - 1; ++i) zt[i] = w[i];
        std::array<T, N> z;
        for (int i = 0; i < N - 1; ++i) z[i] = w[i];
        z[N - 1] = graph(zt) - w[N - 1];
        std::array<T, N> x;
        for (int j = 0; j < N; ++j) {
            x[j] = T(center_[j]);
            for (int i = 0; i < N; ++i) x[j] = x[j] + frame_[i][j] * z[i];
        }
        return x;
    }

    Point<N> psi(const Point<N>& x) const { return forward<double>(x); }
    Point<N> psi_inverse(const Point<N>& w) const { return inverse<double>(w); }

    /// J(i, r) = ∂_r ψ_i(x).
    Matrix<N> jacobian(const Point<N>& x) const { return jac(x, false); }
    Matrix<N> inverse_jacobian(const Point<N>& w) const { return jac(w, true); }

    /// second(x)[i](r, s) = ∂_rs ψ_i(x).
    std::array<Matrix<N>, N> second(const Point<N>& x) const { return sec(x, false); }
    std::array<Matrix<N>, N> inverse_second(const Point<N>& w) const { return sec(w, true); }

private:
    template <class T>
    static std::array<T, N - 1> lift_all(const std::array<double, N - 1>& v) {
        std::array<T, N - 1> r;
        for (int i = 0; i < N - 1; ++i) r[i] = T(v[i]);
        return r;
    }

    template <class T>
    std::array<T, N> embed(const std::array<T, N - 1>& zt, const T& zn) const {
        std::array<T, N> p;
        for (int j = 0; j < N; ++j) {
            p[j] = T(center_[j]) + frame_[N - 1][j] * zn;
            for (int i = 0; i < N - 1; ++i) p[j] = p[j] + frame_[i][j] * zt[i];
        }
        return p;
    }

    Matrix<N> jac(const Point<N>& p, bool inv) const {
        Matrix<N> J;
        for (int i = 0; i < N; ++i)
            for (int r = 0; r < N; ++r) {
                auto comp = [&](const auto& q) { return inv ? inverse(q)[i] : forward(q)[i]; };
                J(i, r) = partial(comp, p, std::array<int, 1>{r});
            }
        return J;
    }
    std::array<Matrix<N>, N> sec(const Point<N>& p, bool inv) const {
        std::array<Matrix<N>, N> S;
        for (int i = 0; i < N; ++i)
            for (int r = 0; r < N; ++r)
                for (int s = r; s < N; ++s) {
                    auto comp = [&](const auto& q) { return inv ? inverse(q)[i] : forward(q)[i]; };
                    S[i](r, s) = partial(comp, p, std::array<int, 2>{r, s});
                    S[i](s, r) = S[i](r, s);
                }
        return S;
    }

    std::shared_ptr<const Shape<N>> shape_;
    Point<N> center_;
    double radius_;
    double frame_[N][N]{};
};

/// Chart straightening the boundary near a boundary point.
template <std::size_t N>
Chart<N> chart_at(const Domain<N>& d, const Point<N>& ybar, double tol = 1e-8) {
    if (std::abs(d.sdist(ybar)) > tol) throw DomainError("chart_at: point is not on the boundary");
    return Chart<N>(d.shape_ptr(), ybar, d.outward_normal(ybar), d.rho());
}

// ---------------------------------------------------------------------------
// Sampling helpers.

template <std::size_t N>
Point<N> random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Point<N> u;
    do {
        for (auto& v : u) v = nd(rng);
    } while (norm(u) < 1e-12);
    return (1.0 / norm(u)) * u;
}

template <std::size_t N>
Point<N> random_in_box(const Point<N>& lo, const Point<N>& hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Point<N> p;
    for (int i = 0; i < N; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * ud(rng);
    return p;
}

template <std::size_t N>
Point<N> random_boundary_point(const Domain<N>& d, std::mt19937_64& rng) {
    auto [lo, hi] = d.bounding_box();
    return d.nearest_boundary(random_in_box(lo, hi, rng));
}

/// Sampled chart norm bound: the largest of the Lipschitz constants of ψ and
/// ψ⁻¹, the sup of their second partials and the α-Hölder seminorm of those,
/// floored at 1. Zeroth-order sup norms are excluded because they depend only
/// on where the chart is centred.
template <std::size_t N>
double estimate_chart_bound(const Domain<N>& d, int charts, int points_per_chart, double alpha, unsigned seed = 11) {
    std::mt19937_64 rng(seed);
    double K = 1.0;
    for (int c = 0; c < charts; ++c) {
        Point<N> yb = random_boundary_point(d, rng);
        Chart<N> ch = chart_at(d, yb, 1e-7);
        std::vector<Point<N>> xs, ws;
        std::vector<std::array<Matrix<N>, N>> sx, sw;
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        for (int k = 0; k < points_per_chart; ++k) {
            Point<N> x = yb + (ch.radius() * std::pow(ud(rng), 1.0 / N)) * random_unit<N>(rng);
            Point<N> w = ch.psi(x);
            xs.push_back(x);
            ws.push_back(w);
            Eigen::JacobiSVD<Matrix<N>> s1(ch.jacobian(x)), s2(ch.inverse_jacobian(w));
            K = std::max({K, s1.singularValues()(0), s2.singularValues()(0)});
            sx.push_back(ch.second(x));
            sw.push_back(ch.inverse_second(w));
            for (int i = 0; i < N; ++i) K = std::max({K, sx.back()[i].cwiseAbs().maxCoeff(), sw.back()[i].cwiseAbs().maxCoeff()});
        }
        for (int a = 0; a < points_per_chart; ++a)
            for (int b = a + 1; b < points_per_chart; ++b)
                for (int i = 0; i < N; ++i) {
                    double hx = std::pow(distance(xs[a], xs[b]), alpha);
                    double hw = std::pow(distance(ws[a], ws[b]), alpha);
                    if (hx > 0) K = std::max(K, (sx[a][i] - sx[b][i]).cwiseAbs().maxCoeff() / hx);
                    if (hw > 0) K = std::max(K, (sw[a][i] - sw[b][i]).cwiseAbs().maxCoeff() / hw);
                }
    }
    return K;
}

// ---------------------------------------------------------------------------
// Presets.

template <std::size_t N>
Domain<N> finish_domain(Domain<N> d, bool estimate_K = true) {
    if (estimate_K) d.set_chart_bound(estimate_chart_bound(d, 6, 10, 0.5));
    return d;
}

template <std::size_t N>
Domain<N> make_ball(double radius = 1.0, Point<N> center = {}) {
    return finish_domain(Domain<N>(std::make_shared<BallShape<N>>(center, radius), 0.4 * radius, "ball"));
}

template <std::size_t N>
Domain<N> make_ellipsoid(const Point<N>& semi_axes) {
    double amin = *std::min_element(semi_axes.begin(), semi_axes.end());
    double amax = *std::max_element(semi_axes.begin(), semi_axes.end());
    double rho = std::min(0.4 * amin * amin / amax, 0.4 * amax);
    return finish_domain(Domain<N>(std::make_shared<EllipsoidShape<N>>(Point<N>{}, semi_axes), rho, "ellipsoid"));
}

template <std::size_t N>
Domain<N> make_bumped_ball(double amplitude = 0.1, double width = 4.0) {
    return finish_domain(Domain<N>(std::make_shared<BumpedBallShape<N>>(amplitude, width), 0.2, "bumped_ball"));
}

template <std::size_t N>
Domain<N> make_half_space(double window = 2.0) {
    return finish_domain(Domain<N>(std::make_shared<HalfSpaceShape<N>>(window), 0.5 * window, "half_space"));
}

template <std::size_t N>
Domain<N> make_slab(double thickness = 1.0, double window = 2.0) {
    return finish_domain(Domain<N>(std::make_shared<SlabShape<N>>(thickness, window), 0.4 * thickness, "slab"));
}

// ---------------------------------------------------------------------------
// Collar reflection.

/// Mirror image of an exterior collar point across the boundary.
template <std::size_t N>
Point<N> collar_reflect(const Domain<N>& d, const Point<N>& x) {
    double s = d.sdist(x);
    if (!(s < 0.0 && s > -0.5 * d.rho())) throw CollarError("collar_reflect: point is outside the exterior collar");
    Point<N> nu = d.outward_normal(d.nearest_boundary(x));
    return x + (2.0 * s) * nu;
}

/// Reflection across the boundary through the nearest boundary point (either side).
template <std::size_t N>
Point<N> reflect_across_boundary(const Domain<N>& d, const Point<N>& x) {
    double s = d.sdist(x);
    Point<N> nu = d.outward_normal(d.nearest_boundary(x));
    return x + (2.0 * s) * nu;
}

// ---------------------------------------------------------------------------
// Uniformity: c-cigars realised as paths in the lattice graph of Ω.

template <std::size_t N>
class CigarSearch {
public:
    CigarSearch(const Domain<N>& d, double resolution) : lattice_() {
        auto [lo, hi] = d.bounding_box();
        lattice_.origin = lo;
        lattice_.h = resolution;
        lattice_ = lattice_.covering(lo, hi);
        depth_.assign(lattice_.size(), -1.0);
        for (std::size_t k = 0; k < lattice_.size(); ++k) {
            double s = d.sdist(lattice_.point(lattice_.unlinear(k)));
            if (s > 0.0) {
                depth_[k] = s;
                ++interior_;
            }
        }
        if (interior_ == 0) throw ResolutionError("uniformity: no lattice node inside the domain");
        // Connectivity of the interior lattice graph.
        std::size_t start = 0;
        while (depth_[start] < 0) ++start;
        if (reach(start, [](std::size_t) { return true; }) != interior_)
            throw ResolutionError("uniformity: lattice graph restricted to the domain is disconnected");
    }

    const Lattice<N>& lattice() const { return lattice_; }
    std::size_t interior_count() const { return interior_; }
    bool interior(std::size_t k) const { return depth_[k] > 0.0; }

    /// Is there a lattice path from x to y admissible for constant c?
    bool joinable(std::size_t ix, std::size_t iy, double c) const {
        Point<N> x = lattice_.point(lattice_.unlinear(ix)), y = lattice_.point(lattice_.unlinear(iy));
        Point<N> mid = 0.5 * (x + y);
        double r = distance(x, y);
        auto admissible = [&](std::size_t k) {
            Point<N> z = lattice_.point(lattice_.unlinear(k));
            if (distance(z, mid) > 0.5 * c * r) return false;
            return std::min(distance(z, x), distance(z, y)) <= c * depth_[k];
        };
        if (!admissible(ix) || !admissible(iy)) return false;
        return reach(ix, admissible, iy) > 0;
    }

    /// Smallest c (to within the factor `ratio`) admitting a cigar between two nodes.
    double pair_constant(std::size_t ix, std::size_t iy, double ratio = 1.1) const {
        double lo = 1.0, hi = 1.0;
        if (joinable(ix, iy, 1.0)) return 1.0;
        while (!joinable(ix, iy, hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e6) return kInf;
        }
        while (hi / lo > ratio) {
            double mid = std::sqrt(lo * hi);
            if (joinable(ix, iy, mid)) hi = mid;
            else lo = mid;
        }
        return hi;
    }

private:
    template <class Pred>
    std::size_t reach(std::size_t start, Pred&& ok, std::optional<std::size_t> target = std::nullopt) const {
        std::vector<char> seen(lattice_.size(), 0);
        std::deque<std::size_t> q{start};
        seen[start] = 1;
        std::size_t count = 0;
        while (!q.empty()) {
            std::size_t k = q.front();
            q.pop_front();
            ++count;
            if (target && k == *target) return 1;
            NodeIndex<N> idx = lattice_.unlinear(k);
            for (int a = 0; a < N; ++a)
                for (int s : {-1, 1}) {
                    NodeIndex<N> nb = shifted<N>(idx, a, s);
                    if (!lattice_.contains(nb)) continue;
                    std::size_t m = lattice_.linear(nb);
                    if (seen[m] || depth_[m] <= 0.0 || !ok(m)) continue;
                    seen[m] = 1;
                    q.push_back(m);
                }
        }
        return target ? 0 : count;
    }

    Lattice<N> lattice_;
    std::vector<double> depth_;
    std::size_t interior_ = 0;
};

/// Largest sampled pair constant; pairs drawn uniformly from interior nodes.
template <std::size_t N>
double uniformity_constant(const Domain<N>& d, double grid_resolution, std::size_t pair_samples, unsigned seed = 1) {
    CigarSearch<N> search(d, grid_resolution);
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < search.lattice().size(); ++k)
        if (search.interior(k)) nodes.push_back(k);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    double c = 1.0;
    for (std::size_t s = 0; s < pair_samples; ++s) {
        std::size_t a = nodes[pick(rng)], b = nodes[pick(rng)];
        if (a == b) continue;
        c = std::max(c, search.pair_constant(a, b));
    }
    return c;
}

/// Same, for explicit point pairs snapped to their nearest interior nodes.
template <std::size_t N>
double uniformity_constant(const Domain<N>& d, double grid_resolution, const std::vector<std::pair<Point<N>, Point<N>>>& pairs) {
    CigarSearch<N> search(d, grid_resolution);
    const auto& L = search.lattice();
    double c = 1.0;
    for (const auto& [x, y] : pairs) {
        std::size_t a = L.linear(L.nearest(x)), b = L.linear(L.nearest(y));
        if (!search.interior(a) || !search.interior(b) || a == b) continue;
        c = std::max(c, search.pair_constant(a, b));
    }
    return c;
}

/// Closed-form upper bound 200·c_n³·K⁶·diam/ρ.
template <std::size_t N>
double uniformity_bound(const Domain<N>& d, double half_space_constant = 2.0) {
    double K = d.chart_bound();
    return 200.0 * std::pow(half_space_constant, 3) * std::pow(K, 6) * d.diam() / d.rho();
}

/// Closed-form upper bound 8·K⁴·diam/ρ.
template <std::size_t N>
double coplumpness_bound(const Domain<N>& d) {
    return 8.0 * std::pow(d.chart_bound(), 4) * d.diam() / d.rho();
}

// ---------------------------------------------------------------------------
// Coplumpness.

template <std::size_t N>
double coplumpness_constant(const Domain<N>& d, std::size_t samples, unsigned seed = 2, int lattice_points = 9) {
    std::mt19937_64 rng(seed);
    auto [lo, hi] = d.bounding_box();
    double scale = d.bounded() ? d.diam() : distance(lo, hi);
    Point<N> wlo, whi;
    for (int i = 0; i < N; ++i) {
        wlo[i] = lo[i] - 0.5 * scale;
        whi[i] = hi[i] + 0.5 * scale;
    }
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    // Candidate offsets: a regular lattice inside the closed unit ball.
    std::vector<Point<N>> offsets;
    std::array<int, N> idx{};
    const int m = lattice_points;
    while (true) {
        Point<N> o;
        for (int i = 0; i < N; ++i) o[i] = -1.0 + 2.0 * idx[i] / (m - 1);
        if (norm(o) <= 1.0 + 1e-12) offsets.push_back(o);
        int a = 0;
        while (a < N && ++idx[a] == m) idx[a++] = 0;
        if (a == N) break;
    }
    double c = 1.0;
    std::size_t taken = 0;
    while (taken < samples) {
        Point<N> x = random_in_box(wlo, whi, rng);
        if (d.sdist(x) > 0.0) continue;
        ++taken;
        double r = scale * std::pow(10.0, -2.0 * ud(rng));
        double best = 0.0;
        for (const auto& o : offsets) best = std::max(best, std::max(-d.sdist(x + r * o), 0.0));
        c = std::max(c, best > 0.0 ? r / best : kInf);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Stratified pair sampling.

struct PairStrata {
    std::vector<double> separation_edges{1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
    std::vector<double> ratio_edges{0.01, 0.1, 0.5, 1.0, 4.0};  // buckets of δ(x)/|x−y|
    std::size_t per_stratum = 10;
};

template <std::size_t N>
struct PairSamplingOptions {
    const Lattice<N>* lattice = nullptr;  // snap both points to lattice nodes
    double min_depth_x = 0.0;
    double min_depth_y = 0.0;
    double min_separation = 0.0;
    std::size_t source_pool = 0;  // 0: fresh x per pair
    std::size_t max_attempts = 4000;
};

template <std::size_t N>
struct SamplePair {
    Point<N> x, y;
    int shell = 0;
    int bucket = 0;
};

namespace detail {
inline int find_bucket(const std::vector<double>& edges, double v) {
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (v >= edges[i] && v < edges[i + 1]) return static_cast<int>(i);
    return -1;
}
}  // namespace detail

/// Deterministic stratified sample of pairs in Ω×Ω, strata being dyadic
/// shells of |x−y| crossed with buckets of δ(x)/|x−y|. Strata that cannot be
/// filled within the attempt budget come back short.
template <std::size_t N>
std::vector<SamplePair<N>> sample_pairs(const Domain<N>& d, const PairStrata& strata, unsigned seed,
                                        const PairSamplingOptions<N>& opt = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    auto snap = [&](const Point<N>& p) { return opt.lattice ? opt.lattice->point(opt.lattice->nearest(p)) : p; };
    auto [blo, bhi] = d.bounding_box();
    double max_depth = 0.5 * std::min(d.bounded() ? d.diam() : kInf, distance(blo, bhi));

    std::vector<Point<N>> pool;
    for (std::size_t tries = 0; pool.size() < opt.source_pool && tries < 100 * (opt.source_pool + 1); ++tries) {
        double lo = std::max(opt.min_depth_x, 1e-3 * max_depth);
        double depth = lo * std::pow(max_depth / lo, ud(rng));
        Point<N> b = random_boundary_point(d, rng);
        Point<N> x = snap(b - depth * d.outward_normal(b));
        if (d.sdist(x) >= std::max(opt.min_depth_x, 1e-12)) pool.push_back(x);
    }

    std::vector<SamplePair<N>> out;
    const int shells = static_cast<int>(strata.separation_edges.size()) - 1;
    const int buckets = static_cast<int>(strata.ratio_edges.size()) - 1;
    for (int i = 0; i < shells; ++i)
        for (int j = 0; j < buckets; ++j) {
            std::size_t got = 0;
            for (std::size_t att = 0; att < opt.max_attempts * strata.per_stratum && got < strata.per_stratum; ++att) {
                double r0 = strata.separation_edges[i], r1 = strata.separation_edges[i + 1];
                double q0 = strata.ratio_edges[j], q1 = strata.ratio_edges[j + 1];
                Point<N> x;
                double r;
                if (!pool.empty()) {
                    x = pool[static_cast<std::size_t>(ud(rng) * pool.size()) % pool.size()];
                    double dx = d.sdist(x);
                    double lo = std::max(r0, dx / q1), hi = std::min(r1, dx / q0);
                    if (!(lo < hi)) continue;
                    r = lo * std::pow(hi / lo, ud(rng));
                } else {
                    r = r0 * std::pow(r1 / r0, ud(rng));
                    // Log-uniform in the bucket; a bucket starting at 0 spans three decades below q1.
                    double qa = q0 > 0.0 ? q0 : 1e-3 * q1;
                    double q = qa * std::pow(q1 / qa, ud(rng));
                    double depth = q * r;
                    if (depth > max_depth) continue;
                    Point<N> b = random_boundary_point(d, rng);
                    x = snap(b - depth * d.outward_normal(b));
                }
                Point<N> y = snap(x + r * random_unit<N>(rng));
                double dx = d.sdist(x), dy = d.sdist(y), rr = distance(x, y);
                if (!(dx > 0.0) || !(dy > 0.0) || rr <= 0.0) continue;
                if (dx < opt.min_depth_x || dy < opt.min_depth_y || rr < opt.min_separation) continue;
                if (detail::find_bucket(strata.separation_edges, rr) != i) continue;
                if (detail::find_bucket(strata.ratio_edges, dx / rr) != j) continue;
                out.push_back({x, y, i, j});
                ++got;
            }
        }
    return out;
}

}  // namespace greenlab

#endif  // GREENLAB_GEOMETRY_HPP
