#ifndef GREENLAB_ELLIPTIC_HPP
#define GREENLAB_ELLIPTIC_HPP

// Coefficient fields a^{ij} of L u = Σ ∂_i(a^{ij} ∂_j u), their strong form
// and their behaviour under boundary-straightening charts.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "greenlab/geometry.hpp"

namespace greenlab {

template <std::size_t N> using Vector = Eigen::Matrix<double, N, 1>;

template <std::size_t N>
class CoefficientField {
public:
    virtual ~CoefficientField() = default;
    virtual std::string name() const = 0;
    /// a(x), symmetrized.
    virtual Matrix<N> tensor(const Point<N>& x) const = 0;
    /// ∂_k a(x), exact.
    virtual Matrix<N> derivative(const Point<N>& x, int k) const = 0;
    virtual bool diagonal() const = 0;
    virtual bool constant() const = 0;

    double alpha = 0.5;
    double lambda = 1.0;   // declared ellipticity
    double Lambda = 1.0;   // declared C^{1,α} bound
};

/// Field given by a generic closed-form functor `Fn::operator()<T>(x) -> array<array<T,N>,N>`.
/// Derivatives come from one forward-mode pass per direction.
template <std::size_t N, class Fn>
class ClosedFormField final : public CoefficientField<N> {
public:
    ClosedFormField(std::string name, Fn fn, bool diagonal, bool constant)
        : name_(std::move(name)), fn_(std::move(fn)), diagonal_(diagonal), constant_(constant) {}

    std::string name() const override { return name_; }
    Matrix<N> tensor(const Point<N>& x) const override {
        auto a = fn_(x);
        Matrix<N> m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = 0.5 * (a[i][j] + a[j][i]);
        return m;
    }
    Matrix<N> derivative(const Point<N>& x, int k) const override {
        std::array<Dual<double>, N> q;
        for (int i = 0; i < N; ++i) q[i] = Dual<double>(x[i], i == k ? 1.0 : 0.0);
        auto a = fn_(q);
        Matrix<N> m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = 0.5 * (a[i][j].d + a[j][i].d);
        return m;
    }
    bool diagonal() const override { return diagonal_; }
    bool constant() const override { return constant_; }

private:
    std::string name_;
    Fn fn_;
    bool diagonal_, constant_;
};

template <std::size_t N, class Fn>
std::shared_ptr<CoefficientField<N>> make_field(std::string name, Fn fn, bool diagonal, bool constant,
                                                double lambda, double Lambda) {
    auto f = std::make_shared<ClosedFormField<N, Fn>>(std::move(name), std::move(fn), diagonal, constant);
    f->lambda = lambda;
    f->Lambda = Lambda;
    return f;
}

template <class T, std::size_t N> using Tensor = std::array<std::array<T, N>, N>;

template <std::size_t N>
std::shared_ptr<CoefficientField<N>> identity_field() {
    return make_field<N>("identity", [](const auto& x) {
        using T = std::decay_t<decltype(x[0])>;
        Tensor<T, N> a{};
        for (int i = 0; i < N; ++i) a[i][i] = T(1.0);
        return a;
    }, true, true, 1.0, 1.0);
}

template <std::size_t N>
std::shared_ptr<CoefficientField<N>> constant_diagonal_field(const Point<N>& diag) {
    double lo = *std::min_element(diag.begin(), diag.end());
    double hi = *std::max_element(diag.begin(), diag.end());
    return make_field<N>("constant_diagonal", [diag](const auto& x) {
        using T = std::decay_t<decltype(x[0])>;
        Tensor<T, N> a{};
        for (int i = 0; i < N; ++i) a[i][i] = T(diag[i]);
        return a;
    }, true, true, lo, hi);
}

/// (1 + ε sin(ω x₁)) I.
template <std::size_t N>
std::shared_ptr<CoefficientField<N>> sine_perturbed_field(double eps, double omega) {
    return make_field<N>("sine_perturbed", [eps, omega](const auto& x) {
        using T = std::decay_t<decltype(x[0])>;
        Tensor<T, N> a{};
        T s = 1.0 + eps * sin(x[0] * omega);
        for (int i = 0; i < N; ++i) a[i][i] = s;
        return a;
    }, true, false, 1.0 - std::abs(eps), 1.0 + std::abs(eps) * (1.0 + std::abs(omega) + omega * omega));
}

/// diag(1 + slope·x₁, 1, …, 1); elliptic where |slope·x₁| < 1.
template <std::size_t N>
std::shared_ptr<CoefficientField<N>> diag_linear_field(double slope, double reach = 1.0) {
    return make_field<N>("diag_linear", [slope](const auto& x) {
        using T = std::decay_t<decltype(x[0])>;
        Tensor<T, N> a{};
        for (int i = 0; i < N; ++i) a[i][i] = T(1.0);
        a[0][0] = 1.0 + x[0] * slope;
        return a;
    }, true, false, 1.0 - std::abs(slope) * reach, 1.0 + 2.0 * std::abs(slope) * reach);
}

/// Q diag(1 + ε sin(ω x₁), 1.5, 1, …) Qᵀ with Q a fixed rotation in the (x₁,x₂) and (x₂,x₃) planes.
template <std::size_t N>
std::shared_ptr<CoefficientField<N>> rotated_field(double eps, double omega, double angle = 0.5) {
    Matrix<N> Q = Matrix<N>::Identity();
    auto plane = [&](int p, int q, double t) {
        Matrix<N> G = Matrix<N>::Identity();
        G(p, p) = std::cos(t);
        G(q, q) = std::cos(t);
        G(p, q) = -std::sin(t);
        G(q, p) = std::sin(t);
        Q = G * Q;
    };
    plane(0, 1, angle);
    if (N > 2) plane(1, 2, 0.7 * angle);
    return make_field<N>("rotated", [eps, omega, Q](const auto& x) {
        using T = std::decay_t<decltype(x[0])>;
        std::array<T, N> d;
        for (int i = 0; i < N; ++i) d[i] = T(1.0);
        d[0] = 1.0 + eps * sin(x[0] * omega);
        if (N > 1) d[1] = T(1.5);
        Tensor<T, N> a{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                a[i][j] = T(0.0);
                for (int k = 0; k < N; ++k) a[i][j] = a[i][j] + d[k] * (Q(i, k) * Q(j, k));
            }
        return a;
    }, false, false, 1.0 - std::abs(eps), 1.5 + std::abs(eps) * (1.0 + std::abs(omega) + omega * omega));
}

// ---------------------------------------------------------------------------

template <std::size_t N>
struct EllipticityReport {
    double lambda_measured = kInf;
    Point<N> x{};
    Point<N> xi{};
    bool ok = true;
};

/// Minimum of the quadratic form over sample points in the box, minimizing
/// over unit ξ exactly through the smallest eigenpair.
template <std::size_t N>
EllipticityReport<N> ellipticity_constant(const CoefficientField<N>& a, std::size_t samples, const Point<N>& lo,
                                          const Point<N>& hi, unsigned seed = 3) {
    EllipticityReport<N> r;
    std::mt19937_64 rng(seed);
    auto visit = [&](const Point<N>& x) {
        Eigen::SelfAdjointEigenSolver<Matrix<N>> es(a.tensor(x));
        double m = es.eigenvalues()(0);
        if (m < r.lambda_measured) {
            r.lambda_measured = m;
            r.x = x;
            for (int i = 0; i < N; ++i) r.xi[i] = es.eigenvectors()(i, 0);
        }
    };
    int per_axis = std::max(2, static_cast<int>(std::round(std::pow(static_cast<double>(samples), 1.0 / N))));
    std::array<int, N> idx{};
    while (true) {
        Point<N> x;
        for (int i = 0; i < N; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (per_axis - 1);
        visit(x);
        int k = 0;
        while (k < N && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == N) break;
    }
    for (std::size_t s = 0; s < samples; ++s) visit(random_in_box(lo, hi, rng));
    r.ok = r.lambda_measured >= a.lambda - 1e-9;
    return r;
}

template <std::size_t N>
EllipticityReport<N> ellipticity_constant(const CoefficientField<N>& a, std::size_t samples) {
    Point<N> lo, hi;
    lo.fill(-2.0);
    hi.fill(2.0);
    return ellipticity_constant(a, samples, lo, hi);
}

// ---------------------------------------------------------------------------

template <std::size_t N>
struct StrongForm {
    std::function<Matrix<N>(const Point<N>&)> a;
    std::function<Vector<N>(const Point<N>&)> b;
};

/// b^i = Σ_j ∂_j a^{ji}.
template <std::size_t N>
Vector<N> divergence_of_rows(const CoefficientField<N>& a, const Point<N>& x) {
    Vector<N> b = Vector<N>::Zero();
    for (int j = 0; j < N; ++j) {
        Matrix<N> dj = a.derivative(x, j);
        for (int i = 0; i < N; ++i) b[i] += dj(j, i);
    }
    return b;
}

template <std::size_t N>
StrongForm<N> to_strong_form(std::shared_ptr<const CoefficientField<N>> a) {
    return {[a](const Point<N>& x) { return a->tensor(x); },
            [a](const Point<N>& x) { return divergence_of_rows(*a, x); }};
}

/// ψ(x) = R(x − c); identity for R = I, c = 0.
template <std::size_t N>
struct AffineChart {
    Matrix<N> R = Matrix<N>::Identity();
    Point<N> c{};
    double radius = kInf;

    bool in_ball(const Point<N>& x) const { return distance(x, c) < radius; }
    Point<N> psi(const Point<N>& x) const {
        Vector<N> v = R * Eigen::Map<const Vector<N>>((x - c).data());
        Point<N> r;
        for (int i = 0; i < N; ++i) r[i] = v[i];
        return r;
    }
    Matrix<N> jacobian(const Point<N>&) const { return R; }
    std::array<Matrix<N>, N> second(const Point<N>&) const {
        std::array<Matrix<N>, N> s;
        for (auto& m : s) m.setZero();
        return s;
    }
};

template <std::size_t N>
struct TransformedCoefficients {
    Point<N> y{};
    Matrix<N> a;
    Vector<N> b;
};

/// Coefficients of the pulled-back strong-form operator at y = ψ(x):
///   ã^{ij} = Σ a^{rs} ∂_rψ_i ∂_sψ_j,
///   b̃^i = Σ a^{rs} ∂_rsψ_i + Σ_r (Σ_s ∂_s a^{sr}) ∂_rψ_i.
template <std::size_t N, class ChartT>
TransformedCoefficients<N> transform_coefficients(const CoefficientField<N>& a, const ChartT& chart, const Point<N>& x) {
    if (!chart.in_ball(x)) throw DomainError("transform_coefficients: point outside the chart ball");
    Matrix<N> A = a.tensor(x);
    Matrix<N> J = chart.jacobian(x);
    auto S = chart.second(x);
    Vector<N> div = divergence_of_rows(a, x);
    TransformedCoefficients<N> t;
    t.y = chart.psi(x);
    t.a = J * A * J.transpose();
    t.a = 0.5 * (t.a + t.a.transpose()).eval();
    for (int i = 0; i < N; ++i) t.b[i] = (A.cwiseProduct(S[i])).sum() + J.row(i).dot(div);
    return t;
}

template <std::size_t N>
struct TransformedEllipticityReport {
    double lambda_tilde = kInf;   // sampled minimum of the transformed form
    double upper = 0.0;           // sampled maximum eigenvalue
    double upper_bound = 0.0;     // K² n² Λ_max(a)
    Point<N> witness{};
    std::size_t samples = 0;
    bool pass = false;
};

template <std::size_t N>
TransformedEllipticityReport<N> check_transformed_ellipticity(const std::function<Matrix<N>(const Point<N>&)>& a_tilde,
                                                              double lambda, double K,
                                                              const std::vector<Point<N>>& points) {
    TransformedEllipticityReport<N> r;
    r.upper_bound = K * K * N * N;
    for (const auto& y : points) {
        Eigen::SelfAdjointEigenSolver<Matrix<N>> es(a_tilde(y));
        if (es.eigenvalues()(0) < r.lambda_tilde) {
            r.lambda_tilde = es.eigenvalues()(0);
            r.witness = y;
        }
        r.upper = std::max(r.upper, es.eigenvalues()(N - 1));
    }
    r.upper_bound *= std::max(lambda, r.upper / std::max(1e-300, K * K * N * N));
    r.samples = points.size();
    r.pass = r.samples > 0 && r.lambda_tilde > 0.0;
    return r;
}

// ---------------------------------------------------------------------------

namespace detail {
template <std::size_t N>
std::vector<Point<N>> interior_samples(const Domain<N>& d, std::size_t count, std::mt19937_64& rng) {
    auto [lo, hi] = d.bounding_box();
    std::vector<Point<N>> pts;
    while (pts.size() < count) {
        Point<N> p = random_in_box(lo, hi, rng);
        if (d.sdist(p) > 0.0) pts.push_back(p);
    }
    return pts;
}
}  // namespace detail

/// Sampled |a^{ij}|^{(0)}_{0,α;D} + |b^i|^{(1)}_{0,α;D} with δ̄ the distance to ∂D;
/// a lower bound on the true norm.
template <std::size_t N>
double holder_norm(const CoefficientField<N>& a, const Domain<N>& d, std::size_t samples, unsigned seed = 5) {
    std::mt19937_64 rng(seed);
    auto pts = detail::interior_samples(d, samples, rng);
    std::vector<Matrix<N>> A;
    std::vector<Vector<N>> B;
    std::vector<double> del;
    for (const auto& p : pts) {
        A.push_back(a.tensor(p));
        B.push_back(divergence_of_rows(a, p));
        del.push_back(d.boundary_distance(p));
    }
    const double al = a.alpha;
    double a0 = 0.0, aH = 0.0, b0 = 0.0, bH = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        a0 = std::max(a0, A[i].cwiseAbs().maxCoeff());
        b0 = std::max(b0, del[i] * B[i].cwiseAbs().maxCoeff());
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double r = std::pow(distance(pts[i], pts[j]), al);
            if (r <= 0.0) continue;
            double dm = std::min(del[i], del[j]);
            aH = std::max(aH, std::pow(dm, al) * (A[i] - A[j]).cwiseAbs().maxCoeff() / r);
            bH = std::max(bH, std::pow(dm, 1.0 + al) * (B[i] - B[j]).cwiseAbs().maxCoeff() / r);
        }
    }
    return a0 + aH + b0 + bH;
}

}  // namespace greenlab

#endif  // GREENLAB_ELLIPTIC_HPP
