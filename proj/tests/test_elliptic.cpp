#include <gtest/gtest.h>

#include "greenlab/elliptic.hpp"
#include "greenlab/geometry.hpp"

using namespace greenlab;
using P = Point<3>;

namespace {
std::vector<std::shared_ptr<CoefficientField<3>>> presets() {
    return {identity_field<3>(), constant_diagonal_field<3>({1.0, 2.0, 0.5}), sine_perturbed_field<3>(0.2, 2.0),
            diag_linear_field<3>(0.3, 1.5), rotated_field<3>(0.2, 2.0, 0.5)};
}
}  // namespace

TEST(Coefficients, DerivativesMatchDifferences) {
    std::mt19937_64 rng(1);
    for (const auto& a : presets()) {
        for (int s = 0; s < 5; ++s) {
            P x = random_in_box<3>({-1, -1, -1}, {1, 1, 1}, rng);
            for (int k = 0; k < 3; ++k) {
                P xp = x, xm = x;
                xp[k] += 1e-6;
                xm[k] -= 1e-6;
                Matrix<3> fd = (a->tensor(xp) - a->tensor(xm)) / 2e-6;
                EXPECT_LT((fd - a->derivative(x, k)).cwiseAbs().maxCoeff(), 1e-7) << a->name();
            }
        }
    }
}

TEST(Coefficients, SymmetricAndElliptic) {
    for (const auto& a : presets()) {
        Matrix<3> A = a->tensor({0.3, -0.2, 0.1});
        EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        // diag_linear is declared elliptic for |x₁| ≤ reach = 1.5.
        auto r = ellipticity_constant(*a, 500, P{-1.5, -1.5, -1.5}, P{1.5, 1.5, 1.5});
        EXPECT_TRUE(r.ok) << a->name() << " measured " << r.lambda_measured << " declared " << a->lambda;
        EXPECT_GT(r.lambda_measured, 0.0);
    }
}

TEST(Coefficients, PresetFlags) {
    EXPECT_TRUE(identity_field<3>()->constant());
    EXPECT_TRUE(identity_field<3>()->diagonal());
    EXPECT_TRUE(diag_linear_field<3>(0.3)->diagonal());
    EXPECT_FALSE(diag_linear_field<3>(0.3)->constant());
    EXPECT_FALSE(rotated_field<3>(0.2, 2.0)->diagonal());
    EXPECT_EQ(identity_field<3>()->tensor({0.5, 0.5, 0.5}), Matrix<3>::Identity());
}

TEST(StrongForm, DriftIsDivergenceOfRows) {
    auto a = diag_linear_field<3>(0.3, 1.5);
    auto sf = to_strong_form<3>(a);
    P x{0.2, -0.4, 0.3};
    for (int i = 0; i < 3; ++i) {
        P xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        double fd = (a->tensor(xp)(i, i) - a->tensor(xm)(i, i)) / 2e-6;
        EXPECT_NEAR(sf.b(x)[i], fd, 1e-7);
    }
    auto c = to_strong_form<3>(constant_diagonal_field<3>({1.0, 2.0, 3.0}));
    EXPECT_EQ(c.b(x), Vector<3>::Zero());
}

TEST(Transform, IdentityChartReproducesStrongForm) {
    AffineChart<3> id;
    std::mt19937_64 rng(2);
    for (const auto& a : presets()) {
        auto sf = to_strong_form<3>(a);
        for (int s = 0; s < 10; ++s) {
            P x = random_in_box<3>({-1, -1, -1}, {1, 1, 1}, rng);
            auto t = transform_coefficients(*a, id, x);
            EXPECT_EQ(t.a, sf.a(x)) << a->name();
            EXPECT_EQ(t.b, sf.b(x)) << a->name();
            EXPECT_EQ(t.y, x);
        }
    }
}

TEST(Transform, RotationConjugatesTheTensor) {
    AffineChart<3> rot;
    double c = std::cos(0.7), s = std::sin(0.7);
    rot.R << c, -s, 0, s, c, 0, 0, 0, 1;
    auto a = constant_diagonal_field<3>({1.0, 2.0, 0.5});
    auto t = transform_coefficients(*a, rot, P{0.1, 0.2, 0.3});
    Matrix<3> expect = rot.R * a->tensor({}) * rot.R.transpose();
    EXPECT_LT((t.a - expect).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(t.b.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Transform, BoundaryChartsStayElliptic) {
    std::vector<Domain<3>> domains{make_ball<3>(), make_ellipsoid<3>({1.0, 0.8, 0.6}), make_bumped_ball<3>()};
    std::mt19937_64 rng(3);
    for (const auto& d : domains) {
        P yb = random_boundary_point(d, rng);
        auto ch = chart_at(d, yb);
        std::vector<P> xs;
        for (int k = 0; k < 20; ++k) xs.push_back(yb + 0.5 * ch.radius() * random_unit<3>(rng));
        for (const auto& a : presets()) {
            std::vector<P> ys;
            std::vector<Matrix<3>> as;
            for (const auto& x : xs) {
                auto t = transform_coefficients(*a, ch, x);
                ys.push_back(t.y);
                as.push_back(t.a);
            }
            auto lookup = [&](const P& y) {
                for (std::size_t i = 0; i < ys.size(); ++i)
                    if (ys[i] == y) return as[i];
                return Matrix<3>(Matrix<3>::Zero());
            };
            auto r = check_transformed_ellipticity<3>(lookup, a->lambda, d.chart_bound(), ys);
            EXPECT_TRUE(r.pass) << d.name() << "/" << a->name() << " lambda~ " << r.lambda_tilde;
            EXPECT_LE(r.upper, r.upper_bound);
        }
    }
}

TEST(Transform, RejectsPointsOutsideTheChart) {
    auto d = make_ball<3>();
    auto ch = chart_at(d, P{1, 0, 0});
    EXPECT_THROW(transform_coefficients(*identity_field<3>(), ch, P{-1, 0, 0}), DomainError);
}

TEST(HolderNorm, FiniteAndOrdered) {
    auto d = make_ball<3>();
    double flat = holder_norm(*identity_field<3>(), d, 200);
    double wavy = holder_norm(*sine_perturbed_field<3>(0.2, 2.0), d, 200);
    EXPECT_TRUE(std::isfinite(wavy));
    EXPECT_GT(wavy, flat);
}
