#include <gtest/gtest.h>

#include "greenlab/kernel_analysis.hpp"

using namespace greenlab;
using P = Point<3>;
using MI = MultiIndex<3>;

namespace {
auto everywhere = [](const P&) { return true; };

std::vector<SamplePair<3>> analytic_pairs(const Domain<3>& b) {
    PairStrata st;
    st.per_stratum = 8;
    st.separation_edges = {0.25, 0.5, 1.0, 2.0};
    st.ratio_edges = {0.0, 0.05, 0.2, 1.0, 10.0};
    PairSamplingOptions<3> po;
    po.min_separation = 0.05;
    po.min_depth_y = 0.02;
    return sample_pairs(b, st, 7, po);
}

double newton_d11(const P& x, const P& y) {
    // ∂²/∂x₁² of 1/(4π|x−y|).
    P d = x - y;
    double r2 = dot(d, d), r = std::sqrt(r2);
    return (3.0 * d[0] * d[0] / r2 - 1.0) / (4.0 * kPi * r2 * r);
}
}  // namespace

TEST(DifferenceOperator, BinomialSignsAndPolynomials) {
    auto cube = [](const P& x) { return x[0] * x[0] * x[0]; };
    P h{0.1, 0.0, 0.0}, y{0.2, 0.3, -0.1};
    // Δ¹f = f(y+h) − f(y).
    EXPECT_NEAR(difference_operator<3>(cube, everywhere, 1, h, y), cube(y + h) - cube(y), 1e-15);
    // Δ³ of a cubic in one variable is 6h³; Δ³ of any quadratic vanishes.
    EXPECT_NEAR(difference_operator<3>(cube, everywhere, 3, h, y), 6e-3, 1e-14);
    auto quad = [](const P& x) { return x[0] * x[1] - 3.0 * x[2] * x[2] + x[0] + 2.0; };
    P g{0.05, -0.1, 0.2};
    EXPECT_NEAR(difference_operator<3>(quad, everywhere, 3, g, y), 0.0, 1e-14);
    // A progression that leaves the region contributes nothing.
    auto ball = [](const P& x) { return norm(x) < 0.5; };
    EXPECT_EQ(difference_operator<3>(cube, ball, 3, P{0.2, 0, 0}, P{0, 0, 0}), 0.0);
    EXPECT_NE(difference_operator<3>(cube, ball, 3, P{0.1, 0, 0}, P{0, 0, 0}), 0.0);
}

TEST(Kernels, ClosedFormDerivativesMatchTheOracle) {
    auto b = make_ball<3>();
    auto k = ball_oracle_kernel(b);
    P x{0.2, -0.1, 0.3}, y{-0.4, 0.25, 0.1};
    EXPECT_NEAR(k(x, y), ball_green(x, y), 1e-15);
    for (auto beta : {MI{1, 0, 0}, MI{0, 2, 0}, MI{1, 0, 1}})
        EXPECT_NEAR(k.d(x, y, MI{}, beta), ball_green_derivative(x, y, MI{}, beta), 1e-12);
    // Finite differences in y.
    const double e = 1e-5;
    P yp = y, ym = y;
    yp[2] += e;
    ym[2] -= e;
    EXPECT_NEAR(k.d(x, y, MI{}, MI{0, 0, 1}), (k(x, yp) - k(x, ym)) / (2 * e), 1e-8);
    EXPECT_NEAR(bare_kernel().d(x, y, MI{2, 0, 0}, MI{}), newton_d11(x, y), 1e-12);
}

TEST(Kernels, MissingDerivativeIsACapabilityError) {
    auto k = signed_angular_kernel<3>();
    EXPECT_THROW(k.d(P{0, 0, 0}, P{1, 0, 0}, MI{}, MI{1, 0, 0}), CapabilityError);
    auto t = truncated_singular_kernel<3>();
    EXPECT_EQ(t(P{0, 0, 0}, P{0.5, 0, 0}), 0.0);
    EXPECT_NEAR(t(P{0, 0, 0}, P{2, 0, 0}), 0.125, 1e-15);
}

TEST(Kernels, GreenTableKernelIsExactOnNodes) {
    auto b = make_ball<3>();
    DiscretizeOptions o;
    o.enforce_resolution = false;
    auto op = discretize<3>(b, identity_field<3>(), box_lattice(b, 9), o);
    auto gt = std::make_shared<GreenTable<3>>(op);
    auto k = green_kernel<3>(gt);
    const auto& g = gt->grid();
    P x = g.point_of_row(3), y = g.point_of_row(g.unknowns() - 5);
    EXPECT_EQ(k(x, y), gt->value_rows(3, g.unknowns() - 5));
    EXPECT_THROW(k.d(x + P{0.01, 0, 0}, y, MI{}, MI{1, 0, 0}), CapabilityError);
    // Off-node values interpolate and stay near the node value.
    EXPECT_NEAR(k(x + P{1e-6, 0, 0}, y), k(x, y), 1e-4);
}

TEST(Decay, ZeroKernelPassesWithZeroConstant) {
    auto b = make_ball<3>();
    auto rep = verify_decay(zero_kernel<3>(), b, MI{}, analytic_pairs(b), VerifyOptions{});
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.constant, 0.0);
    EXPECT_GT(rep.samples, 0u);
}

TEST(Decay, OraclePassesAndBareKernelFails) {
    auto b = make_ball<3>();
    auto pairs = analytic_pairs(b);
    VerifyOptions opt;
    for (auto beta : {MI{}, MI{1, 0, 0}, MI{1, 0, 1}}) {
        auto rep = verify_decay(ball_oracle_kernel(b), b, beta, pairs, opt);
        EXPECT_TRUE(rep.pass) << order(beta) << " C* " << rep.constant << " growth " << rep.stratum_growth;
        EXPECT_LT(rep.stratum_growth, 10.0);
    }
    auto bare = verify_decay(bare_kernel(), b, MI{}, pairs, opt);
    EXPECT_FALSE(bare.pass);
    EXPECT_GE(bare.stratum_growth, 10.0);
}

TEST(Report, NonFiniteRatiosFail) {
    auto b = make_ball<3>();
    std::vector<RatioSample<3>> s{make_sample(b, 1.0, {P{0, 0, 0}, P{0.5, 0, 0}}),
                                  make_sample(b, std::nan(""), {P{0, 0, 0}, P{0, 0.5, 0}})};
    auto rep = finalize_report<3>("t", "t", "k", s, VerifyOptions{});
    EXPECT_FALSE(rep.pass);
    EXPECT_TRUE(stable_within(1.0, 1.9, 2.0));
    EXPECT_FALSE(stable_within(1.0, 2.1, 2.0));
    EXPECT_TRUE(stable_within(0.0, 0.0, 2.0));
    EXPECT_FALSE(stable_within(0.0, 1.0, 2.0));
}

TEST(Holder, TriplesRespectTheDisplacementBound) {
    auto b = make_ball<3>();
    auto pairs = analytic_pairs(b);
    auto tr = sample_triples(b, pairs, 100, 3, static_cast<const Lattice<3>*>(nullptr), 0.01);
    ASSERT_EQ(tr.size(), 100u);
    for (const auto& t : tr) {
        EXPECT_LE(norm(t.h), 0.5 * distance(t.x, t.y) + 1e-15);
        EXPECT_GE(b.sdist(t.y + t.h), 0.01);
    }
    auto rep = verify_holder(ball_oracle_kernel(b), b, {MI{2, 0, 0}, MI{1, 1, 0}, MI{0, 0, 2}}, tr, VerifyOptions{});
    EXPECT_TRUE(std::isfinite(rep.constant));
    EXPECT_GT(rep.constant, 0.0);
}

TEST(Standard, QuadraticKernelHasNoSemilocalPart) {
    auto b = make_ball<3>();
    // Δ³ annihilates quadratics, so only the size term x ↦ |x−y|² / |x−y|^{−1} remains.
    auto k = quadratic_kernel<3>();
    EXPECT_LT(semilocal_integral<3>([&](const P& y) { return k(P{0.5, 0, 0}, y); }, P{0, 0, 0}, 0.1, 2, 0.5, 6, 1),
              1e-9);
    auto cubic = [](const P& y) { return y[0] * y[0] * y[0]; };
    EXPECT_GT(semilocal_integral<3>(cubic, P{0, 0, 0}, 0.1, 2, 0.5, 6, 1), 0.0);
    auto balls = sample_balls(b, std::vector<P>{{0.5, 0, 0}, {-0.3, 0.2, 0}}, 10, 4, standard_separation(b));
    ASSERT_EQ(balls.size(), 10u);
    auto rep = verify_standard(k, b, 2, balls, VerifyOptions{});
    double expect = 0.0;
    for (const auto& ball : balls) expect = std::max(expect, std::pow(distance(ball.x, ball.center), 3.0));
    EXPECT_TRUE(rep.pass);
    EXPECT_NEAR(rep.constant, expect, 1e-9);
}

TEST(Standard, RejectsBallsThatBreakTheGeometry) {
    auto b = make_ball<3>();
    auto k = zero_kernel<3>();
    std::vector<BallSample<3>> near{{P{0.5, 0, 0}, P{0, 0, 0}, 0.1}};
    EXPECT_THROW(verify_standard(k, b, 2, near, VerifyOptions{}), GeometryError);
    std::vector<BallSample<3>> edge{{P{-0.5, 0, 0}, P{0.999, 0, 0}, 0.005}};
    EXPECT_THROW(verify_standard(k, b, 2, edge, VerifyOptions{}), GeometryError);
    std::vector<BallSample<3>> ok{{P{0.5, 0, 0}, P{0, 0, 0}, 0.005}};
    EXPECT_TRUE(verify_standard(k, b, 2, ok, VerifyOptions{}).pass);
}

TEST(CalderonZygmund, SignFlipAcrossAPlaneFails) {
    auto b = make_ball<3>();
    std::vector<HolderTriple<3>> tr{{P{0, 0, 0}, P{-1e-8, 0.5, 0}, P{2e-8, 0, 0}}};
    auto sa = signed_angular_kernel<3>();
    auto bad = verify_cz<3>(sa.value, sa.name, b, tr, VerifyOptions{}, 0.5);
    EXPECT_FALSE(bad.pass);
    EXPECT_GT(bad.constant, 1e3);
    auto good = verify_cz<3>(newton_d11, "newton_d11", b, tr, VerifyOptions{}, 0.5);
    EXPECT_TRUE(good.pass);
    EXPECT_LT(good.constant, 1.0);
}

TEST(Hormander, ScaleInvariantForHomogeneousKernels) {
    P y{0.1, 0.0, -0.2};
    auto a = hormander_integral<3>(newton_d11, y, P{0.02, 0.01, 0}, 1.0, HormanderMode::Polar);
    auto c = hormander_integral<3>(newton_d11, y, P{0.04, 0.02, 0}, 2.0, HormanderMode::Polar);
    EXPECT_GT(a.value, 0.0);
    EXPECT_NEAR(a.value, c.value, 1e-9 * a.value);
    // The tail decays like |h|/R, so the integral settles as R grows.
    auto far = hormander_integral<3>(newton_d11, y, P{0.02, 0.01, 0}, 4.0, HormanderMode::Polar);
    EXPECT_LT(far.value - a.value, 0.15 * a.value);
    EXPECT_GE(far.value, a.value);
    EXPECT_EQ(hormander_integral<3>(newton_d11, y, P{0.3, 0, 0}, 1.0, HormanderMode::Polar).value, 0.0);
    EXPECT_THROW(hormander_integral<3>(newton_d11, y, P{0, 0, 0}, 1.0, HormanderMode::Polar), PreconditionError);
}

TEST(Hormander, LatticeModeTracksPolarQuadrature) {
    P y{0.0, 0.0, 0.0};
    P h{0.04, 0, 0};
    auto L = Lattice<3>::spanning({-2, -2, -2}, {2, 2, 2}, 201);
    auto polar = hormander_integral<3>(newton_d11, y, h, 1.5, HormanderMode::Polar);
    auto lat = hormander_integral<3>(newton_d11, y, h, 1.5, HormanderMode::Lattice, &L);
    EXPECT_NEAR(lat.value, polar.value, 0.25 * polar.value);
    EXPECT_THROW(hormander_integral<3>(newton_d11, y, h, 1.5, HormanderMode::Lattice), PreconditionError);
}

TEST(Seminorms, QuadraticOnABall) {
    // u = x₁² on B(0, S) with δ̄ = S − |x|: [u]*₂ = 2S² at the centre, [u]*₁ = S²/2 at |x₁| = S/2.
    const double S = 0.5;
    Domain<3> ball(std::make_shared<BallShape<3>>(P{}, S), 0.2, "ball");
    Grid<3> g(ball, Lattice<3>::spanning({-S, -S, -S}, {S, S, S}, 21));
    Eigen::VectorXd u = g.sample_rows([](const P& x) { return x[0] * x[0]; });
    SeminormInput<3> in{&g, &u, [S](const P& x) { return S - norm(x); }, {}};
    auto s = weighted_seminorms(in, 2, 0.5, 2000, 1);
    EXPECT_NEAR(s.bracket[2], 2.0 * S * S, 1e-9);
    EXPECT_NEAR(s.bracket[1], 0.5 * S * S, 1e-9);
    EXPECT_LT(s.bracket[0], S * S);
    EXPECT_LT(s.holder_bracket[2], 1e-6);
    EXPECT_NEAR(s.abs_k, s.bracket[0] + s.bracket[1] + s.bracket[2], 1e-15);
    Eigen::VectorXd one = Eigen::VectorXd::Ones(u.size());
    SeminormInput<3> c{&g, &one, in.delta_bar, {}};
    auto t = weighted_seminorms(c, 2, 0.5, 2000, 1);
    EXPECT_NEAR(t.bracket[0], 1.0, 1e-15);
    EXPECT_LT(t.bracket[1] + t.bracket[2], 1e-9);
}

TEST(Schauder, FlatRatioIsFinite) {
    auto r = schauder_ratio<3>(identity_field<3>(), SchauderCase::Flat, 0.5, 13);
    EXPECT_TRUE(std::isfinite(r.ratio));
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_GT(r.nodes, 0u);
    EXPECT_LT(r.residual, 1e-9);
}
