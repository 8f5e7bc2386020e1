#include <gtest/gtest.h>

#include <cstdio>

#include "greenlab/oracle.hpp"
#include "greenlab/solver.hpp"

using namespace greenlab;
using P = Point<3>;

namespace {
DiscretizeOptions loose() {
    DiscretizeOptions o;
    o.enforce_resolution = false;
    return o;
}

struct Fixture17 {
    Domain<3> ball = make_ball<3>();
    std::shared_ptr<const DiscreteOperator<3>> op = discretize<3>(ball, identity_field<3>(), box_lattice(ball, 17), loose());
    std::shared_ptr<GreenTable<3>> gt = std::make_shared<GreenTable<3>>(op);
};

Fixture17& fx() {
    static Fixture17 f;
    return f;
}
}  // namespace

TEST(Grid, InteriorNodesAreExactlyTheInsideNodes) {
    const auto& g = fx().op->grid();
    const auto& L = g.lattice();
    std::size_t inside = 0;
    for (std::size_t k = 0; k < L.size(); ++k)
        if (fx().ball.sdist(L.point(L.unlinear(k))) > 0.0) ++inside;
    EXPECT_EQ(inside, g.unknowns());
    for (std::size_t r = 0; r < g.unknowns(); r += 97) {
        EXPECT_EQ(g.row_of(g.index_of_row(r)), static_cast<std::int64_t>(r));
        EXPECT_NEAR(g.depth(r), fx().ball.sdist(g.point_of_row(r)), 1e-12);
    }
}

TEST(Discretize, ResolutionGuard) {
    auto b = make_ball<3>();
    EXPECT_THROW(discretize<3>(b, identity_field<3>(), box_lattice(b, 17)), PreconditionError);
    EXPECT_NO_THROW(discretize<3>(b, identity_field<3>(), box_lattice(b, 21)));
}

TEST(Discretize, DiagonalTensorGivesSymmetricMatrix) {
    auto b = make_ball<3>();
    for (auto a : {identity_field<3>(), diag_linear_field<3>(0.3, 1.5), constant_diagonal_field<3>({1.0, 2.0, 0.5})}) {
        auto op = discretize<3>(b, a, box_lattice(b, 13), loose());
        Eigen::SparseMatrix<double> S = op->matrix();
        Eigen::SparseMatrix<double> D = S - Eigen::SparseMatrix<double>(S.transpose());
        EXPECT_LE(D.norm(), 1e-14 * S.norm()) << a->name();
    }
}

TEST(Discretize, ConsistentOnQuadraticsAwayFromTheBoundary) {
    // −Δ|x|² = −6 at nodes whose neighbours are all interior.
    const auto& op = *fx().op;
    const auto& g = op.grid();
    Eigen::VectorXd u = g.sample_rows([](const P& x) { return dot(x, x); });
    Eigen::VectorXd Lu = op.apply(u);
    for (std::size_t r = 0; r < g.unknowns(); ++r)
        if (g.depth(r) > 2.0 * g.h()) EXPECT_NEAR(Lu[static_cast<Eigen::Index>(r)], -6.0, 1e-9);
}

TEST(Dirichlet, ConstantsAreReproduced) {
    double res = 0.0;
    auto u = dirichlet_solve<3>(*fx().op, [](const P&) { return 1.0; }, [](const P&) { return 0.0; }, &res);
    const auto& g = fx().op->grid();
    for (std::size_t r = 0; r < g.unknowns(); ++r)
        EXPECT_NEAR(u.values[g.lattice().linear(g.index_of_row(r))], 1.0, 1e-9);
    EXPECT_LT(res, 1e-10);
}

TEST(Dirichlet, TorsionFunctionConverges) {
    // −Δu = 1, u = 0 on the unit sphere: u = (1 − |x|²)/6.
    auto b = make_ball<3>();
    double err[2];
    int i = 0;
    for (int pts : {9, 17}) {
        auto op = discretize<3>(b, identity_field<3>(), box_lattice(b, pts), loose());
        auto u = dirichlet_solve<3>(*op, [](const P&) { return 0.0; }, [](const P&) { return 1.0; });
        const auto& g = op->grid();
        double e = 0.0;
        for (std::size_t r = 0; r < g.unknowns(); ++r) {
            P x = g.point_of_row(r);
            e = std::max(e, std::abs(u.values[g.lattice().linear(g.index_of_row(r))] - (1.0 - dot(x, x)) / 6.0));
        }
        err[i++] = e;
    }
    EXPECT_LT(err[1], 0.01);
    EXPECT_GT(std::log2(err[0] / err[1]), 1.0);
}

TEST(GreenTable, SymmetricAndPositive) {
    auto& gt = *fx().gt;
    const auto& g = gt.grid();
    std::mt19937_64 rng(3);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (int i = 0; i < 30; ++i) pairs.emplace_back(rng() % g.unknowns(), rng() % g.unknowns());
    EXPECT_LE(symmetry_defect(gt, pairs), 1e-9);
    EXPECT_GT(positivity_floor(gt), 0.0);
}

TEST(GreenTable, CachePrefersExistingColumns) {
    auto op = fx().op;
    GreenTable<3> gt(op);
    gt.column(5);
    EXPECT_EQ(gt.cached_count(), 1u);
    gt.value_rows(7, 5);
    gt.value_rows(5, 9);
    EXPECT_EQ(gt.cached_count(), 1u);
    gt.value_rows(7, 8);
    EXPECT_TRUE(gt.cached(8));
}

TEST(GreenTable, ResidualAndSumRoute) {
    auto& gt = *fx().gt;
    const auto& g = gt.grid();
    Eigen::VectorXd f = g.sample_rows([](const P& x) { return std::exp(-4.0 * dot(x, x)) * (x[0] + 0.5); });
    EXPECT_LT(residual_check(gt.op(), gt, f), 1e-9);
    // Compare the one-solve route with the column sum on a coarse grid.
    auto b = make_ball<3>();
    auto op9 = discretize<3>(b, identity_field<3>(), box_lattice(b, 9), loose());
    GreenTable<3> g9(op9);
    Eigen::VectorXd f9 = op9->grid().sample_rows([](const P& x) { return 1.0 + x[1]; });
    EXPECT_LT((apply_green(g9, f9) - apply_green_by_sum(g9, f9)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GreenTable, AgreesWithTheBallOracle) {
    auto& gt = *fx().gt;
    const auto& g = gt.grid();
    const double h = g.h();
    std::mt19937_64 rng(4);
    double worst = 0.0;
    int n = 0;
    while (n < 40) {
        std::size_t rx = rng() % g.unknowns(), ry = rng() % g.unknowns();
        P x = g.point_of_row(rx), y = g.point_of_row(ry);
        if (distance(x, y) < 4.0 * h || g.depth(rx) < 2.0 * h || g.depth(ry) < 2.0 * h) continue;
        double G = ball_green(x, y);
        worst = std::max(worst, std::abs(gt.value_rows(rx, ry) - G) / G);
        ++n;
    }
    EXPECT_LT(worst, 0.15);
}

TEST(Stencils, DerivativesExactOnFunctionsVanishingOnTheBoundary) {
    // Crossing taps take the value zero, as for Green columns.
    const auto& g = fx().op->grid();
    Eigen::VectorXd u2 = g.sample_rows([](const P& x) { return 1.0 - dot(x, x); });
    Eigen::VectorXd u3 = g.sample_rows([](const P& x) { return (1.0 - dot(x, x)) * (1.0 + x[0] + 0.5 * x[2]); });
    auto d11 = derivative_rows(g, u2, MultiIndex<3>{2, 0, 0});
    auto d12 = derivative_rows(g, u2, MultiIndex<3>{1, 1, 0});
    auto d3 = derivative_rows(g, u2, MultiIndex<3>{0, 0, 1});
    auto c11 = derivative_rows(g, u3, MultiIndex<3>{2, 0, 0});
    std::size_t resolved = 0;
    for (Eigen::Index r = 0; r < u2.size(); ++r) {
        if (std::isnan(d11[r])) continue;
        ++resolved;
        P x = g.point_of_row(static_cast<std::size_t>(r));
        EXPECT_NEAR(d11[r], -2.0, 1e-8);
        EXPECT_NEAR(d12[r], 0.0, 1e-8);
        EXPECT_NEAR(d3[r], -2.0 * x[2], 1e-8);
        EXPECT_NEAR(c11[r], -2.0 * (1.0 + x[0] + 0.5 * x[2]) - 4.0 * x[0], 1e-7);
    }
    EXPECT_EQ(resolved, g.unknowns());
    Eigen::SparseMatrix<double> D = derivative_matrix(g, MultiIndex<3>{1, 1, 0});
    Eigen::VectorXd Du = D * u2;
    for (Eigen::Index r = 0; r < u2.size(); ++r) EXPECT_NEAR(Du[r], d12[r], 1e-12);
}

TEST(Stencils, InterpolationExactOnCubics) {
    Lattice<3> L = Lattice<3>::spanning({-1, -1, -1}, {1, 1, 1}, 11);
    auto f = [](const P& x) { return x[0] * x[0] * x[0] - 2.0 * x[0] * x[1] * x[2] + x[2] * x[2] + 1.0; };
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        P p = random_in_box<3>({-0.7, -0.7, -0.7}, {0.7, 0.7, 0.7}, rng);
        double v = lagrange_interpolate(L, p, [&](const NodeIndex<3>& n) { return f(L.point(n)); });
        EXPECT_NEAR(v, f(p), 1e-12);
    }
}

TEST(GridFunction, BinaryRoundTrip) {
    const auto& g = fx().op->grid();
    GridFunction<3> u = g.to_grid(g.sample_rows([](const P& x) { return x[0] - 2.0 * x[2]; }));
    std::string path = ::testing::TempDir() + "gf.bin";
    u.write_binary(path);
    auto v = GridFunction<3>::read_binary(path);
    EXPECT_EQ(v.values, u.values);
    EXPECT_EQ(v.lattice.h, u.lattice.h);
    EXPECT_EQ(v.lattice.lo, u.lattice.lo);
    std::remove(path.c_str());
}
