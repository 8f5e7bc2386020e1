// Acceptance suite for the unit ball in R³. Prints one PASS/FAIL line per
// criterion and exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "greenlab/extension.hpp"

using namespace greenlab;
using P = Point<3>;
using MI = MultiIndex<3>;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Domain<3>& ball() {
    static const Domain<3> b = make_ball<3>();
    return b;
}

/// Green tables on the unit ball, keyed by coefficient preset and points per axis.
std::shared_ptr<GreenTable<3>> table(const std::string& coeff, int points) {
    static std::map<std::pair<std::string, int>, std::shared_ptr<GreenTable<3>>> cache;
    auto key = std::make_pair(coeff, points);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto a = coeff == "sine" ? sine_perturbed_field<3>(0.2, 2.0)
           : coeff == "diag_linear" ? diag_linear_field<3>(0.3, 1.5)
                                    : identity_field<3>();
    DiscretizeOptions o;
    o.enforce_resolution = false;  // 17³ has h = 0.125 > ρ/4 = 0.1
    auto gt = std::make_shared<GreenTable<3>>(discretize<3>(ball(), a, box_lattice(ball(), points), o));
    cache.emplace(key, gt);
    return gt;
}

const std::vector<MI>& second_order() {
    static const std::vector<MI> s{{2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
    return s;
}

// Pairs for the pointwise estimates: drawn on the 17³ lattice so both grids share them.
struct PointwiseSetup {
    double h = 0.0;
    std::vector<SamplePair<3>> pairs;
    VerifyOptions opt;
};

const PointwiseSetup& pointwise() {
    static PointwiseSetup s = [] {
        PointwiseSetup p;
        const Grid<3>& g = table("identity", 17)->grid();
        p.h = g.h();
        PairStrata st;
        st.per_stratum = 16;
        st.separation_edges = {0.5, 1.0, 2.0};
        st.ratio_edges = {0.0, 0.05, 0.2, 1.0, 10.0};
        PairSamplingOptions<3> po;
        po.lattice = &g.lattice();
        po.min_separation = 4.0 * p.h;
        po.min_depth_y = 2.0 * p.h;
        po.source_pool = 8;
        p.pairs = sample_pairs(ball(), st, 7, po);
        p.opt.band = {4.0 * p.h, 0.0, 2.0 * p.h};
        return p;
    }();
    return s;
}

Outcome oracle_fidelity() {
    auto t0 = std::chrono::steady_clock::now();
    auto g33 = table("identity", 33), g65 = table("identity", 65);
    const Grid<3>& c = g33->grid();
    const Grid<3>& f = g65->grid();
    PairStrata st;
    st.per_stratum = 20;
    st.separation_edges = {0.25, 0.5, 1.0, 2.0};
    st.ratio_edges = {0.125, 0.25, 0.5, 1.0, 10.0};
    PairSamplingOptions<3> po;
    po.lattice = &c.lattice();
    po.min_separation = 4.0 * c.h();
    po.min_depth_x = 2.0 * c.h();
    po.min_depth_y = 2.0 * c.h();
    po.source_pool = 16;
    auto pairs = sample_pairs(ball(), st, 42, po);
    double e33 = 0.0, e65 = 0.0;
    for (const auto& p : pairs) {
        double G = ball_green(p.x, p.y);
        // Column at x, read at y.
        e33 = std::max(e33, std::abs(g33->value_rows(c.row_near(p.y), c.row_near(p.x)) - G) / G);
        e65 = std::max(e65, std::abs(g65->value_rows(f.row_near(p.y), f.row_near(p.x)) - G) / G);
    }
    double order = std::log2(e33 / e65), t = seconds_since(t0);
    bool ok = pairs.size() >= 200 && e33 <= 0.05 && order >= 1.0 && t <= 300.0;
    return {ok, fmt("%zu pairs, max rel err 33^3 %.4f (<= 0.05), 65^3 %.4f, order %.2f (>= 1), %.0f s (<= 300)",
                    pairs.size(), e33, e65, order, t)};
}

Outcome symmetry() {
    double worst = 0.0;
    std::ostringstream d;
    for (auto [coeff, pts] : std::vector<std::pair<std::string, int>>{{"identity", 33}, {"diag_linear", 17}}) {
        auto gt = table(coeff, pts);
        const Grid<3>& g = gt->grid();
        std::mt19937_64 rng(11);
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        while (pairs.size() < 50) pairs.emplace_back(rng() % g.unknowns(), rng() % g.unknowns());
        double s = symmetry_defect(*gt, pairs);
        worst = std::max(worst, s);
        d << coeff << " " << pts << "^3 " << fmt("%.2e", s) << "; ";
    }
    return {worst <= 1e-9, d.str() + "50 pairs each, max <= 1e-9"};
}

Outcome decay() {
    const auto& s = pointwise();
    bool ok = true;
    std::ostringstream d;
    for (std::string coeff : {"identity", "sine"})
        for (MI beta : {MI{0, 0, 0}, MI{1, 0, 0}, MI{1, 0, 1}}) {
            auto r17 = verify_decay(green_kernel<3>(table(coeff, 17)), ball(), beta, s.pairs, s.opt);
            auto r33 = verify_decay(green_kernel<3>(table(coeff, 33)), ball(), beta, s.pairs, s.opt);
            bool stable = stable_within(r17.constant, r33.constant, 2.0);
            ok = ok && r17.pass && r33.pass && stable;
            d << coeff << " |b|=" << order(beta) << fmt(" %.3g/%.3g", r17.constant, r33.constant)
              << (r17.pass && r33.pass && stable ? "" : " x") << "; ";
        }
    return {ok, d.str() + std::to_string(s.pairs.size()) + " pairs, C* 17^3/33^3 within 2x"};
}

Outcome holder() {
    const auto& s = pointwise();
    const Lattice<3>& L = table("identity", 17)->grid().lattice();
    auto triples = sample_triples(ball(), s.pairs, 500, 3, &L, 2.0 * s.h);
    const std::vector<MI> betas{{2, 0, 0}, {1, 1, 0}, {0, 0, 2}};
    bool ok = triples.size() == 500;
    std::ostringstream d;
    for (std::string coeff : {"identity", "sine"}) {
        auto r17 = verify_holder(green_kernel<3>(table(coeff, 17)), ball(), betas, triples, s.opt);
        auto r33 = verify_holder(green_kernel<3>(table(coeff, 33)), ball(), betas, triples, s.opt);
        bool stable = stable_within(r17.constant, r33.constant, 2.0);
        ok = ok && r17.pass && r33.pass && stable;
        d << coeff << fmt(" %.3g/%.3g", r17.constant, r33.constant) << (r17.pass && r33.pass && stable ? "" : " x")
          << "; ";
    }
    return {ok, d.str() + std::to_string(triples.size()) + " triples, C* 17^3/33^3 within 2x"};
}

Outcome discriminator() {
    const auto& s = pointwise();
    auto bare = verify_decay(bare_kernel(), ball(), MI{}, s.pairs, s.opt);
    auto ref = verify_decay(green_kernel<3>(table("identity", 33)), ball(), MI{}, s.pairs, s.opt);
    bool ok = !bare.pass && bare.stratum_growth >= 10.0 && ref.pass;
    return {ok, fmt("bare kernel growth %.1f (>= 10, verdict %s); G_h growth %.2f", bare.stratum_growth,
                    bare.pass ? "pass" : "fail", ref.stratum_growth)};
}

Outcome standard() {
    auto gt = table("identity", 33);
    const Grid<3>& g = gt->grid();
    std::vector<P> sources;
    std::mt19937_64 rng(9);
    while (sources.size() < 10) {
        std::size_t r = rng() % g.unknowns();
        if (g.depth(r) >= 2.0 * g.h()) sources.push_back(g.point_of_row(r));
    }
    auto balls = sample_balls(ball(), sources, 100, 3, standard_separation(ball()), 0.0, 2.0 * g.h());
    auto rep = verify_standard(green_kernel<3>(gt), ball(), 2, balls, VerifyOptions{});
    // Third differences of random quadratics, relative to the size of the summands.
    std::mt19937_64 q(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        std::array<double, 10> c;
        for (auto& v : c) v = u(q);
        auto f = [&c](const P& x) {
            return c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[0] * x[0] + c[5] * x[1] * x[1] +
                   c[6] * x[2] * x[2] + c[7] * x[0] * x[1] + c[8] * x[0] * x[2] + c[9] * x[1] * x[2];
        };
        P y{u(q), u(q), u(q)}, h{0.3 * u(q), 0.3 * u(q), 0.3 * u(q)};
        double scale = 0.0;
        for (int k = 0; k <= 3; ++k) scale = std::max(scale, std::abs(f(y + double(k) * h)));
        double v = difference_operator<3>(f, [](const P&) { return true; }, 3, h, y);
        worst = std::max(worst, std::abs(v) / (8.0 * scale));
    }
    bool ok = balls.size() == 100 && rep.pass && worst <= 1e-14;
    return {ok, fmt("%zu balls, separation %.0f, C* %.3g (< %.0f); max |D^3 q| / (8 max|q|) %.1e (<= 1e-14)",
                    balls.size(), standard_separation(ball()), rep.constant, rep.threshold, worst)};
}

Outcome geometry() {
    double cu = uniformity_constant(ball(), 0.0625, 200, 1), bu = uniformity_bound(ball());
    double cc = coplumpness_constant(ball(), 200, 2), bc = coplumpness_bound(ball());
    return {cu <= bu && cc <= bc, fmt("uniformity %.3g <= %.4g, coplumpness %.3g <= %.4g", cu, bu, cc, bc)};
}

Outcome extension() {
    std::ostringstream d;
    bool ok = true;
    // Restriction on interior node pairs.
    double restriction = 0.0;
    std::vector<std::shared_ptr<const ExtendedKernel<3>>> eks;
    for (int pts : {33, 65}) {
        auto gt = table("identity", pts);
        auto ek = std::make_shared<ExtendedKernel<3>>(gt, ExtensionOptions{});
        const Grid<3>& g = gt->grid();
        std::mt19937_64 rng(13);
        for (int i = 0; i < 100; ++i) {
            std::size_t rx = rng() % g.unknowns(), ry = rng() % 40;
            restriction = std::max(restriction, std::abs((*ek)(g.point_of_row(rx), g.point_of_row(ry)) - gt->value_rows(rx, ry)));
        }
        eks.push_back(ek);
    }
    ok = ok && restriction == 0.0;
    d << fmt("restriction %.1e; ", restriction);
    // Calderón–Zygmund and Hörmander on ∂₁₁Ĝ.
    const Lattice<3> Lc = eks[0]->global_lattice();
    auto triples = sample_global_triples(ball(), Lc, 12, 8, 5, 4.0 * Lc.h, eks[0]->R_out(), 0.25 * eks[0]->R_out(), 2.0 * Lc.h);
    const std::vector<std::pair<P, P>> hs{{{0.25, 0, 0}, {0.125, 0, 0}}, {{0, 0, 0.625}, {0, 0, 0.125}},
                                          {{-0.5, 0.25, 0.125}, {0, 0.25, 0}}};
    double cz[2], hm[2];
    bool cz_pass = true, hm_pass = true;
    for (int i = 0; i < 2; ++i) {
        auto K = extended_derivative_kernel<3>(eks[i], MI{2, 0, 0}, eks[i]->table()->h());
        auto c = verify_cz<3>(K, "d11_extended", ball(), triples, VerifyOptions{}, 0.5);
        Lattice<3> L = eks[i]->global_lattice();
        auto hr = hormander_report<3>(K, "d11_extended", hs, 2.5, HormanderMode::Lattice, &L, VerifyOptions{});
        cz[i] = c.constant;
        hm[i] = hr.constant;
        cz_pass = cz_pass && c.pass;
        hm_pass = hm_pass && hr.pass;
    }
    bool cz_ok = cz_pass && stable_within(cz[0], cz[1], 2.0), hm_ok = hm_pass && stable_within(hm[0], hm[1], 2.0);
    ok = ok && cz_ok && hm_ok;
    d << fmt("CZ %.3g/%.3g over %zu triples%s; Hormander %.3g/%.3g%s; ", cz[0], cz[1], triples.size(),
             cz_ok ? "" : " x", hm[0], hm[1], hm_ok ? "" : " x");
    // Duality over 50 random bump pairs on 17³.
    auto g17 = table("identity", 17);
    ExtendedKernel<3> ek17(g17, ExtensionOptions{});
    double dual = 0.0;
    for (unsigned s = 0; s < 50; ++s) {
        std::mt19937_64 r(100 + s);
        P c1 = 0.15 * random_unit<3>(r), c2 = 0.15 * random_unit<3>(r);
        MI sigma = second_order()[s % 6];
        dual = std::max(dual, duality_check<3>(*g17, ek17, sigma, smooth_bump<3>(c1, 0.3), smooth_bump<3>(c2, 0.3)).discrepancy);
    }
    ok = ok && dual <= 1e-8;
    d << fmt("duality %.1e (<= 1e-8, 50 pairs)", dual);
    return {ok, d.str()};
}

Outcome lp_and_trace() {
    std::ostringstream d;
    bool ok = true;
    double worst = 1.0;
    for (const auto& s : second_order()) {
        double a = estimate_lp_norm(derivative_green_operator<3>(table("identity", 17), s), 2.0, 5, 3).estimate();
        double b = estimate_lp_norm(derivative_green_operator<3>(table("identity", 33), s), 2.0, 5, 3).estimate();
        worst = std::max(worst, std::max(a / b, b / a));
        ok = ok && stable_within(a, b, 1.5);
    }
    d << fmt("L2 norms of d^s G stable within %.2fx (<= 1.5); ", worst);
    // Σ_a ∂_aa Ĝf = −f at interior nodes.
    double err[2], hh[2];
    int i = 0;
    for (int pts : {17, 33}) {
        auto gt = table("identity", pts);
        ExtendedKernel<3> ek(gt, ExtensionOptions{});
        Lattice<3> L = ek.global_lattice();
        GridFunction<3> f(L);
        auto bump = smooth_bump<3>(P{0.1, -0.1, 0.05}, 0.5);
        std::vector<NodeIndex<3>> targets;
        for (std::size_t k = 0; k < L.size(); ++k) {
            NodeIndex<3> n = L.unlinear(k);
            f.values[k] = bump(L.point(n));
            if (ball().sdist(L.point(n)) > 0.0) targets.push_back(n);
        }
        std::vector<double> trace(targets.size(), 0.0);
        for (int a = 0; a < 3; ++a) {
            auto v = apply_second_derivative(ek, unit_index<3>(a, 2), f, targets);
            for (std::size_t t = 0; t < targets.size(); ++t) trace[t] += v[t];
        }
        double e = 0.0;
        for (std::size_t t = 0; t < targets.size(); ++t) e = std::max(e, std::abs(trace[t] + bump(L.point(targets[t]))));
        err[i] = e;
        hh[i++] = gt->h();
    }
    double order = std::log2(err[0] / err[1]);
    ok = ok && order >= 1.0;
    d << fmt("trace error %.3g (h=%.4g) -> %.3g (h=%.4g), order %.2f (>= 1)", err[0], hh[0], err[1], hh[1], order);
    return {ok, d.str()};
}

Outcome schauder() {
    std::vector<double> r;
    std::ostringstream d;
    bool finite = true;
    for (auto [c, name] : std::vector<std::pair<SchauderCase, const char*>>{{SchauderCase::Flat, "flat"},
                                                                             {SchauderCase::Curved, "curved"}})
        for (int pts : {17, 33}) {
            double v = schauder_ratio<3>(identity_field<3>(), c, 0.5, pts).ratio;
            finite = finite && std::isfinite(v) && v > 0.0;
            r.push_back(v);
            d << name << " " << pts << fmt(": %.3g; ", v);
        }
    double spread = *std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end());
    return {finite && spread <= 2.0, d.str() + fmt("spread %.2fx (<= 2)", spread)};
}

Outcome transformed() {
    std::vector<std::shared_ptr<CoefficientField<3>>> presets{
        identity_field<3>(), constant_diagonal_field<3>({1.0, 2.0, 0.5}), sine_perturbed_field<3>(0.2, 2.0),
        diag_linear_field<3>(0.3, 1.5), rotated_field<3>(0.2, 2.0, 0.5)};
    bool exact = true;
    std::mt19937_64 rng(17);
    AffineChart<3> id;
    for (const auto& a : presets) {
        auto sf = to_strong_form<3>(a);
        for (int s = 0; s < 50; ++s) {
            P x = random_in_box<3>({-1, -1, -1}, {1, 1, 1}, rng);
            auto t = transform_coefficients(*a, id, x);
            exact = exact && t.a == sf.a(x) && t.b == sf.b(x);
        }
    }
    double lowest = kInf;
    bool positive = true;
    for (const auto& d : {make_ball<3>(), make_ellipsoid<3>({1.0, 0.8, 0.6}), make_bumped_ball<3>()}) {
        P yb = random_boundary_point(d, rng);
        auto ch = chart_at(d, yb);
        for (const auto& a : presets) {
            std::vector<P> ys;
            std::vector<Matrix<3>> as;
            for (int k = 0; k < 40; ++k) {
                auto t = transform_coefficients(*a, ch, yb + 0.5 * ch.radius() * random_unit<3>(rng));
                ys.push_back(t.y);
                as.push_back(t.a);
            }
            auto lookup = [&](const P& y) {
                for (std::size_t i = 0; i < ys.size(); ++i)
                    if (ys[i] == y) return as[i];
                return Matrix<3>(Matrix<3>::Zero());
            };
            auto r = check_transformed_ellipticity<3>(lookup, a->lambda, d.chart_bound(), ys);
            positive = positive && r.pass && r.lambda_tilde > 0.0;
            lowest = std::min(lowest, r.lambda_tilde);
        }
    }
    return {exact && positive, fmt("identity chart %s; smallest transformed ellipticity %.3g (> 0) over 3 domains x 5 presets",
                                   exact ? "exact" : "differs", lowest)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle fidelity", oracle_fidelity},
        {"symmetry", symmetry},
        {"decay", decay},
        {"Holder continuity", holder},
        {"bare-kernel discriminator", discriminator},
        {"standard kernel", standard},
        {"uniformity and coplumpness", geometry},
        {"global extension", extension},
        {"Lp norm and trace identity", lp_and_trace},
        {"Schauder ratio", schauder},
        {"transformed coefficients", transformed},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s  %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
