// greenlab: command-line driver for the Green-kernel experiments.
//
//   greenlab solve     discretize, solve, residual and symmetry checks
//   greenlab verify    run the kernel estimate verifiers on every grid
//   greenlab extend    build the global extension and probe it
//   greenlab geometry  uniformity and coplumpness constants
//   greenlab schauder  boundary Schauder ratio on every grid
//   greenlab probe     print kernel values at one pair of points
//
// Exit status: 0 all contracts hold, 1 a contract failed, 2 bad input,
// 3 the extension was refused.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "greenlab/experiment.hpp"
#include "greenlab/extension.hpp"
#include "greenlab/report_io.hpp"

using namespace greenlab;
namespace fs = std::filesystem;

constexpr std::size_t Dim = 3;
using P = Point<Dim>;
using MI = MultiIndex<Dim>;

namespace {

struct Run {
    ExperimentConfig cfg;
    std::string hash;
    Domain<Dim> domain;
    std::shared_ptr<const CoefficientField<Dim>> coeff;
    fs::path out;
};

struct Level {
    int points = 0;
    std::shared_ptr<const DiscreteOperator<Dim>> op;
    std::shared_ptr<GreenTable<Dim>> gt;
};

Level make_level(const Run& run, int points) {
    DiscretizeOptions o;
    o.enforce_resolution = run.cfg.enforce_resolution;
    o.tolerance = run.cfg.tolerance;
    Level lv;
    lv.points = points;
    lv.op = discretize<Dim>(run.domain, run.coeff, box_lattice(run.domain, points), o);
    lv.gt = std::make_shared<GreenTable<Dim>>(lv.op);
    return lv;
}

Json header(const Run& run, const std::string& command) {
    Json j;
    j["command"] = command;
    j["config_hash"] = run.hash;
    j["seed"] = run.cfg.seed;
    j["domain"] = run.domain.name();
    j["coefficients"] = run.coeff->name();
    return j;
}

VerifyOptions verify_options(const Run& run, double h) {
    VerifyOptions vo;
    vo.band = {run.cfg.band_separation * h, run.cfg.band_depth_x * h, run.cfg.band_depth_y * h};
    vo.band_widening = run.cfg.band_widening;
    vo.threshold = run.cfg.threshold;
    vo.seed = run.cfg.seed;
    return vo;
}

/// Several reports for one tag folded into one: largest constant, all must pass.
EstimateReport<Dim> fold(std::vector<EstimateReport<Dim>> parts, const std::vector<std::string>& labels) {
    EstimateReport<Dim> best = parts.front();
    bool pass = true;
    std::string note;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        pass = pass && parts[i].pass;
        if (parts[i].constant > best.constant || !std::isfinite(parts[i].constant)) best = parts[i];
        note += (i ? "; " : "") + labels[i] + " C*=" + std::to_string(parts[i].constant);
    }
    best.pass = pass;
    best.note = note;
    return best;
}

std::vector<BallSample<Dim>> standard_balls(const Run& run, const Level& lv) {
    const auto& d = run.domain;
    double sep = standard_separation(d);
    std::vector<P> sources;
    const Grid<Dim>& g = lv.op->grid();
    std::mt19937_64 rng(run.cfg.seed + 101);
    for (std::size_t att = 0; sources.size() < run.cfg.source_pool && att < 100000; ++att) {
        std::size_t r = rng() % g.unknowns();
        if (g.depth(r) >= 2.0 * g.h()) sources.push_back(g.point_of_row(r));
    }
    return sample_balls(d, sources, run.cfg.balls, run.cfg.seed + 102, sep, 0.0, 2.0 * g.h());
}

EstimateReport<Dim> standard_report(const Run& run, const Level& lv) {
    auto k = green_kernel<Dim>(lv.gt);
    return verify_standard(k, run.domain, 2, standard_balls(run, lv), verify_options(run, lv.gt->h()));
}

std::vector<std::pair<P, P>> hormander_samples(const Run& run, const Lattice<Dim>& L) {
    std::vector<std::pair<P, P>> out;
    std::mt19937_64 rng(run.cfg.seed + 303);
    const auto& d = run.domain;
    auto [lo, hi] = d.bounding_box();
    for (std::size_t att = 0; out.size() < run.cfg.hormander_samples && att < 100000; ++att) {
        P y = L.point(L.nearest(random_in_box(lo, hi, rng)));
        if (d.sdist(y) <= 2.0 * L.h) continue;
        P h{};
        h[out.size() % Dim] = double(1 << (out.size() % 2)) * L.h;
        if (5.0 * norm(h) >= run.cfg.hormander_rmax) continue;
        out.emplace_back(y, h);
    }
    return out;
}

/// Global triples shared by every grid, on the coarsest lattice.
std::vector<HolderTriple<Dim>> global_triples(const Run& run, const Level& coarse) {
    const auto& d = run.domain;
    auto [lo, hi] = d.bounding_box();
    double R = run.cfg.r_out > 0.0 ? run.cfg.r_out : d.diam();
    for (std::size_t i = 0; i < Dim; ++i) {
        lo[i] -= R;
        hi[i] += R;
    }
    Lattice<Dim> L = coarse.op->grid().lattice().covering(lo, hi);
    std::size_t pool = std::max<std::size_t>(3, run.cfg.triples / 6);
    return sample_global_triples(d, L, pool, 6, run.cfg.seed + 202, 4.0 * L.h, R, 0.25 * R, run.cfg.band_depth_y * L.h);
}

ExtensionOptions extension_options(const Run& run) {
    ExtensionOptions eo;
    eo.R_out = run.cfg.r_out;
    return eo;
}

bool has(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

// ---------------------------------------------------------------------------

int cmd_solve(const Run& run) {
    Json j = header(run, "solve");
    bool ok = true;
    Json grids = Json::array();
    for (int pts : run.cfg.points) {
        Level lv = make_level(run, pts);
        const Grid<Dim>& g = lv.op->grid();
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g.unknowns()));
        double residual = residual_check(*lv.op, *lv.gt, ones);
        double res_u = 0.0;
        auto u = dirichlet_solve<Dim>(*lv.op, [](const P&) { return 0.0; }, [](const P&) { return 1.0; }, &res_u);
        std::mt19937_64 rng(run.cfg.seed);
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (int i = 0; i < 50; ++i) pairs.emplace_back(rng() % g.unknowns(), rng() % g.unknowns());
        double sym = symmetry_defect(*lv.gt, pairs);
        double floor = positivity_floor(*lv.gt);
        u.write_binary((run.out / ("solution_" + std::to_string(pts) + ".bin")).string());
        fs::path csv = run.out / ("solution_" + std::to_string(pts) + ".csv");
        std::ofstream s(csv);
        s.precision(12);
        s << "x,y,z,u\n";
        for (std::size_t r = 0; r < g.unknowns(); ++r) {
            P p = g.point_of_row(r);
            s << p[0] << ',' << p[1] << ',' << p[2] << ',' << u.values[g.lattice().linear(g.index_of_row(r))] << '\n';
        }
        bool pass = residual <= 1e-8 && sym <= 1e-9 && floor > 0.0;
        ok = ok && pass;
        grids.push_back({{"points", pts},
                         {"h", lv.gt->h()},
                         {"unknowns", g.unknowns()},
                         {"residual", residual},
                         {"solve_residual", res_u},
                         {"symmetry_defect", sym},
                         {"positivity_floor", floor},
                         {"columns", lv.gt->cached_count()},
                         {"pass", pass}});
        std::cout << "solve " << pts << ": residual " << residual << ", symmetry " << sym << ", floor " << floor
                  << (pass ? "" : "  FAIL") << '\n';
    }
    j["grids"] = grids;
    j["pass"] = ok;
    write_json(j, (run.out / "solve.json").string());
    return ok ? 0 : 1;
}

int cmd_verify(const Run& run) {
    const auto& cfg = run.cfg;
    const auto& d = run.domain;
    std::vector<Level> levels;
    for (int p : cfg.points) levels.push_back(make_level(run, p));
    const Level& coarse = levels.front();
    const double hc = coarse.gt->h();
    PairStrata st;
    st.per_stratum = cfg.per_stratum;
    st.separation_edges = {0.25, 0.5, 1.0, 2.0};
    st.ratio_edges = {0.0, 0.05, 0.2, 1.0, 10.0};
    PairSamplingOptions<Dim> po;
    po.lattice = &coarse.op->grid().lattice();
    po.min_separation = cfg.band_separation * hc;
    po.min_depth_x = cfg.band_depth_x * hc;
    po.min_depth_y = cfg.band_depth_y * hc;
    po.source_pool = cfg.source_pool;
    auto pairs = sample_pairs(d, st, cfg.seed, po);
    auto triples = sample_triples(d, pairs, cfg.triples, cfg.seed + 1, po.lattice, po.min_depth_y);
    std::vector<HolderTriple<Dim>> gtriples;
    if (has(cfg.verifiers, "1.10")) gtriples = global_triples(run, coarse);

    Json j = header(run, "verify");
    j["pairs"] = pairs.size();
    j["triples"] = triples.size();
    Json per_grid = Json::object();
    std::map<std::string, std::vector<double>> constants;
    std::ofstream csv(run.out / "verify.csv");
    csv << csv_header() << '\n';
    bool ok = true;
    for (const auto& lv : levels) {
        auto k = green_kernel<Dim>(lv.gt);
        VerifyOptions vo = verify_options(run, hc);
        std::map<std::string, EstimateReport<Dim>> reps;
        if (has(cfg.verifiers, "1.12")) {
            std::vector<EstimateReport<Dim>> parts;
            for (MI b : {MI{0, 0, 0}, MI{1, 0, 0}, MI{1, 0, 1}}) parts.push_back(verify_decay(k, d, b, pairs, vo));
            reps["1.12"] = fold(parts, {"beta0", "beta1", "beta2"});
        }
        if (has(cfg.verifiers, "1.13"))
            reps["1.13"] = verify_holder(k, d, {MI{2, 0, 0}, MI{1, 1, 0}, MI{0, 0, 2}}, triples, vo);
        if (has(cfg.verifiers, "1.7") || has(cfg.verifiers, "1.8")) {
            auto [m7, m8] = verify_mixed(k, d, pairs, vo);
            if (has(cfg.verifiers, "1.7")) reps["1.7"] = m7;
            if (has(cfg.verifiers, "1.8")) reps["1.8"] = m8;
        }
        std::optional<EstimateReport<Dim>> standard;
        if (has(cfg.verifiers, "2.8") || has(cfg.verifiers, "1.10") || has(cfg.verifiers, "1.9")) {
            standard = standard_report(run, lv);
            if (has(cfg.verifiers, "2.8")) reps["2.8"] = *standard;
        }
        if (has(cfg.verifiers, "1.10") || has(cfg.verifiers, "1.9")) {
            auto ek = extend_kernel<Dim>(lv.gt, *standard, extension_options(run));
            auto K = extended_derivative_kernel<Dim>(ek, MI{2, 0, 0}, lv.gt->h());
            if (has(cfg.verifiers, "1.10")) reps["1.10"] = verify_cz<Dim>(K, "d11_extended", d, gtriples, vo, 0.5);
            if (has(cfg.verifiers, "1.9")) {
                Lattice<Dim> L = ek->global_lattice();
                reps["1.9"] = hormander_report<Dim>(K, "d11_extended", hormander_samples(run, coarse.op->grid().lattice()),
                                                    cfg.hormander_rmax, HormanderMode::Lattice, &L, vo);
            }
        }
        Json g = Json::object();
        for (const auto& tag : cfg.verifiers) {
            auto& r = reps.at(tag);
            r.resolution = std::to_string(lv.points) + "^3";
            g[tag] = to_json(r, run.hash);
            csv << csv_row(r) << '\n';
            constants[tag].push_back(r.constant);
            ok = ok && r.pass;
            std::cout << "verify " << lv.points << " " << tag << " " << r.name << ": C* = " << r.constant
                      << (r.pass ? "" : "  FAIL") << '\n';
        }
        per_grid[std::to_string(lv.points)] = g;
    }
    j["grids"] = per_grid;
    Json stab = Json::object();
    for (const auto& [tag, cs] : constants) {
        bool stable = true;
        for (std::size_t i = 1; i < cs.size(); ++i) stable = stable && stable_within(cs[i - 1], cs[i], 2.0);
        stab[tag] = {{"constants", cs}, {"stable", stable}};
        ok = ok && stable;
    }
    j["stability"] = stab;
    j["pass"] = ok;
    write_json(j, (run.out / "verify.json").string());
    return ok ? 0 : 1;
}

int cmd_extend(const Run& run) {
    const auto& cfg = run.cfg;
    const auto& d = run.domain;
    Json j = header(run, "extend");
    Json grids = Json::array();
    bool ok = true;
    std::vector<double> lp;
    for (int pts : cfg.points) {
        Level lv = make_level(run, pts);
        const Grid<Dim>& g = lv.op->grid();
        auto standard = standard_report(run, lv);
        auto ek = extend_kernel<Dim>(lv.gt, standard, extension_options(run));
        const double R = ek->options().R_out;
        std::mt19937_64 rng(cfg.seed + 7);
        double restriction = 0.0;
        std::vector<std::pair<P, P>> sym_pairs;
        for (int i = 0; i < 50; ++i) {
            std::size_t a = rng() % g.unknowns(), b = rng() % g.unknowns();
            restriction = std::max(restriction, std::abs((*ek)(g.point_of_row(a), g.point_of_row(b)) - lv.gt->value_rows(a, b)));
        }
        Lattice<Dim> L = ek->global_lattice();
        double support = 0.0;
        for (int i = 0; i < 200; ++i) {
            P x = L.point(L.unlinear(rng() % L.size()));
            P y = L.point(L.unlinear(rng() % L.size()));
            if (-d.sdist(x) >= R || -d.sdist(y) >= R) support = std::max(support, std::abs((*ek)(x, y)));
            else if (d.sdist(x) < 0.0 || d.sdist(y) < 0.0) sym_pairs.emplace_back(x, y);
        }
        double duality = 0.0;
        for (std::size_t s = 0; s < cfg.duality_trials; ++s) {
            std::mt19937_64 r2(cfg.seed + s);
            // Bumps of radius 0.3a centred within 0.15a of the origin, a = min(diam/2, 1).
            double a = std::min(0.5 * d.diam(), 1.0);
            P c1 = 0.15 * a * random_unit<Dim>(r2), c2 = 0.15 * a * random_unit<Dim>(r2);
            auto f = smooth_bump<Dim>(c1, 0.3 * a), gg = smooth_bump<Dim>(c2, 0.3 * a);
            duality = std::max(duality, duality_check<Dim>(*lv.gt, *ek, MI{2, 0, 0}, f, gg).discrepancy);
        }
        auto ne = estimate_lp_norm(derivative_green_operator<Dim>(lv.gt, MI{2, 0, 0}), 2.0, cfg.lp_trials, cfg.seed);
        lp.push_back(ne.estimate());
        write_slice_csv<Dim>(*ek, g.point_of_row(g.unknowns() / 2), P{}, 0, 1, 0.5 * d.diam() + R, 2.0 * g.h(),
                             (run.out / ("slice_" + std::to_string(pts) + ".csv")).string());
        bool pass = restriction <= 1e-12 && support == 0.0 && duality <= 1e-8;
        ok = ok && pass;
        grids.push_back({{"points", pts},
                         {"h", g.h()},
                         {"cubes", ek->cover().size()},
                         {"r_out", R},
                         {"standard", to_json(standard, run.hash)},
                         {"restriction_defect", restriction},
                         {"support_violation", support},
                         {"symmetry_defect", extension_symmetry(*ek, sym_pairs)},
                         {"duality_discrepancy", duality},
                         {"lp_norm_d11", ne.estimate()},
                         {"pass", pass}});
        std::cout << "extend " << pts << ": restriction " << restriction << ", duality " << duality << ", L2 norm "
                  << ne.estimate() << (pass ? "" : "  FAIL") << '\n';
    }
    bool lp_stable = true;
    for (std::size_t i = 1; i < lp.size(); ++i) lp_stable = lp_stable && stable_within(lp[i - 1], lp[i], 1.5);
    ok = ok && lp_stable;
    j["grids"] = grids;
    j["lp_stable"] = lp_stable;
    j["pass"] = ok;
    write_json(j, (run.out / "extend.json").string());
    return ok ? 0 : 1;
}

int cmd_geometry(const Run& run) {
    const auto& d = run.domain;
    Json j = header(run, "geometry");
    double h = d.diam() / (run.cfg.points.front() - 1);
    double cu = uniformity_constant(d, h, 200, run.cfg.seed);
    double cc = coplumpness_constant(d, 200, run.cfg.seed);
    double bu = uniformity_bound(d), bc = coplumpness_bound(d);
    bool ok = cu <= bu && cc <= bc;
    j["rho"] = d.rho();
    j["chart_bound"] = d.chart_bound();
    j["diam"] = detail::number(d.diam());
    j["uniformity"] = {{"constant", detail::number(cu)}, {"bound", detail::number(bu)}};
    j["coplumpness"] = {{"constant", detail::number(cc)}, {"bound", detail::number(bc)}};
    j["pass"] = ok;
    std::cout << "uniformity " << cu << " <= " << bu << ", coplumpness " << cc << " <= " << bc << (ok ? "" : "  FAIL") << '\n';
    write_json(j, (run.out / "geometry.json").string());
    return ok ? 0 : 1;
}

int cmd_schauder(const Run& run) {
    const auto& cfg = run.cfg;
    SchauderCase c;
    if (cfg.schauder_case == "flat") c = SchauderCase::Flat;
    else if (cfg.schauder_case == "curved") c = SchauderCase::Curved;
    else if (cfg.schauder_case == "interior") c = SchauderCase::Interior;
    else throw ConfigError("field 'schauder.case': unknown case '" + cfg.schauder_case + "'");
    Json j = header(run, "schauder");
    Json grids = Json::array();
    std::vector<double> ratios;
    for (int pts : cfg.points) {
        auto r = schauder_ratio<Dim>(run.coeff, c, cfg.schauder_radius, pts, 4000, cfg.seed);
        ratios.push_back(r.ratio);
        grids.push_back({{"points", pts},
                         {"ratio", detail::number(r.ratio)},
                         {"numerator", r.numerator},
                         {"denominator", r.denominator},
                         {"residual", r.residual},
                         {"nodes", r.nodes}});
        std::cout << "schauder " << cfg.schauder_case << " " << pts << ": ratio " << r.ratio << '\n';
    }
    bool ok = std::isfinite(ratios.front());
    for (std::size_t i = 1; i < ratios.size(); ++i) ok = ok && stable_within(ratios[i - 1], ratios[i], 2.0);
    j["case"] = cfg.schauder_case;
    j["grids"] = grids;
    j["pass"] = ok;
    write_json(j, (run.out / "schauder.json").string());
    return ok ? 0 : 1;
}

int cmd_probe(const Run& run, const std::vector<double>& xv, const std::vector<double>& yv) {
    if (xv.size() != Dim || yv.size() != Dim) throw ConfigError("probe: --x and --y need 3 coordinates each");
    P x, y;
    std::copy(xv.begin(), xv.end(), x.begin());
    std::copy(yv.begin(), yv.end(), y.begin());
    Level lv = make_level(run, run.cfg.points.front());
    auto k = green_kernel<Dim>(lv.gt);
    std::cout.precision(12);
    std::cout << "sdist(x) " << run.domain.sdist(x) << ", sdist(y) " << run.domain.sdist(y) << '\n';
    if (run.domain.sdist(x) > 0.0 && run.domain.sdist(y) > 0.0) std::cout << "G_h " << k(x, y) << '\n';
    if (run.domain.name() == "ball" && run.cfg.radius == 1.0 && run.coeff->name() == "identity")
        std::cout << "oracle " << ball_green(x, y) << '\n';
    ExtendedKernel<Dim> ek(lv.gt, extension_options(run));
    std::cout << "extended " << ek(x, y) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Green kernel experiments on Lipschitz-free smooth domains"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<unsigned> seed;
    std::string out;
    std::vector<int> grid;
    std::vector<std::string> verifiers;
    std::vector<double> px, py;
    auto common = [&](CLI::App* s) {
        s->add_option("--config", config_path, "INI experiment file")->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "random seed");
        s->add_option("--out", out, "output directory");
        s->add_option("--grid", grid, "points per axis (repeatable)");
    };
    auto* solve = app.add_subcommand("solve", "discretize and solve, check residual and symmetry");
    auto* verify = app.add_subcommand("verify", "run the estimate verifiers");
    auto* extend = app.add_subcommand("extend", "build and probe the global extension");
    auto* geometry = app.add_subcommand("geometry", "uniformity and coplumpness constants");
    auto* schauder = app.add_subcommand("schauder", "boundary Schauder ratio");
    auto* probe = app.add_subcommand("probe", "kernel values at one pair of points");
    for (auto* s : {solve, verify, extend, geometry, schauder, probe}) common(s);
    verify->add_option("--verifiers", verifiers, "estimate tags to run");
    probe->add_option("--x", px)->expected(3)->required();
    probe->add_option("--y", py)->expected(3)->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        Run run{config_path.empty() ? ExperimentConfig{} : load_config(config_path), "", make_ball<Dim>(), nullptr, {}};
        if (seed) run.cfg.seed = *seed;
        if (!out.empty()) run.cfg.output = out;
        if (!grid.empty()) run.cfg.points = grid;
        if (!verifiers.empty()) run.cfg.verifiers = verifiers;
        run.cfg = parse_config(to_ini(run.cfg));  // revalidate overrides
        run.hash = config_hash(run.cfg);
        run.domain = make_domain<Dim>(run.cfg);
        run.coeff = make_coefficients<Dim>(run.cfg);
        run.out = run.cfg.output;
        fs::create_directories(run.out);
        if (solve->parsed()) return cmd_solve(run);
        if (verify->parsed()) return cmd_verify(run);
        if (extend->parsed()) return cmd_extend(run);
        if (geometry->parsed()) return cmd_geometry(run);
        if (schauder->parsed()) return cmd_schauder(run);
        return cmd_probe(run, px, py);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const RefusalError& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
