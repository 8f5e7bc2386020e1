#ifndef GREENLAB_KERNEL_ANALYSIS_HPP
#define GREENLAB_KERNEL_ANALYSIS_HPP

// Difference operators, weighted Schauder seminorms and sampled verifiers for
// the kernel size / regularity estimates. Every verifier returns the sup of
// sampled ratios (a lower bound on the best constant) with its witness.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "greenlab/oracle.hpp"
#include "greenlab/solver.hpp"

namespace greenlab {

// ---------------------------------------------------------------------------
// Kernels.

template <std::size_t N>
struct KernelHandle {
    std::string name;
    std::function<double(const Point<N>&, const Point<N>&)> value;
    /// ∂_x^γ ∂_y^β K(x, y); empty when the kernel has no derivative access.
    std::function<double(const Point<N>&, const Point<N>&, const MultiIndex<N>&, const MultiIndex<N>&)> derivative;
    int order = 2;
    double holder_exponent = 0.5;
    std::function<bool(const Point<N>&)> in_domain = [](const Point<N>&) { return true; };
    /// Lattice on which value/derivative are defined exactly (grid-backed kernels).
    std::optional<Lattice<N>> lattice;

    double operator()(const Point<N>& x, const Point<N>& y) const { return value(x, y); }
    double d(const Point<N>& x, const Point<N>& y, const MultiIndex<N>& gamma, const MultiIndex<N>& beta) const {
        if (!derivative) throw CapabilityError("kernel '" + name + "' has no derivative evaluator");
        return derivative(x, y, gamma, beta);
    }
};

template <std::size_t N, class F>
KernelHandle<N> closed_form_kernel(std::string name, F f) {
    KernelHandle<N> k;
    k.name = std::move(name);
    k.value = [f](const Point<N>& x, const Point<N>& y) { return f(x, y); };
    k.derivative = [f](const Point<N>& x, const Point<N>& y, const MultiIndex<N>& g, const MultiIndex<N>& b) {
        std::array<double, 2 * N> p;
        std::array<int, 2 * N> idx;
        for (std::size_t i = 0; i < N; ++i) {
            p[i] = x[i];
            p[N + i] = y[i];
            idx[i] = g[i];
            idx[N + i] = b[i];
        }
        return partial_multi(
            [&f](const auto& q) {
                using T = std::decay_t<decltype(q[0])>;
                std::array<T, N> a, c;
                for (std::size_t i = 0; i < N; ++i) {
                    a[i] = q[i];
                    c[i] = q[N + i];
                }
                return f(a, c);
            },
            p, idx);
    };
    return k;
}

inline KernelHandle<3> ball_oracle_kernel(const Domain<3>& d) {
    auto k = closed_form_kernel<3>("ball_oracle", [](const auto& x, const auto& y) { return ball_green(x, y); });
    k.in_domain = [d](const Point<3>& p) { return d.contains(p); };
    return k;
}

/// |x−y|^{2−n}/(4π): no boundary decay.
inline KernelHandle<3> bare_kernel() {
    return closed_form_kernel<3>("bare", [](const auto& x, const auto& y) { return newton_kernel(x, y); });
}

template <std::size_t N>
KernelHandle<N> zero_kernel() {
    KernelHandle<N> k;
    k.name = "zero";
    k.value = [](const Point<N>&, const Point<N>&) { return 0.0; };
    k.derivative = [](const Point<N>&, const Point<N>&, const MultiIndex<N>&, const MultiIndex<N>&) { return 0.0; };
    return k;
}

/// Σ (x_i − y_i)²: annihilated by third differences.
template <std::size_t N>
KernelHandle<N> quadratic_kernel() {
    return closed_form_kernel<N>("quadratic", [](const auto& x, const auto& y) {
        using T = std::decay_t<decltype(x[0])>;
        T s = T(0.0);
        for (std::size_t i = 0; i < N; ++i) s = s + (x[i] - y[i]) * (x[i] - y[i]);
        return s;
    });
}

/// |x−y|^{−n} sign(x₁−y₁): size bound holds, Hölder bound fails across x₁ = y₁.
template <std::size_t N>
KernelHandle<N> signed_angular_kernel() {
    KernelHandle<N> k;
    k.name = "signed_angular";
    k.value = [](const Point<N>& x, const Point<N>& y) {
        double r = distance(x, y);
        return (x[0] >= y[0] ? 1.0 : -1.0) * std::pow(r, -double(N));
    };
    return k;
}

/// |x−y|^{−n} on |x−y| ≥ 1, zero inside.
template <std::size_t N>
KernelHandle<N> truncated_singular_kernel() {
    KernelHandle<N> k;
    k.name = "truncated_singular";
    k.value = [](const Point<N>& x, const Point<N>& y) {
        double r = distance(x, y);
        return r >= 1.0 ? std::pow(r, -double(N)) : 0.0;
    };
    return k;
}

/// G_h as a kernel: exact on lattice nodes, n-cubic interpolation elsewhere;
/// derivatives by finite differences on nodes only.
template <std::size_t N>
KernelHandle<N> green_kernel(std::shared_ptr<const GreenTable<N>> gt) {
    KernelHandle<N> k;
    k.name = "green_table";
    k.lattice = gt->grid().lattice();
    const Lattice<N> L = gt->grid().lattice();
    auto node_of = [L](const Point<N>& p) { return L.node_at(p, 1e-9); };
    k.value = [gt, L, node_of](const Point<N>& x, const Point<N>& y) {
        const auto& g = gt->grid();
        auto nx = node_of(x), ny = node_of(y);
        if (nx && ny) return gt->value(*nx, *ny);
        // Interpolate a column: at x's node if x is a node, else at y's node (symmetry).
        auto column_interp = [&](const NodeIndex<N>& src, const Point<N>& p) {
            std::int64_t r = g.row_of(src);
            if (r < 0) return 0.0;
            auto col = gt->column(static_cast<std::size_t>(r));
            return lagrange_interpolate<N>(L, p, [&](const NodeIndex<N>& n) {
                std::int64_t rn = g.row_of(n);
                return rn < 0 ? 0.0 : (*col)[rn];
            });
        };
        if (nx) return column_interp(*nx, y);
        if (ny) return column_interp(*ny, x);
        return lagrange_interpolate<N>(L, x, [&](const NodeIndex<N>& n) { return column_interp(n, y); });
    };
    k.derivative = [gt, node_of](const Point<N>& x, const Point<N>& y, const MultiIndex<N>& gm, const MultiIndex<N>& b) {
        auto nx = node_of(x), ny = node_of(y);
        if (!nx || !ny) throw CapabilityError("green_table derivatives are defined on lattice nodes only");
        return green_derivatives(*gt, *nx, *ny, b, gm);
    };
    const Domain<N> dom = gt->op().domain();
    k.in_domain = [dom](const Point<N>& p) { return dom.contains(p); };
    return k;
}

// ---------------------------------------------------------------------------
// Difference operator.

/// Σ_{k=0}^{ℓ} (−1)^{ℓ+k} C(ℓ,k) f(y + k h) when every y + k h lies in D, else 0.
template <std::size_t N, class F, class Region>
double difference_operator(F&& f, Region&& in_region, int ell, const Point<N>& h, const Point<N>& y) {
    for (int k = 0; k <= ell; ++k)
        if (!in_region(y + double(k) * h)) return 0.0;
    double s = 0.0;
    for (int k = 0; k <= ell; ++k) s += (((ell + k) % 2) ? -1.0 : 1.0) * binomial(ell, k) * f(y + double(k) * h);
    return s;
}

// ---------------------------------------------------------------------------
// Weighted Schauder seminorms.

/// The δ̄-weighted family on the interior nodes of a grid; δ̄_x is supplied
/// (distance to ∂D∖T). Derivatives use interior-only stencils, so nodes
/// whose stencil does not resolve are skipped. Suprema are over samples.
struct WeightedSeminorms {
    std::array<double, 3> bracket{};        // [u]*_{k}, k = 0, 1, 2
    std::array<double, 3> holder_bracket{}; // [u]*_{k,α}
    double abs_k = 0.0;                     // |u|*_{k}
    double abs_k_alpha = 0.0;               // |u|*_{k,α}
    double weighted_0_alpha = 0.0;          // |u|^{(k)}_{0,α}
    double sup_abs = 0.0;                   // |u|_{0}
    std::size_t nodes = 0;
    std::size_t pairs = 0;
};

template <std::size_t N>
struct SeminormInput {
    const Grid<N>* grid = nullptr;
    const Eigen::VectorXd* u = nullptr;               // values on grid rows
    std::function<double(const Point<N>&)> delta_bar; // dist(x, ∂D∖T)
    /// Restricts the node set (e.g. to B ∩ Ω); all interior nodes when empty.
    std::function<bool(const Point<N>&)> region;
};

namespace detail {
/// ∂^β at an interior node with interior-only 1-D stencils; nullopt if unresolved.
template <std::size_t N>
std::optional<double> interior_derivative(const Grid<N>& g, const Eigen::VectorXd& u, const NodeIndex<N>& n,
                                          const MultiIndex<N>& beta) {
    std::vector<std::size_t> axes;
    for (std::size_t a = 0; a < N; ++a)
        if (beta[a] > 0) axes.push_back(a);
    try {
        std::map<NodeIndex<N>, double> cur{{n, 1.0}};
        for (auto a : axes) {
            std::map<NodeIndex<N>, double> next;
            for (const auto& [m, w] : cur)
                for (const auto& t : axis_stencil(g, m, a, beta[a], false)) next[t.node] += w * t.weight;
            cur.swap(next);
        }
        double s = 0.0;
        for (const auto& [m, w] : cur) s += w * u[g.row_of(m)];
        return s;
    } catch (const StencilError&) {
        return std::nullopt;
    }
}

template <std::size_t N>
std::vector<MultiIndex<N>> multi_indices(int k) {
    std::vector<MultiIndex<N>> out;
    MultiIndex<N> b{};
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == N) {
            b[i] = left;
            out.push_back(b);
            return;
        }
        for (int v = left; v >= 0; --v) {
            b[i] = v;
            rec(i + 1, left - v);
        }
    };
    rec(0, k);
    return out;
}
}  // namespace detail

template <std::size_t N>
WeightedSeminorms weighted_seminorms(const SeminormInput<N>& in, int k, double alpha, std::size_t pair_samples,
                                     unsigned seed = 9) {
    const Grid<N>& g = *in.grid;
    const Eigen::VectorXd& u = *in.u;
    struct NodeData {
        Point<N> p;
        double dbar;
        std::array<std::vector<double>, 3> derivs;  // by order, over multi-indices
        std::array<bool, 3> ok{};
    };
    std::vector<NodeData> nodes;
    for (std::size_t r = 0; r < g.unknowns(); ++r) {
        Point<N> p = g.point_of_row(r);
        if (in.region && !in.region(p)) continue;
        NodeData nd{p, std::max(0.0, in.delta_bar(p)), {}, {}};
        for (int j = 0; j <= k && j <= 2; ++j) {
            nd.ok[static_cast<std::size_t>(j)] = true;
            for (const auto& beta : detail::multi_indices<N>(j)) {
                auto v = detail::interior_derivative(g, u, g.index_of_row(r), beta);
                if (!v) {
                    nd.ok[static_cast<std::size_t>(j)] = false;
                    break;
                }
                nd.derivs[static_cast<std::size_t>(j)].push_back(*v);
            }
        }
        nodes.push_back(std::move(nd));
    }
    WeightedSeminorms s;
    s.nodes = nodes.size();
    auto maxabs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    for (const auto& nd : nodes) {
        s.sup_abs = std::max(s.sup_abs, std::abs(nd.derivs[0].empty() ? 0.0 : nd.derivs[0][0]));
        for (int j = 0; j <= k && j <= 2; ++j)
            if (nd.ok[static_cast<std::size_t>(j)])
                s.bracket[static_cast<std::size_t>(j)] =
                    std::max(s.bracket[static_cast<std::size_t>(j)], std::pow(nd.dbar, j) * maxabs(nd.derivs[static_cast<std::size_t>(j)]));
    }
    std::mt19937_64 rng(seed);
    if (nodes.size() >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
        for (std::size_t t = 0; t < pair_samples; ++t) {
            const auto& a = nodes[pick(rng)];
            const auto& b = nodes[pick(rng)];
            double r = distance(a.p, b.p);
            if (r <= 0.0) continue;
            ++s.pairs;
            double dm = std::min(a.dbar, b.dbar);
            for (int j = 0; j <= k && j <= 2; ++j) {
                auto J = static_cast<std::size_t>(j);
                if (!a.ok[J] || !b.ok[J]) continue;
                double diff = 0.0;
                for (std::size_t i = 0; i < a.derivs[J].size(); ++i)
                    diff = std::max(diff, std::abs(a.derivs[J][i] - b.derivs[J][i]));
                s.holder_bracket[J] = std::max(s.holder_bracket[J], std::pow(dm, j + alpha) * diff / std::pow(r, alpha));
            }
            // |u|^{(k)}_{0,α}: Hölder part of u itself with weight δ̄^{k+α}.
            double d0 = std::abs(a.derivs[0][0] - b.derivs[0][0]);
            s.weighted_0_alpha = std::max(s.weighted_0_alpha, std::pow(dm, k + alpha) * d0 / std::pow(r, alpha));
        }
    }
    double sup_k = 0.0;
    for (const auto& nd : nodes) sup_k = std::max(sup_k, std::pow(nd.dbar, k) * std::abs(nd.derivs[0][0]));
    s.weighted_0_alpha += sup_k;
    for (int j = 0; j <= k && j <= 2; ++j) s.abs_k += s.bracket[static_cast<std::size_t>(j)];
    s.abs_k_alpha = s.abs_k + s.holder_bracket[static_cast<std::size_t>(std::min(k, 2))];
    return s;
}

// ---------------------------------------------------------------------------
// Reports.

/// Exclusion band: pairs closer than min_separation, or with a point nearer
/// the boundary than the depth limits, are dropped.
struct Band {
    double min_separation = 0.0;
    double min_depth_x = 0.0;
    double min_depth_y = 0.0;
    Band widened(double f = 2.0) const { return {min_separation * f, min_depth_x * f, min_depth_y * f}; }
};

struct StratumStat {
    double lo = 0.0, hi = 0.0;  // bucket of δ(x)/|x−y|
    std::size_t samples = 0;
    double constant = 0.0;
};

template <std::size_t N>
struct EstimateReport {
    std::string name;
    std::string tag;
    std::string kernel;
    double constant = 0.0;  // C*
    std::vector<Point<N>> witness;
    double witness_ratio = 0.0;
    std::size_t samples = 0;
    Band band;
    double widened_constant = 0.0;
    std::size_t widened_samples = 0;
    bool band_stable = false;  // C* within the stability factor of the widened-band C*
    std::vector<StratumStat> strata;
    double stratum_growth = 0.0;  // C*(nearest-boundary stratum) / C*(reference stratum)
    double threshold = 1e3;
    bool pass = false;
    std::string resolution;
    unsigned seed = 0;
    std::string note;
};

struct VerifyOptions {
    Band band;
    double threshold = 1e3;
    double stability_factor = 2.0;
    double band_widening = 1.5;
    bool require_band_stability = false;
    double growth_limit = 10.0;
    double alpha = 0.5;
    std::vector<double> ratio_edges{0.0, 0.05, 0.2, 1.0, kInf};
    std::size_t reference_stratum = 2;  // growth is measured against this bucket
    unsigned seed = 0;
    std::string resolution;
};

template <std::size_t N>
struct RatioSample {
    double ratio = 0.0;
    std::vector<Point<N>> points;
    double separation = 0.0;
    double depth_x = 0.0;
    double depth_y = 0.0;  // smallest over the y-side points
    double bucket_value = 0.0;  // δ(x)/|x−y|
};

/// C*, widened-band C*, strata and the pass rule: C* finite, below the
/// threshold and stratum growth below the limit. Band stability is recorded;
/// it gates the pass only when requested, since the exact kernel of the ball
/// already loses its witnesses when the band widens at desk resolutions.
template <std::size_t N>
EstimateReport<N> finalize_report(std::string name, std::string tag, std::string kernel,
                                  const std::vector<RatioSample<N>>& samples, const VerifyOptions& opt) {
    EstimateReport<N> rep;
    rep.name = std::move(name);
    rep.tag = std::move(tag);
    rep.kernel = std::move(kernel);
    rep.band = opt.band;
    rep.threshold = opt.threshold;
    rep.seed = opt.seed;
    rep.resolution = opt.resolution;
    Band wide = opt.band.widened(opt.band_widening);
    bool finite = true;
    for (std::size_t b = 0; b + 1 < opt.ratio_edges.size(); ++b)
        rep.strata.push_back({opt.ratio_edges[b], opt.ratio_edges[b + 1], 0, 0.0});
    for (const auto& s : samples) {
        if (!std::isfinite(s.ratio)) finite = false;
        ++rep.samples;
        if (!(s.ratio <= rep.constant)) {
            rep.constant = s.ratio;
            rep.witness = s.points;
            rep.witness_ratio = s.ratio;
        }
        if (s.separation >= wide.min_separation && s.depth_x >= wide.min_depth_x && s.depth_y >= wide.min_depth_y) {
            ++rep.widened_samples;
            rep.widened_constant = std::max(rep.widened_constant, s.ratio);
        }
        for (auto& st : rep.strata)
            if (s.bucket_value >= st.lo && s.bucket_value < st.hi) {
                ++st.samples;
                st.constant = std::max(st.constant, s.ratio);
            }
    }
    const StratumStat* near = nullptr;
    for (const auto& st : rep.strata)
        if (st.samples > 0) {
            near = &st;
            break;
        }
    if (near && opt.reference_stratum < rep.strata.size()) {
        const StratumStat& ref = rep.strata[opt.reference_stratum];
        if (&ref != near && ref.samples > 0 && ref.constant > 0.0) rep.stratum_growth = near->constant / ref.constant;
    }
    rep.band_stable = rep.constant <= opt.stability_factor * rep.widened_constant || rep.constant == 0.0;
    rep.pass = finite && rep.samples > 0 && rep.constant < opt.threshold && rep.stratum_growth < opt.growth_limit;
    if (opt.require_band_stability) rep.pass = rep.pass && rep.band_stable;
    return rep;
}

/// a and b agree within `factor` (both zero counts as agreement).
inline bool stable_within(double a, double b, double factor) {
    if (a == 0.0 && b == 0.0) return true;
    if (!(a > 0.0) || !(b > 0.0)) return false;
    return std::max(a / b, b / a) <= factor;
}

template <std::size_t N>
double min_factor(const Domain<N>& d, const Point<N>& x, double r) {
    return std::min(1.0, d.boundary_distance(x) / r);
}

// ---------------------------------------------------------------------------
// Pointwise estimates.

template <std::size_t N>
RatioSample<N> make_sample(const Domain<N>& d, double ratio, std::vector<Point<N>> pts) {
    RatioSample<N> s;
    s.ratio = ratio;
    s.separation = distance(pts[0], pts[1]);
    s.depth_x = d.boundary_distance(pts[0]);
    s.depth_y = kInf;
    for (std::size_t i = 1; i < pts.size(); ++i) s.depth_y = std::min(s.depth_y, d.boundary_distance(pts[i]));
    s.bucket_value = s.depth_x / s.separation;
    s.points = std::move(pts);
    return s;
}

/// sup |∂_y^β K(x,y)| / (|x−y|^{2−n−|β|} min{1, δ(x)/|x−y|}).
template <std::size_t N>
EstimateReport<N> verify_decay(const KernelHandle<N>& k, const Domain<N>& d, const MultiIndex<N>& beta,
                               const std::vector<SamplePair<N>>& pairs, const VerifyOptions& opt) {
    std::vector<RatioSample<N>> out;
    const int b = order(beta);
    for (const auto& p : pairs) {
        double r = distance(p.x, p.y);
        double v = b == 0 ? k(p.x, p.y) : k.d(p.x, p.y, MultiIndex<N>{}, beta);
        double bound = std::pow(r, 2.0 - double(N) - b) * min_factor(d, p.x, r);
        out.push_back(make_sample(d, std::abs(v) / bound, {p.x, p.y}));
    }
    return finalize_report<N>("decay_beta" + std::to_string(b), "1.12", k.name, out, opt);
}

template <std::size_t N>
struct HolderTriple {
    Point<N> x, y, h;
};

/// Triples x, y, y + h in Ω with |h| ≤ |x−y|/2, drawn around the given pairs
/// (lattice displacements when a lattice is supplied).
template <std::size_t N>
std::vector<HolderTriple<N>> sample_triples(const Domain<N>& d, const std::vector<SamplePair<N>>& pairs,
                                            std::size_t count, unsigned seed, const Lattice<N>* lattice = nullptr,
                                            double min_depth = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<HolderTriple<N>> out;
    if (pairs.empty()) return out;
    for (std::size_t att = 0; out.size() < count && att < 50 * count; ++att) {
        const auto& p = pairs[att % pairs.size()];
        double r = distance(p.x, p.y);
        double lo = lattice ? lattice->h : 1e-3 * r;
        if (lo > 0.5 * r) continue;
        double len = lo * std::pow(0.5 * r / lo, ud(rng));
        Point<N> h = len * random_unit<N>(rng);
        if (lattice) {
            Point<N> yh = lattice->point(lattice->nearest(p.y + h));
            h = yh - p.y;
        }
        double hl = norm(h);
        if (hl <= 0.0 || hl > 0.5 * r) continue;
        if (d.boundary_distance(p.y + h) < std::max(min_depth, 1e-12)) continue;
        out.push_back({p.x, p.y, h});
    }
    return out;
}

/// sup |∂_y^β K(x,y+h) − ∂_y^β K(x,y)| / (|h|^α |x−y|^{−n−α} min{1, δ(x)/|x−y|}), max over |β| = 2.
template <std::size_t N>
EstimateReport<N> verify_holder(const KernelHandle<N>& k, const Domain<N>& d, const std::vector<MultiIndex<N>>& betas,
                                const std::vector<HolderTriple<N>>& triples, const VerifyOptions& opt) {
    std::vector<RatioSample<N>> out;
    const double a = opt.alpha;
    for (const auto& t : triples) {
        double r = distance(t.x, t.y);
        Point<N> yh = t.y + t.h;
        double best = 0.0;
        for (const auto& beta : betas) {
            double diff = k.d(t.x, yh, MultiIndex<N>{}, beta) - k.d(t.x, t.y, MultiIndex<N>{}, beta);
            double bound = std::pow(norm(t.h), a) * std::pow(r, -double(N) - a) * min_factor(d, t.x, r);
            best = std::max(best, std::abs(diff) / bound);
        }
        out.push_back(make_sample(d, best, {t.x, t.y, yh}));
    }
    return finalize_report<N>("holder_beta2", "1.13", k.name, out, opt);
}

/// Mixed-derivative bounds: |∇_x∇_y K| ≤ C|x−y|^{−n} and
/// |∇_x²∇_y K| ≤ C|x−y|^{−n}/min{|x−y|, δ(x)} (Frobenius norms over indices).
template <std::size_t N>
std::pair<EstimateReport<N>, EstimateReport<N>> verify_mixed(const KernelHandle<N>& k, const Domain<N>& d,
                                                             const std::vector<SamplePair<N>>& pairs,
                                                             const VerifyOptions& opt) {
    if (!k.derivative) throw CapabilityError("verify_mixed: kernel '" + k.name + "' has no derivative evaluator");
    std::vector<RatioSample<N>> s17, s18;
    auto e = [](std::size_t i) { return unit_index<N>(static_cast<int>(i)); };
    for (const auto& p : pairs) {
        double r = distance(p.x, p.y);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                double v = k.d(p.x, p.y, e(i), e(j));
                m1 += v * v;
                for (std::size_t l = i; l < N; ++l) {
                    MultiIndex<N> g = e(i);
                    g[l] += 1;
                    double w = k.d(p.x, p.y, g, e(j));
                    m2 += (l == i ? 1.0 : 2.0) * w * w;
                }
            }
        double dx = d.boundary_distance(p.x);
        s17.push_back(make_sample(d, std::sqrt(m1) / std::pow(r, -double(N)), {p.x, p.y}));
        s18.push_back(make_sample(d, std::sqrt(m2) / (std::pow(r, -double(N)) / std::min(r, dx)), {p.x, p.y}));
    }
    return {finalize_report<N>("mixed_xy", "1.7", k.name, s17, opt),
            finalize_report<N>("mixed_xxy", "1.8", k.name, s18, opt)};
}

// ---------------------------------------------------------------------------
// Standard-kernel integral estimate.

template <std::size_t N>
struct BallSample {
    Point<N> x;
    Point<N> center;
    double radius = 0.0;
};

/// Separation constant 8·diam(Ω)/ρ.
template <std::size_t N>
double standard_separation(const Domain<N>& d) { return 8.0 * d.diam() / d.rho(); }

/// Balls B(y_B, r) ⊂⊂ Ω with separation·diam(B) ≤ |x − y_B|; x drawn from the
/// source pool, y_B uniform in Ω with δ(y_B) ≥ r + margin.
template <std::size_t N>
std::vector<BallSample<N>> sample_balls(const Domain<N>& d, const std::vector<Point<N>>& sources, std::size_t count,
                                        unsigned seed, double separation, double min_distance = 0.0,
                                        double margin = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    auto [lo, hi] = d.bounding_box();
    std::vector<BallSample<N>> out;
    if (sources.empty()) return out;
    for (std::size_t att = 0; out.size() < count && att < 1000 * count; ++att) {
        const Point<N>& x = sources[out.size() % sources.size()];
        Point<N> c = random_in_box(lo, hi, rng);
        double dc = d.sdist(c);
        double sep = distance(x, c);
        if (dc <= margin || sep < min_distance) continue;
        double r = 0.5 * sep / separation * (0.5 + 0.5 * ud(rng));
        if (dc < r + margin) continue;
        out.push_back({x, c, r});
    }
    return out;
}

/// Left side of the semilocal integral estimate for f = K(x,·) on B:
/// sup over |h| ≤ diam(B) of |B|^{−1−(m+δ)/n} ∫_B |Δ_h^{m+1}(f, B, y)| dy,
/// midpoint quadrature with q cells per axis.
template <std::size_t N, class F>
double semilocal_integral(F&& f, const Point<N>& c, double r, int m, double delta, int q, unsigned seed) {
    std::vector<Point<N>> pts;
    const double cell = 2.0 * r / q;
    std::array<int, N> idx{};
    while (true) {
        Point<N> p;
        for (std::size_t i = 0; i < N; ++i) p[i] = c[i] - r + (idx[i] + 0.5) * cell;
        if (distance(p, c) < r) pts.push_back(p);
        std::size_t a = 0;
        while (a < N && ++idx[a] == q) idx[a++] = 0;
        if (a == N) break;
    }
    // Displacements: coordinate and diagonal directions plus a few random ones, four lengths.
    std::vector<Point<N>> dirs;
    for (std::size_t i = 0; i < N; ++i) {
        Point<N> e{};
        e[i] = 1.0;
        dirs.push_back(e);
    }
    Point<N> diag;
    diag.fill(1.0 / std::sqrt(double(N)));
    dirs.push_back(diag);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 3; ++k) dirs.push_back(random_unit<N>(rng));
    std::map<std::array<double, N>, double> cache;
    auto fv = [&](const Point<N>& p) {
        auto it = cache.find(p);
        if (it != cache.end()) return it->second;
        double v = f(p);
        cache.emplace(p, v);
        return v;
    };
    auto in_ball = [&](const Point<N>& p) { return distance(p, c) < r; };
    const double vol = unit_ball_volume(int(N)) * std::pow(r, double(N));
    double best = 0.0;
    for (const auto& u : dirs)
        for (double frac : {0.125, 0.25, 0.5, 1.0}) {
            Point<N> h = (2.0 * r * frac / double(m + 1)) * u;
            double s = 0.0;
            for (const auto& p : pts) s += std::abs(difference_operator<N>(fv, in_ball, m + 1, h, p));
            best = std::max(best, s * std::pow(cell, double(N)));
        }
    return best / std::pow(vol, 1.0 + (m + delta) / double(N));
}

/// Pointwise size |K(x,y)| ≤ C|x−y|^{m−n} at ball centres and the semilocal
/// integral estimate against |x − y_B|^{−n−δ}, for K and its transpose.
template <std::size_t N>
EstimateReport<N> verify_standard(const KernelHandle<N>& k, const Domain<N>& d, int m,
                                  const std::vector<BallSample<N>>& balls, const VerifyOptions& opt, int q = 6) {
    std::vector<RatioSample<N>> out;
    const double delta = k.holder_exponent;
    const double sep = standard_separation(d);
    unsigned s = opt.seed;
    for (const auto& b : balls) {
        if (d.sdist(b.center) <= b.radius) throw GeometryError("verify_standard: ball not compactly contained in the domain");
        double R = distance(b.x, b.center);
        if (sep * 2.0 * b.radius > R * (1.0 + 1e-12)) throw GeometryError("verify_standard: ball violates the separation condition");
        double size = std::abs(k(b.x, b.center)) / std::pow(R, double(m) - double(N));
        double fwd = semilocal_integral<N>([&](const Point<N>& y) { return k(b.x, y); }, b.center, b.radius, m, delta, q, ++s);
        double bwd = semilocal_integral<N>([&](const Point<N>& y) { return k(y, b.x); }, b.center, b.radius, m, delta, q, ++s);
        double rhs = std::pow(R, -double(N) - delta);
        double ratio = std::max({size, fwd / rhs, bwd / rhs});
        RatioSample<N> rs = make_sample(d, ratio, {b.x, b.center});
        rs.depth_y = d.boundary_distance(b.center) - b.radius;
        out.push_back(rs);
    }
    auto rep = finalize_report<N>("standard_m" + std::to_string(m), "2.8", k.name, out, opt);
    rep.note = "separation " + std::to_string(sep);
    return rep;
}

// ---------------------------------------------------------------------------
// Global kernels.

/// K_σ(x,y) = ∂_x^σ K(x,y) evaluated through `eval`, with size bound
/// C|x−y|^{−n}, the δ-Hölder displacement in y, and the same displacement in
/// x (transpose). Samples are (x, y, h) with |h| ≤ |x−y|/2.
template <std::size_t N>
EstimateReport<N> verify_cz(const std::function<double(const Point<N>&, const Point<N>&)>& eval, std::string kernel,
                            const Domain<N>& d, const std::vector<HolderTriple<N>>& triples, const VerifyOptions& opt,
                            double holder_exponent) {
    std::vector<RatioSample<N>> out;
    const double a = holder_exponent;
    for (const auto& t : triples) {
        double r = distance(t.x, t.y);
        double hl = norm(t.h);
        double k0 = eval(t.x, t.y);
        double size = std::abs(k0) * std::pow(r, double(N));
        double dy = std::abs(eval(t.x, t.y + t.h) - k0) / (std::pow(hl, a) * std::pow(r, -double(N) - a));
        double dx = std::abs(eval(t.x + t.h, t.y) - k0) / (std::pow(hl, a) * std::pow(r, -double(N) - a));
        RatioSample<N> s;
        s.ratio = std::max({size, dy, dx});
        s.points = {t.x, t.y, t.y + t.h};
        s.separation = r;
        s.depth_x = kInf;
        s.depth_y = kInf;
        double sx = d.sdist(t.x);
        s.bucket_value = std::abs(sx) / r;
        out.push_back(s);
    }
    VerifyOptions o = opt;
    o.growth_limit = kInf;  // boundary strata carry no meaning for a global kernel
    return finalize_report<N>("calderon_zygmund", "1.10", std::move(kernel), out, o);
}

enum class HormanderMode { Polar, Lattice };

struct HormanderResult {
    double value = 0.0;
    std::size_t points = 0;
    std::string resolution;
};

/// ∫_{5|h| ≤ |x−y| ≤ R_max} |K(x, y+h) − K(x, y)| dx.
/// Polar: Gauss–Legendre in log r (8 nodes per octave) × Fibonacci directions.
/// Lattice: nodes of `lattice` with a stride doubling per octave of |x−y|.
template <std::size_t N>
HormanderResult hormander_integral(const std::function<double(const Point<N>&, const Point<N>&)>& K,
                                   const Point<N>& y, const Point<N>& h, double R_max, HormanderMode mode,
                                   const Lattice<N>* lattice = nullptr, int directions = 400) {
    HormanderResult res;
    const double hl = norm(h);
    if (!(hl > 0.0)) throw PreconditionError("hormander_integral: |h| must be positive");
    const double r0 = 5.0 * hl;
    if (r0 >= R_max) return res;
    if (mode == HormanderMode::Polar) {
        // Directions on S^{n-1}: Fibonacci lattice for n = 3, Gaussian samples otherwise.
        std::vector<Point<N>> dirs;
        if constexpr (N == 3) {
            const double golden = kPi * (3.0 - std::sqrt(5.0));
            for (int i = 0; i < directions; ++i) {
                double z = 1.0 - (i + 0.5) * 2.0 / directions;
                double rr = std::sqrt(1.0 - z * z);
                dirs.push_back({rr * std::cos(golden * i), rr * std::sin(golden * i), z});
            }
        } else {
            std::mt19937_64 rng(17);
            for (int i = 0; i < directions; ++i) dirs.push_back(random_unit<N>(rng));
        }
        const double area = unit_sphere_area(int(N)) / double(dirs.size());
        static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
        static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
        const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * std::log2(R_max / r0))));
        const double L0 = std::log(r0), L1 = std::log(R_max);
        Point<N> yh = y + h;
        for (int p = 0; p < panels; ++p) {
            double a = L0 + (L1 - L0) * p / panels, b = L0 + (L1 - L0) * (p + 1) / panels;
            for (int g = 0; g < 4; ++g) {
                double t = 0.5 * (a + b) + 0.5 * (b - a) * gx[g];
                double r = std::exp(t);
                double w = 0.5 * (b - a) * gw[g] * std::pow(r, double(N));  // dr = r dt
                double s = 0.0;
                for (const auto& u : dirs) {
                    Point<N> x = y + r * u;
                    s += std::abs(K(x, yh) - K(x, y));
                    ++res.points;
                }
                res.value += w * s * area;
            }
        }
        res.resolution = "polar:" + std::to_string(panels) + "x4 radial," + std::to_string(dirs.size()) + " directions";
        return res;
    }
    if (!lattice) throw PreconditionError("hormander_integral: lattice mode needs a lattice");
    const Lattice<N>& L = *lattice;
    const Point<N> yh = y + h;
    // Octave k covers [r0·2^k, r0·2^{k+1}); its stride is 2^max(0, k - 1) lattice steps.
    double total = 0.0;
    for (int k = 0; r0 * std::pow(2.0, k) < R_max; ++k) {
        double ra = r0 * std::pow(2.0, k), rb = std::min(R_max, 2.0 * ra);
        std::int64_t stride = std::int64_t(1) << std::max(0, k - 1);
        double step = L.h * double(stride);
        NodeIndex<N> c = L.nearest(y);
        std::int64_t span = static_cast<std::int64_t>(std::ceil(rb / step)) + 1;
        std::array<std::int64_t, N> o;
        o.fill(-span);
        while (true) {
            NodeIndex<N> n;
            for (std::size_t i = 0; i < N; ++i) n[i] = c[i] + o[i] * stride;
            Point<N> x = L.point(n);
            double r = distance(x, y);
            if (r >= ra && r < rb && L.contains(n)) {
                total += std::abs(K(x, yh) - K(x, y)) * std::pow(step, double(N));
                ++res.points;
            }
            std::size_t a = 0;
            while (a < N && ++o[a] > span) o[a++] = -span;
            if (a == N) break;
        }
    }
    res.value = total;
    res.resolution = "lattice:h=" + std::to_string(L.h) + ",octave stride";
    return res;
}

// ---------------------------------------------------------------------------
// Schauder ratio experiments.

enum class SchauderCase { Flat, Curved, Interior };

struct SchauderResult {
    double ratio = 0.0;
    double numerator = 0.0;   // |u|*_{2,α;B∪T}
    double denominator = 0.0; // |u|_{0,B}
    WeightedSeminorms seminorms;
    double residual = 0.0;
    std::size_t nodes = 0;
};

/// Two-sphere / sphere-plane intersection {F₁ < 0} ∩ {F₂ < 0}; the interior
/// distance is the smaller of the two distances.
template <std::size_t N>
class LensShape final : public Shape<N> {
public:
    LensShape(Point<N> c1, double r1, bool first_is_plane, Point<N> c2, double r2)
        : c1_(c1), r1_(r1), plane_(first_is_plane), c2_(c2), r2_(r2) {}
    std::string name() const override { return plane_ ? "half_ball" : "ball_cap"; }
    double level(const std::array<double, N>& x) const override { return F(x); }
    Nest<1> level(const std::array<Nest<1>, N>& x) const override { return F(x); }
    Nest<2> level(const std::array<Nest<2>, N>& x) const override { return F(x); }
    Nest<3> level(const std::array<Nest<3>, N>& x) const override { return F(x); }
    std::optional<double> exact_sdist(const Point<N>& x) const override {
        double a = plane_ ? x[N - 1] - c1_[N - 1] : r1_ - distance(x, c1_);
        double b = r2_ - distance(x, c2_);
        if (a > 0.0 && b > 0.0) return std::min(a, b);
        // Outside: a lower bound with the correct sign is enough for the grids.
        return std::min(a, b);
    }
    std::pair<Point<N>, Point<N>> bounding_box() const override {
        Point<N> lo, hi;
        for (std::size_t i = 0; i < N; ++i) {
            lo[i] = c2_[i] - r2_;
            hi[i] = c2_[i] + r2_;
        }
        return {lo, hi};
    }
    double diameter() const override { return 2.0 * r2_; }

private:
    template <class T>
    T F(const std::array<T, N>& x) const {
        std::array<T, N> a, b;
        for (std::size_t i = 0; i < N; ++i) {
            a[i] = x[i] - c1_[i];
            b[i] = x[i] - c2_[i];
        }
        T f1 = plane_ ? T(c1_[N - 1]) - x[N - 1] : norm_t(a) - r1_;
        T f2 = norm_t(b) - r2_;
        return f1 > f2 ? f1 : f2;
    }
    Point<N> c1_;
    double r1_;
    bool plane_;
    Point<N> c2_;
    double r2_;
};

/// Solves L u = 0 on B = B(ȳ, S) ∩ Ω with u = 0 on T = B ∩ ∂Ω and returns
/// |u|*_{2,α;B∪T} / |u|_{0,B} (0 when u ≡ 0).
///   Flat:     Ω = {x_N > 0}, ȳ = 0, data x_N.
///   Curved:   Ω = unit ball, ȳ = north pole, data (1 − |x|²)/2.
///   Interior: B = B(0, S), T = ∅, data x₁² − x₂².
/// `points` is the number of lattice nodes across the bounding cube of B.
template <std::size_t N>
SchauderResult schauder_ratio(std::shared_ptr<const CoefficientField<N>> a, SchauderCase c, double S, int points,
                              std::size_t pair_samples = 4000, unsigned seed = 21,
                              std::function<double(const Point<N>&)> data = nullptr) {
    Point<N> zero{};
    Point<N> pole{};
    pole[N - 1] = 1.0;
    std::shared_ptr<const Shape<N>> shape;
    std::function<double(const Point<N>&)> dbar;
    std::function<double(const Point<N>&)> g;
    switch (c) {
        case SchauderCase::Flat:
            shape = std::make_shared<LensShape<N>>(zero, 0.0, true, zero, S);
            dbar = [S](const Point<N>& x) { return S - norm(x); };
            g = [](const Point<N>& x) { return x[N - 1]; };
            break;
        case SchauderCase::Curved:
            shape = std::make_shared<LensShape<N>>(zero, 1.0, false, pole, S);
            dbar = [S, pole](const Point<N>& x) { return S - distance(x, pole); };
            g = [](const Point<N>& x) { return 0.5 * (1.0 - dot(x, x)); };
            break;
        case SchauderCase::Interior:
            shape = std::make_shared<BallShape<N>>(zero, S);
            dbar = [S](const Point<N>& x) { return S - norm(x); };
            g = [](const Point<N>& x) { return x[0] * x[0] - x[1] * x[1]; };
            break;
    }
    if (data) g = data;
    Domain<N> B(shape, 0.2 * shape->diameter(), shape->name());
    auto [lo, hi] = B.bounding_box();
    double w = 0.0;
    for (std::size_t i = 0; i < N; ++i) w = std::max(w, hi[i] - lo[i]);
    Point<N> top = lo;
    for (auto& v : top) v += w;
    Lattice<N> L = Lattice<N>::spanning(lo, top, points);
    // One extra node on every side so boundary crossings stay inside the lattice.
    Point<N> lo2 = lo, hi2 = hi;
    for (std::size_t i = 0; i < N; ++i) {
        lo2[i] -= L.h;
        hi2[i] += L.h;
    }
    L = L.covering(lo2, hi2);
    DiscretizeOptions opt;
    opt.enforce_resolution = false;
    DiscreteOperator<N> op(B, std::move(a), L, opt);
    SchauderResult res;
    GridFunction<N> u = dirichlet_solve<N>(op, g, [](const Point<N>&) { return 0.0; }, &res.residual);
    Eigen::VectorXd rows = op.grid().to_rows(u);
    SeminormInput<N> in{&op.grid(), &rows, dbar, {}};
    res.seminorms = weighted_seminorms(in, 2, 0.5, pair_samples, seed);
    res.nodes = res.seminorms.nodes;
    res.numerator = res.seminorms.abs_k_alpha;
    res.denominator = res.seminorms.sup_abs;
    res.ratio = res.denominator > 0.0 ? res.numerator / res.denominator : 0.0;
    return res;
}

}  // namespace greenlab

#endif  // GREENLAB_KERNEL_ANALYSIS_HPP
