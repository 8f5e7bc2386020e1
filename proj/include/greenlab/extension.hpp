#ifndef GREENLAB_EXTENSION_HPP
#define GREENLAB_EXTENSION_HPP

// Global extension of a Green kernel: exterior Whitney cover, order-2 jets at
// interior anchors, per-variable extension with a diagonal-aware cutoff and a
// radial taper. Plus the extended operator, its second derivatives, L^p
// probes and the duality check.

#include <fstream>
#include <unordered_map>

#include "greenlab/kernel_analysis.hpp"

namespace greenlab {

template <std::size_t N>
struct WhitneyCube {
    Point<N> center;
    double side = 0.0;
    int level = 0;
    bool boundary_layer = false;
};

namespace detail {
template <std::size_t N>
struct IndexHash {
    std::size_t operator()(const NodeIndex<N>& k) const { return static_cast<std::size_t>(fnv1a(k.data(), sizeof(k))); }
};
}  // namespace detail

/// Dyadic cubes covering the exterior of Ω̄ inside a box. ψ_Q is a product of
/// quintic bumps, 1 on Q and 0 outside (1+ε)Q; φ_Q = ψ_Q / Σ ψ.
template <std::size_t N>
class WhitneyCover {
public:
    WhitneyCover() = default;
    WhitneyCover(const Point<N>& lo, double top_side, double epsilon) : lo_(lo), top_(top_side), eps_(epsilon) {}

    const std::vector<WhitneyCube<N>>& cubes() const { return cubes_; }
    const Point<N>& origin() const { return lo_; }
    double top_side() const { return top_; }
    double epsilon() const { return eps_; }
    std::size_t size() const { return cubes_.size(); }

    std::size_t add(const WhitneyCube<N>& q) {
        auto L = static_cast<std::size_t>(q.level);
        if (levels_.size() <= L) levels_.resize(L + 1);
        double s = top_ / std::ldexp(1.0, q.level);
        NodeIndex<N> key;
        for (std::size_t i = 0; i < N; ++i) key[i] = static_cast<std::int64_t>(std::floor((q.center[i] - lo_[i]) / s));
        levels_[L][key] = cubes_.size();
        cubes_.push_back(q);
        return cubes_.size() - 1;
    }

    double bump(std::size_t q, const Point<N>& y) const {
        const auto& c = cubes_[q];
        double v = 1.0;
        for (std::size_t i = 0; i < N && v > 0.0; ++i)
            v *= cutoff(std::abs(y[i] - c.center[i]) / (0.5 * c.side), 1.0, 1.0 + eps_);
        return v;
    }

    /// Cubes whose (1+ε) expansion contains y.
    std::vector<std::size_t> touching(const Point<N>& y) const {
        std::vector<std::size_t> out;
        for (std::size_t L = 0; L < levels_.size(); ++L) {
            if (levels_[L].empty()) continue;
            double s = top_ / std::ldexp(1.0, static_cast<int>(L));
            NodeIndex<N> base;
            for (std::size_t i = 0; i < N; ++i) base[i] = static_cast<std::int64_t>(std::floor((y[i] - lo_[i]) / s));
            std::array<int, N> o;
            o.fill(-1);
            while (true) {
                NodeIndex<N> k;
                for (std::size_t i = 0; i < N; ++i) k[i] = base[i] + o[i];
                auto it = levels_[L].find(k);
                if (it != levels_[L].end() && bump(it->second, y) > 0.0) out.push_back(it->second);
                std::size_t a = 0;
                while (a < N && ++o[a] > 1) o[a++] = -1;
                if (a == N) break;
            }
        }
        return out;
    }

    /// (cube, φ_Q(y)) for the cubes meeting y; empty when y is uncovered.
    std::vector<std::pair<std::size_t, double>> partition(const Point<N>& y) const {
        std::vector<std::pair<std::size_t, double>> out;
        double sum = 0.0;
        for (auto q : touching(y)) {
            double b = bump(q, y);
            out.emplace_back(q, b);
            sum += b;
        }
        if (sum > 0.0)
            for (auto& p : out) p.second /= sum;
        return out;
    }

    double partition_sum(const Point<N>& y) const {
        double s = 0.0;
        for (const auto& p : partition(y)) s += p.second;
        return s;
    }

private:
    Point<N> lo_{};
    double top_ = 1.0;
    double eps_ = 0.25;
    std::vector<WhitneyCube<N>> cubes_;
    std::vector<std::unordered_map<NodeIndex<N>, std::size_t, detail::IndexHash<N>>> levels_;
};

/// Whitney cover of {x ∈ box : x ∉ Ω, dist(x, Ω̄) < reach}. A cube of side s is
/// kept when dist(Q, Ω̄) ≥ s(1 + ε√n/2) (so (1+ε)Q stays s away from Ω̄);
/// otherwise it is split, down to s_min, below which the remaining cubes form
/// the boundary layer.
template <std::size_t N>
WhitneyCover<N> build_whitney(const Domain<N>& d, const Point<N>& box_lo, const Point<N>& box_hi, double s_min,
                              double epsilon = 1.0, double reach = kInf) {
    if (!(s_min > 0.0)) throw PreconditionError("build_whitney: s_min must be positive");
    auto [dlo, dhi] = d.bounding_box();
    double margin = kInf;
    for (std::size_t i = 0; i < N; ++i) margin = std::min({margin, dlo[i] - box_lo[i], box_hi[i] - dhi[i]});
    if (d.bounded() && margin < d.diam() * (1.0 - 1e-12))
        throw PreconditionError("build_whitney: box must contain the domain with margin diam");
    double top = 0.0;
    for (std::size_t i = 0; i < N; ++i) top = std::max(top, box_hi[i] - box_lo[i]);
    WhitneyCover<N> cover(box_lo, top, epsilon);
    const double rn = std::sqrt(double(N));
    struct Item {
        Point<N> c;
        int level;
    };
    Point<N> c0;
    for (std::size_t i = 0; i < N; ++i) c0[i] = box_lo[i] + 0.5 * top;
    std::vector<Item> stack{{c0, 0}};
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        double s = top / std::ldexp(1.0, it.level);
        double sd = d.sdist(it.c);
        double half = 0.5 * s * rn;
        if (sd >= half) continue;                     // inside Ω
        double dist_lb = -sd - half;                  // lower bound of dist(Q, Ω̄)
        if (dist_lb >= reach) continue;
        if (dist_lb >= s * (1.0 + 0.5 * epsilon * rn)) {
            cover.add({it.c, s, it.level, false});
            continue;
        }
        if (0.5 * s < s_min) {
            cover.add({it.c, s, it.level, true});
            continue;
        }
        std::array<int, N> o{};
        while (true) {
            Point<N> c;
            for (std::size_t i = 0; i < N; ++i) c[i] = it.c[i] + (o[i] ? 0.25 : -0.25) * s;
            stack.push_back({c, it.level + 1});
            std::size_t a = 0;
            while (a < N && ++o[a] == 2) o[a++] = 0;
            if (a == N) break;
        }
    }
    return cover;
}

// ---------------------------------------------------------------------------
// Extended kernel.

struct ExtensionOptions {
    double R_out = 0.0;          // 0: diam(Ω)
    double s_min = 0.0;          // 0: grid spacing (or jet step for an analytic base)
    double epsilon = 1.0;        // bumps are supported on (1+ε)Q
    double anchor_depth = 0.0;   // analytic base: anchor depth; 0: 0.05·ρ
    double jet_step = 0.0;       // analytic base: difference step; 0: anchor_depth/5
    double box_margin = 0.0;     // 0: R_out
};

inline double diagonal_cutoff(double t) { return cutoff(t, 0.125, 0.25); }

template <std::size_t N>
class ExtendedKernel {
public:
    using Eval = std::function<double(const Point<N>&, const Point<N>&)>;

    /// Grid base: anchors are interior lattice nodes at depth ≥ 2h, jets by
    /// central differences with step h.
    ExtendedKernel(std::shared_ptr<const GreenTable<N>> gt, const ExtensionOptions& opt)
        : domain_(gt->op().domain()), gt_(gt), opt_(opt) {
        base_ = green_kernel<N>(gt).value;
        step_ = gt->h();
        setup();
    }

    /// Analytic base (e.g. the ball oracle): anchors at a fixed depth below the
    /// nearest boundary point, jets by central differences with jet_step.
    ExtendedKernel(const Domain<N>& d, Eval base, const ExtensionOptions& opt) : domain_(d), base_(std::move(base)), opt_(opt) {
        if (opt_.anchor_depth <= 0.0) opt_.anchor_depth = 0.05 * d.rho();
        if (opt_.jet_step <= 0.0) opt_.jet_step = opt_.anchor_depth / 5.0;
        step_ = opt_.jet_step;
        setup();
    }

    const Domain<N>& domain() const { return domain_; }
    const WhitneyCover<N>& cover() const { return cover_; }
    const ExtensionOptions& options() const { return opt_; }
    double R_out() const { return opt_.R_out; }
    double jet_step() const { return step_; }
    std::shared_ptr<const GreenTable<N>> table() const { return gt_; }
    const Point<N>& anchor(std::size_t q) const { return anchors_[q]; }
    /// Lattice covering Ω̄ plus the extension reach (grid base only).
    Lattice<N> global_lattice() const {
        if (!gt_) throw CapabilityError("global_lattice: analytic base has no lattice");
        auto [lo, hi] = domain_.bounding_box();
        for (std::size_t i = 0; i < N; ++i) {
            lo[i] -= opt_.R_out;
            hi[i] += opt_.R_out;
        }
        return gt_->grid().lattice().covering(lo, hi);
    }

    double operator()(const Point<N>& x, const Point<N>& y) const {
        const double sx = domain_.sdist(x), sy = domain_.sdist(y);
        if (sx > 0.0 && sy > 0.0) return base_(x, y);
        if (sx > 0.0) return stage_one(x, y, sy, true);
        const double dx = -sx;
        if (dx >= opt_.R_out) return 0.0;
        double r = distance(x, y);
        if (r == 0.0) return 0.0;
        double chi = diagonal_cutoff(dx / r);
        if (chi == 0.0) return 0.0;
        double s = 0.0;
        for (const auto& [u, c] : jet_list(x))
            s += c * (sy > 0.0 ? base_(u, y) : stage_one(u, y, sy, false));
        return chi * s;
    }

    /// Σ_Q φ_Q(p)·τ(dist(p)/R_out)·T_{p_Q} as weights over anchor stencil points.
    std::vector<std::pair<Point<N>, double>> jet_list(const Point<N>& p) const {
        double dp = std::max(0.0, -domain_.sdist(p));
        double taper = cutoff(dp / opt_.R_out, 0.5, 1.0);
        std::map<Point<N>, double> acc;
        if (taper > 0.0)
            for (const auto& [q, phi] : cover_.partition(p)) {
                const Point<N>& a = anchors_[q];
                Point<N> dd = p - a;
                double w0 = 1.0;
                const double s = step_;
                for (std::size_t i = 0; i < N; ++i) {
                    Point<N> e{};
                    e[i] = s;
                    double g = dd[i] / (2.0 * s), hdiag = 0.5 * dd[i] * dd[i] / (s * s);
                    acc[a + e] += phi * taper * (g + hdiag);
                    acc[a - e] += phi * taper * (-g + hdiag);
                    w0 -= 2.0 * hdiag;
                    for (std::size_t j = i + 1; j < N; ++j) {
                        Point<N> f{};
                        f[j] = s;
                        double m = dd[i] * dd[j] / (4.0 * s * s);
                        acc[a + e + f] += phi * taper * m;
                        acc[a + e - f] -= phi * taper * m;
                        acc[a - e + f] -= phi * taper * m;
                        acc[a - e - f] += phi * taper * m;
                    }
                }
                acc[a] += phi * taper * w0;
            }
        return {acc.begin(), acc.end()};
    }

private:
    /// Extension in y of G(z, ·) to an exterior y. `column_at_z` selects which
    /// side supplies the table columns.
    double stage_one(const Point<N>& z, const Point<N>& y, double sy, bool column_at_z) const {
        const double dy = -sy;
        if (dy >= opt_.R_out) return 0.0;
        double r = distance(z, y);
        if (r == 0.0) return 0.0;
        double chi = diagonal_cutoff(dy / r);
        if (chi == 0.0) return 0.0;
        double s = 0.0;
        for (const auto& [w, c] : jet_list(y)) s += c * (column_at_z ? base_(w, z) : base_(z, w));
        return chi * s;
    }

    void setup() {
        if (opt_.R_out <= 0.0) opt_.R_out = domain_.diam();
        if (!std::isfinite(opt_.R_out)) throw PreconditionError("extend_kernel: unbounded domain needs an explicit R_out");
        if (opt_.s_min <= 0.0) opt_.s_min = gt_ ? gt_->h() : 4.0 * opt_.jet_step;
        if (opt_.box_margin <= 0.0) opt_.box_margin = opt_.R_out;
        auto [lo, hi] = domain_.bounding_box();
        double m = std::max(opt_.box_margin, domain_.diam());
        for (std::size_t i = 0; i < N; ++i) {
            lo[i] -= m;
            hi[i] += m;
        }
        cover_ = build_whitney(domain_, lo, hi, opt_.s_min, opt_.epsilon, opt_.R_out);
        anchors_.resize(cover_.size());
        for (std::size_t q = 0; q < cover_.size(); ++q) anchors_[q] = gt_ ? grid_anchor(q) : analytic_anchor(q);
    }

    Point<N> analytic_anchor(std::size_t q) const {
        Point<N> b = domain_.nearest_boundary(cover_.cubes()[q].center);
        return b - opt_.anchor_depth * domain_.outward_normal(b);
    }

    Point<N> grid_anchor(std::size_t q) const {
        const Grid<N>& g = gt_->grid();
        const Lattice<N>& L = g.lattice();
        const double h = L.h;
        Point<N> b = domain_.nearest_boundary(cover_.cubes()[q].center);
        Point<N> target = b - 2.5 * h * domain_.outward_normal(b);
        NodeIndex<N> c = L.nearest(target);
        for (int rad = 0; rad <= 4; ++rad) {
            double best = kInf;
            Point<N> pick{};
            std::array<int, N> o;
            o.fill(-rad);
            while (true) {
                NodeIndex<N> n;
                for (std::size_t i = 0; i < N; ++i) n[i] = c[i] + o[i];
                std::int64_t row = g.row_of(n);
                if (row >= 0 && g.depth(static_cast<std::size_t>(row)) >= 2.0 * h) {
                    double dd = distance(L.point(n), target);
                    if (dd < best) {
                        best = dd;
                        pick = L.point(n);
                    }
                }
                std::size_t a = 0;
                while (a < N && ++o[a] > rad) o[a++] = -rad;
                if (a == N) break;
            }
            if (best < kInf) return pick;
        }
        throw ResolutionError("extend_kernel: no interior node at depth 2h near the boundary");
    }

    Domain<N> domain_;
    std::shared_ptr<const GreenTable<N>> gt_;
    Eval base_;
    ExtensionOptions opt_;
    double step_ = 0.0;
    WhitneyCover<N> cover_;
    std::vector<Point<N>> anchors_;
};

/// Builds the extension; refuses when the base kernel failed verify_standard.
template <std::size_t N>
std::shared_ptr<const ExtendedKernel<N>> extend_kernel(std::shared_ptr<const GreenTable<N>> gt,
                                                       const EstimateReport<N>& standard,
                                                       const ExtensionOptions& opt = {}) {
    if (!standard.pass)
        throw RefusalError("extend_kernel: base kernel failed verify_standard (C* = " + std::to_string(standard.constant) + ")");
    return std::make_shared<ExtendedKernel<N>>(std::move(gt), opt);
}

template <std::size_t N>
std::shared_ptr<const ExtendedKernel<N>> extend_kernel(const Domain<N>& d, const KernelHandle<N>& base,
                                                       const EstimateReport<N>& standard,
                                                       const ExtensionOptions& opt = {}) {
    if (!standard.pass)
        throw RefusalError("extend_kernel: base kernel failed verify_standard (C* = " + std::to_string(standard.constant) + ")");
    return std::make_shared<ExtendedKernel<N>>(d, base.value, opt);
}

template <std::size_t N>
KernelHandle<N> extended_handle(std::shared_ptr<const ExtendedKernel<N>> ek) {
    KernelHandle<N> k;
    k.name = "extended";
    k.value = [ek](const Point<N>& x, const Point<N>& y) { return (*ek)(x, y); };
    if (ek->table()) k.lattice = ek->global_lattice();
    return k;
}

/// ∂_x^σ Ĝ(x, y) by central differences with step `step` in x.
template <std::size_t N>
double extended_derivative(const ExtendedKernel<N>& ek, const MultiIndex<N>& sigma, const Point<N>& x,
                           const Point<N>& y, double step) {
    std::vector<std::pair<Point<N>, double>> taps{{x, 1.0}};
    for (std::size_t a = 0; a < N; ++a)
        for (int k = 0; k < sigma[a]; ++k) {
            std::vector<std::pair<Point<N>, double>> next;
            Point<N> e{};
            e[a] = step;
            bool second = sigma[a] - k >= 2;
            for (const auto& [p, w] : taps) {
                if (second) {
                    next.emplace_back(p + e, w / (step * step));
                    next.emplace_back(p, -2.0 * w / (step * step));
                    next.emplace_back(p - e, w / (step * step));
                } else {
                    next.emplace_back(p + e, w / (2.0 * step));
                    next.emplace_back(p - e, -w / (2.0 * step));
                }
            }
            taps.swap(next);
            if (second) ++k;
        }
    double s = 0.0;
    for (const auto& [p, w] : taps) s += w * ek(p, y);
    return s;
}

/// (x, y) ↦ ∂_x^σ Ĝ(x, y) with difference step `step`.
template <std::size_t N>
std::function<double(const Point<N>&, const Point<N>&)> extended_derivative_kernel(
    std::shared_ptr<const ExtendedKernel<N>> ek, const MultiIndex<N>& sigma, double step) {
    return [ek, sigma, step](const Point<N>& x, const Point<N>& y) { return extended_derivative(*ek, sigma, x, y, step); };
}

/// Triples (x, y, h) on lattice nodes for the global estimates: y from a pool
/// of interior and exterior points (exterior ones within `exterior_depth` of
/// Ω̄), x at distance ≥ min_separation from y and within `reach` of Ω̄, h an
/// axis step of one or two lattice spacings with |h| ≤ |x−y|/2. A positive
/// `band` drops triples with any of x, x + h, y, y + h within `band` of ∂Ω on
/// either side.
template <std::size_t N>
std::vector<HolderTriple<N>> sample_global_triples(const Domain<N>& d, const Lattice<N>& L, std::size_t pool,
                                                   std::size_t per_y, unsigned seed, double min_separation,
                                                   double reach, double exterior_depth, double band = 0.0) {
    auto banded = [&](const Point<N>& p) { return band > 0.0 && std::abs(d.sdist(p)) < band; };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    auto [lo, hi] = d.bounding_box();
    std::vector<Point<N>> ys;
    for (std::size_t att = 0; ys.size() < pool && att < 10000 * (pool + 1); ++att) {
        bool exterior = ys.size() % 3 == 2;
        Point<N> p;
        if (exterior) {
            Point<N> b = random_boundary_point(d, rng);
            p = L.point(L.nearest(b + (0.25 + 0.75 * ud(rng)) * exterior_depth * d.outward_normal(b)));
            if (d.sdist(p) >= 0.0) continue;
        } else {
            p = L.point(L.nearest(random_in_box(lo, hi, rng)));
            if (d.sdist(p) <= 2.0 * L.h) continue;
        }
        ys.push_back(p);
    }
    std::vector<HolderTriple<N>> out;
    for (const auto& y : ys)
        for (std::size_t k = 0, att = 0; k < per_y && att < 1000 * per_y; ++att) {
            double r = min_separation * std::pow(4.0, ud(rng));
            Point<N> x = L.point(L.nearest(y + r * random_unit<N>(rng)));
            double rr = distance(x, y);
            if (rr < min_separation || -d.sdist(x) >= reach) continue;
            Point<N> h{};
            h[k % N] = ((k / N) % 2 ? 2.0 : 1.0) * L.h * (ud(rng) < 0.5 ? -1.0 : 1.0);
            if (norm(h) > 0.5 * rr) continue;
            if (banded(x) || banded(x + h) || banded(y) || banded(y + h)) continue;
            out.push_back({x, y, h});
            ++k;
        }
    return out;
}

/// Hörmander integrals at the given (y, h) samples as a report: C* is the
/// largest integral, the witness is (y, y + h).
template <std::size_t N>
EstimateReport<N> hormander_report(const std::function<double(const Point<N>&, const Point<N>&)>& K, std::string kernel,
                                   const std::vector<std::pair<Point<N>, Point<N>>>& samples, double R_max,
                                   HormanderMode mode, const Lattice<N>* lattice, const VerifyOptions& opt) {
    EstimateReport<N> rep;
    rep.name = "hormander";
    rep.tag = "1.9";
    rep.kernel = std::move(kernel);
    rep.threshold = opt.threshold;
    rep.seed = opt.seed;
    bool finite = true;
    for (const auto& [y, h] : samples) {
        auto r = hormander_integral<N>(K, y, h, R_max, mode, lattice);
        ++rep.samples;
        rep.resolution = r.resolution;
        if (!std::isfinite(r.value)) finite = false;
        if (!(r.value <= rep.constant)) {
            rep.constant = r.value;
            rep.witness = {y, y + h};
            rep.witness_ratio = r.value;
        }
    }
    rep.widened_constant = rep.constant;
    rep.widened_samples = rep.samples;
    rep.band_stable = true;
    rep.pass = finite && rep.samples > 0 && rep.constant < opt.threshold;
    rep.note = "R_max " + std::to_string(R_max);
    return rep;
}

/// max |Ĝ(x,y) − Ĝ(y,x)| over pairs.
template <std::size_t N>
double extension_symmetry(const ExtendedKernel<N>& ek, const std::vector<std::pair<Point<N>, Point<N>>>& pairs) {
    double m = 0.0;
    for (const auto& [x, y] : pairs) m = std::max(m, std::abs(ek(x, y) - ek(y, x)));
    return m;
}

// ---------------------------------------------------------------------------
// Extended operator.

enum class ExtensionRoute { Auto, KernelSum };

/// (Ĝf)(x) = hⁿ Σ_y Ĝ(x,y) f(y) at the target nodes of f's lattice (which must
/// share the grid's spacing and origin). Interior targets with f supported in
/// Ω use one solve (the kernel agrees with G there); exterior targets whose
/// cutoff is 1 on supp f use the jets of that solution; the rest sum the
/// kernel. The diagonal cell is the table value inside Ω and zero outside.
template <std::size_t N>
std::vector<double> apply_extended(const ExtendedKernel<N>& ek, const GridFunction<N>& f,
                                   const std::vector<NodeIndex<N>>& targets, ExtensionRoute route = ExtensionRoute::Auto) {
    auto gt = ek.table();
    if (!gt) throw CapabilityError("apply_extended: needs a grid base");
    const Grid<N>& g = gt->grid();
    const Lattice<N>& L = f.lattice;
    if (std::abs(L.h - g.h()) > 1e-12 * g.h()) throw PreconditionError("apply_extended: lattice spacing differs from the grid");
    const double vol = std::pow(L.h, double(N));
    const Domain<N>& d = ek.domain();
    std::vector<std::pair<Point<N>, double>> support;
    bool inside = true;
    for (std::size_t k = 0; k < L.size(); ++k)
        if (f.values[k] != 0.0) {
            Point<N> p = L.point(L.unlinear(k));
            support.emplace_back(p, f.values[k]);
            if (g.row_of(L.unlinear(k)) < 0 || !(d.sdist(p) > 0.0)) inside = false;
        }
    std::vector<double> out(targets.size(), 0.0);
    if (support.empty()) return out;
    std::optional<Eigen::VectorXd> u;
    auto solution = [&]() -> const Eigen::VectorXd& {
        if (!u) {
            Eigen::VectorXd rows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.unknowns()));
            for (const auto& [p, v] : support) rows[g.row_near(p)] = v;
            u = apply_green(*gt, rows);
        }
        return *u;
    };
    auto u_at = [&](const Point<N>& p) {
        std::int64_t r = g.row_near(p);
        return r < 0 ? 0.0 : solution()[r];
    };
    for (std::size_t t = 0; t < targets.size(); ++t) {
        Point<N> x = L.point(targets[t]);
        double sx = d.sdist(x);
        if (route == ExtensionRoute::Auto && inside) {
            if (sx > 0.0) {
                out[t] = u_at(x);
                continue;
            }
            double dx = -sx;
            bool flat = true;
            for (const auto& [p, v] : support)
                if (diagonal_cutoff(dx / distance(x, p)) != 1.0) {
                    flat = false;
                    break;
                }
            if (flat) {
                double s = 0.0;
                for (const auto& [w, c] : ek.jet_list(x)) s += c * u_at(w);
                out[t] = s;
                continue;
            }
        }
        double s = 0.0;
        for (const auto& [p, v] : support) {
            if (distance(p, x) == 0.0) {
                s += v * (sx > 0.0 ? ek(x, x) : 0.0);
                continue;
            }
            s += v * ek(x, p);
        }
        out[t] = s * vol;
    }
    return out;
}

/// ∂^σ(Ĝf) at the targets by central differences of apply_extended.
template <std::size_t N>
std::vector<double> apply_second_derivative(const ExtendedKernel<N>& ek, const MultiIndex<N>& sigma,
                                            const GridFunction<N>& f, const std::vector<NodeIndex<N>>& targets,
                                            ExtensionRoute route = ExtensionRoute::Auto) {
    if (order(sigma) != 2) throw PreconditionError("apply_second_derivative: |σ| must be 2");
    std::vector<std::vector<std::pair<NodeIndex<N>, double>>> taps(targets.size());
    std::map<NodeIndex<N>, std::size_t> need;
    std::vector<std::size_t> axes;
    for (std::size_t a = 0; a < N; ++a)
        for (int k = 0; k < sigma[a]; ++k) axes.push_back(a);
    const double h = f.lattice.h;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto& tp = taps[t];
        if (axes[0] == axes[1]) {
            int a = static_cast<int>(axes[0]);
            tp = {{shifted<N>(targets[t], a, 1), 1.0 / (h * h)},
                  {targets[t], -2.0 / (h * h)},
                  {shifted<N>(targets[t], a, -1), 1.0 / (h * h)}};
        } else {
            int a = static_cast<int>(axes[0]), b = static_cast<int>(axes[1]);
            for (int s : {-1, 1})
                for (int r : {-1, 1})
                    tp.emplace_back(shifted<N>(shifted<N>(targets[t], a, s), b, r), s * r / (4.0 * h * h));
        }
        for (const auto& [n, w] : tp) need.emplace(n, 0);
    }
    std::vector<NodeIndex<N>> nodes;
    for (auto& [n, i] : need) {
        i = nodes.size();
        nodes.push_back(n);
    }
    auto vals = apply_extended(ek, f, nodes, route);
    std::vector<double> out(targets.size(), 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t)
        for (const auto& [n, w] : taps[t]) out[t] += w * vals[need[n]];
    return out;
}

// ---------------------------------------------------------------------------
// Operator norms.

/// Linear map on the interior rows of a grid with its adjoint for the
/// V-weighted inner product.
struct LatticeOperator {
    std::size_t size = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adjoint;
    Eigen::VectorXd weights;
};

/// f ↦ ∂^σ G f restricted to Ω (one-sided stencils near ∂Ω). Inside Ω the
/// extended kernel coincides with G, so this is ∂^σĜ on functions supported in Ω.
template <std::size_t N>
LatticeOperator derivative_green_operator(std::shared_ptr<const GreenTable<N>> gt, const MultiIndex<N>& sigma) {
    auto D = std::make_shared<Eigen::SparseMatrix<double>>(derivative_matrix(gt->grid(), sigma));
    const Eigen::VectorXd& V = gt->op().volumes();
    LatticeOperator op;
    op.size = gt->grid().unknowns();
    op.weights = V;
    op.apply = [gt, D](const Eigen::VectorXd& f) -> Eigen::VectorXd { return (*D) * apply_green(*gt, f); };
    op.adjoint = [gt, D, V](const Eigen::VectorXd& g) -> Eigen::VectorXd {
        Eigen::VectorXd t = D->transpose() * V.cwiseProduct(g);
        return apply_green(*gt, t.cwiseQuotient(V));
    };
    return op;
}

/// 3ⁿ-neighbour average over interior nodes (zero outside Ω).
template <std::size_t N>
LatticeOperator mollifier_operator(const Grid<N>& g, double cell_volume) {
    std::vector<Eigen::Triplet<double>> trip;
    const double w = 1.0 / std::pow(3.0, double(N));
    for (std::size_t r = 0; r < g.unknowns(); ++r) {
        NodeIndex<N> c = g.index_of_row(r);
        std::array<int, N> o;
        o.fill(-1);
        while (true) {
            NodeIndex<N> n;
            for (std::size_t i = 0; i < N; ++i) n[i] = c[i] + o[i];
            std::int64_t rn = g.row_of(n);
            if (rn >= 0) trip.emplace_back(static_cast<int>(r), static_cast<int>(rn), w);
            std::size_t a = 0;
            while (a < N && ++o[a] > 1) o[a++] = -1;
            if (a == N) break;
        }
    }
    auto M = std::make_shared<Eigen::SparseMatrix<double>>(static_cast<Eigen::Index>(g.unknowns()),
                                                           static_cast<Eigen::Index>(g.unknowns()));
    M->setFromTriplets(trip.begin(), trip.end());
    LatticeOperator op;
    op.size = g.unknowns();
    op.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.unknowns()), cell_volume);
    op.apply = [M](const Eigen::VectorXd& f) -> Eigen::VectorXd { return (*M) * f; };
    op.adjoint = [M](const Eigen::VectorXd& f) -> Eigen::VectorXd { return M->transpose() * f; };
    return op;
}

inline LatticeOperator zero_operator(std::size_t n, double cell_volume) {
    LatticeOperator op;
    op.size = n;
    op.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), cell_volume);
    op.apply = [n](const Eigen::VectorXd&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)); };
    op.adjoint = op.apply;
    return op;
}

inline double weighted_lp(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += w[i] * std::pow(std::abs(v[i]), p);
    return std::pow(s, 1.0 / p);
}

struct NormEstimate {
    double p = 2.0;
    double random_estimate = 0.0;  // sup over trials of ‖Tf‖_p / ‖f‖_p
    double power_estimate = 0.0;   // p = 2: √λ_max(T*T) by power iteration
    std::size_t trials = 0;
    std::size_t power_iterations = 0;
    double estimate() const { return std::max(random_estimate, power_estimate); }
};

/// Lower bounds for ‖T‖_{L^p → L^p}: random Gaussian f and, for p = 2, power
/// iteration on T*T.
inline NormEstimate estimate_lp_norm(const LatticeOperator& T, double p, std::size_t trials, unsigned seed,
                                     std::size_t power_iterations = 30) {
    NormEstimate est;
    est.p = p;
    est.trials = trials;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto draw = [&]() {
        Eigen::VectorXd f(static_cast<Eigen::Index>(T.size));
        for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = nd(rng);
        return f;
    };
    for (std::size_t t = 0; t < trials; ++t) {
        Eigen::VectorXd f = draw();
        double nf = weighted_lp(f, T.weights, p);
        if (nf == 0.0) continue;
        est.random_estimate = std::max(est.random_estimate, weighted_lp(T.apply(f), T.weights, p) / nf);
    }
    if (p == 2.0 && power_iterations > 0) {
        Eigen::VectorXd v = draw();
        double lam = 0.0;
        for (std::size_t it = 0; it < power_iterations; ++it) {
            double nv = weighted_lp(v, T.weights, 2.0);
            if (nv == 0.0) break;
            v /= nv;
            Eigen::VectorXd w = T.adjoint(T.apply(v));
            lam = weighted_lp(w, T.weights, 2.0);
            v = w;
            ++est.power_iterations;
        }
        est.power_estimate = std::sqrt(lam);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Duality.

struct DualityResult {
    double operator_route = 0.0;  // ⟨G f, ∂^σ g⟩ with one solve
    double kernel_route = 0.0;    // ⟨Ĝ f, ∂^σ g⟩ with kernel sums
    double discrepancy = 0.0;     // |difference| / (‖f‖‖g‖)
};

/// f and g are sampled at interior nodes and must vanish within 4h of ∂Ω.
template <std::size_t N>
DualityResult duality_check(const GreenTable<N>& gt, const ExtendedKernel<N>& ek, const MultiIndex<N>& sigma,
                            const std::function<double(const Point<N>&)>& f,
                            const std::function<double(const Point<N>&)>& g) {
    const Grid<N>& grid = gt.grid();
    const double h = grid.h();
    Eigen::VectorXd F = grid.sample_rows(f), Gv = grid.sample_rows(g);
    for (std::size_t r = 0; r < grid.unknowns(); ++r)
        if (grid.depth(r) < 4.0 * h && (F[static_cast<Eigen::Index>(r)] != 0.0 || Gv[static_cast<Eigen::Index>(r)] != 0.0))
            throw PreconditionError("duality_check: test functions must vanish within 4h of the boundary");
    const Eigen::VectorXd& V = gt.op().volumes();
    Eigen::VectorXd Dg = derivative_rows(grid, Gv, sigma);
    for (Eigen::Index i = 0; i < Dg.size(); ++i)
        if (!std::isfinite(Dg[i])) Dg[i] = 0.0;
    DualityResult res;
    res.operator_route = V.cwiseProduct(apply_green(gt, F)).dot(Dg);
    std::vector<std::size_t> supp_f;
    for (std::size_t r = 0; r < grid.unknowns(); ++r)
        if (F[static_cast<Eigen::Index>(r)] != 0.0) supp_f.push_back(r);
    double s = 0.0;
    for (std::size_t rx = 0; rx < grid.unknowns(); ++rx) {
        double dg = Dg[static_cast<Eigen::Index>(rx)];
        if (dg == 0.0) continue;
        Point<N> x = grid.point_of_row(rx);
        double gf = 0.0;
        for (auto ry : supp_f) gf += V[static_cast<Eigen::Index>(ry)] * ek(x, grid.point_of_row(ry)) * F[static_cast<Eigen::Index>(ry)];
        s += V[static_cast<Eigen::Index>(rx)] * gf * dg;
    }
    res.kernel_route = s;
    double nf = std::sqrt(V.cwiseProduct(F.cwiseAbs2()).sum()), ng = std::sqrt(V.cwiseProduct(Gv.cwiseAbs2()).sum());
    res.discrepancy = nf * ng > 0.0 ? std::abs(res.operator_route - res.kernel_route) / (nf * ng) : 0.0;
    return res;
}

/// a·exp(1 − 1/(1 − |x−c|²/r²)) inside B(c, r), zero outside.
template <std::size_t N>
std::function<double(const Point<N>&)> smooth_bump(const Point<N>& c, double r, double a = 1.0) {
    return [c, r, a](const Point<N>& x) {
        double t = dot(x - c, x - c) / (r * r);
        return t < 1.0 ? a * std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
    };
}

// ---------------------------------------------------------------------------
// Slices.

/// Ĝ(x, ·) on the plane through `origin` spanned by axes a and b, as
/// "u,v,value" rows over [−extent, extent]² with the given step.
template <std::size_t N>
void write_slice_csv(const ExtendedKernel<N>& ek, const Point<N>& x, const Point<N>& origin, std::size_t a,
                     std::size_t b, double extent, double step, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out.precision(12);
    out << "u,v,value\n";
    int n = static_cast<int>(std::floor(extent / step + 1e-9));
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            Point<N> y = origin;
            y[a] += i * step;
            y[b] += j * step;
            double v = distance(x, y) > 0.0 ? ek(x, y) : std::numeric_limits<double>::quiet_NaN();
            out << i * step << ',' << j * step << ',' << v << '\n';
        }
}

}  // namespace greenlab

#endif  // GREENLAB_EXTENSION_HPP
