#ifndef GREENLAB_SOLVER_HPP
#define GREENLAB_SOLVER_HPP

// Flux-form finite differences for −L with homogeneous or prescribed
// Dirichlet data on a Cartesian lattice over Ω, Green columns, and
// finite-difference derivatives of cached columns.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <atomic>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "greenlab/elliptic.hpp"

namespace greenlab {

/// Values on every node of a lattice, zero where undefined.
template <std::size_t N>
struct GridFunction {
    Lattice<N> lattice;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const Lattice<N>& l) : lattice(l), values(l.size(), 0.0) {}

    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    double at(const NodeIndex<N>& k) const { return lattice.contains(k) ? values[lattice.linear(k)] : 0.0; }

    void write_binary(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot open " + path);
        const char magic[8] = {'G', 'L', 'G', 'R', 'I', 'D', '0', '1'};
        os.write(magic, 8);
        std::uint64_t n = N;
        os.write(reinterpret_cast<const char*>(&n), 8);
        for (std::size_t i = 0; i < N; ++i) {
            std::uint64_t e = static_cast<std::uint64_t>(lattice.extent(static_cast<int>(i)));
            os.write(reinterpret_cast<const char*>(&e), 8);
        }
        os.write(reinterpret_cast<const char*>(&lattice.h), 8);
        Point<N> lo = lattice.point(lattice.lo), hi = lattice.point(lattice.hi);
        os.write(reinterpret_cast<const char*>(lo.data()), 8 * N);
        os.write(reinterpret_cast<const char*>(hi.data()), 8 * N);
        os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(8 * values.size()));
    }

    static GridFunction read_binary(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw Error("cannot open " + path);
        char magic[8];
        is.read(magic, 8);
        if (std::memcmp(magic, "GLGRID01", 8) != 0) throw Error("not a grid function file: " + path);
        std::uint64_t n;
        is.read(reinterpret_cast<char*>(&n), 8);
        if (n != N) throw Error("grid function dimension mismatch");
        std::array<std::uint64_t, N> ext;
        for (auto& e : ext) is.read(reinterpret_cast<char*>(&e), 8);
        Lattice<N> l;
        is.read(reinterpret_cast<char*>(&l.h), 8);
        Point<N> lo, hi;
        is.read(reinterpret_cast<char*>(lo.data()), 8 * N);
        is.read(reinterpret_cast<char*>(hi.data()), 8 * N);
        l.origin = lo;
        for (std::size_t i = 0; i < N; ++i) {
            l.lo[i] = 0;
            l.hi[i] = static_cast<std::int64_t>(ext[i]) - 1;
        }
        GridFunction g(l);
        is.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(8 * g.values.size()));
        if (!is) throw Error("truncated grid function file: " + path);
        return g;
    }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw Error("cannot open " + path);
        for (std::size_t i = 0; i < N; ++i) os << "x" << i << ",";
        os << "value\n";
        os.precision(17);
        for (std::size_t k = 0; k < values.size(); ++k) {
            Point<N> p = lattice.point(lattice.unlinear(k));
            for (double v : p) os << v << ",";
            os << values[k] << "\n";
        }
    }
};

enum class NodeKind : unsigned char { Exterior, Interior, BoundaryAdjacent };

/// Lattice over the bounding box with interior nodes numbered as unknowns.
/// theta(row, axis, side) is the fraction of the lattice edge from an interior
/// node to the boundary crossing (1 when the neighbour is interior).
template <std::size_t N>
class Grid {
public:
    Grid(const Domain<N>& d, const Lattice<N>& lattice) : lattice_(lattice) {
        const std::size_t M = lattice_.size();
        kind_.assign(M, NodeKind::Exterior);
        row_.assign(M, -1);
        std::vector<double> sd(M);
        for (std::size_t k = 0; k < M; ++k) {
            sd[k] = d.sdist(lattice_.point(lattice_.unlinear(k)));
            if (sd[k] > 0.0) {
                row_[k] = static_cast<std::int64_t>(nodes_.size());
                nodes_.push_back(k);
                kind_[k] = NodeKind::Interior;
            }
        }
        if (nodes_.empty()) throw ResolutionError("grid has no interior nodes");
        theta_.assign(nodes_.size() * 2 * N, 1.0);
        for (std::size_t r = 0; r < nodes_.size(); ++r) {
            NodeIndex<N> idx = lattice_.unlinear(nodes_[r]);
            for (std::size_t a = 0; a < N; ++a)
                for (int s = 0; s < 2; ++s) {
                    NodeIndex<N> nb = shifted<N>(idx, static_cast<int>(a), s == 0 ? -1 : 1);
                    if (lattice_.contains(nb) && row_[lattice_.linear(nb)] >= 0) continue;
                    if (!lattice_.contains(nb)) throw ResolutionError("interior node on the lattice edge");
                    theta_[(r * N + a) * 2 + s] =
                        d.crossing_fraction(lattice_.point(idx), lattice_.point(nb));
                    kind_[nodes_[r]] = NodeKind::BoundaryAdjacent;
                }
        }
        depth_.resize(nodes_.size());
        for (std::size_t r = 0; r < nodes_.size(); ++r) depth_[r] = sd[nodes_[r]];
    }

    const Lattice<N>& lattice() const { return lattice_; }
    double h() const { return lattice_.h; }
    std::size_t unknowns() const { return nodes_.size(); }
    std::size_t node_of_row(std::size_t r) const { return nodes_[r]; }
    std::int64_t row_of_node(std::size_t k) const { return row_[k]; }
    std::int64_t row_of(const NodeIndex<N>& k) const {
        return lattice_.contains(k) ? row_[lattice_.linear(k)] : -1;
    }
    bool interior(const NodeIndex<N>& k) const { return row_of(k) >= 0; }
    NodeKind kind(std::size_t k) const { return kind_[k]; }
    double theta(std::size_t row, std::size_t axis, int side) const {
        return theta_[(row * N + axis) * 2 + (side < 0 ? 0 : 1)];
    }
    /// Signed distance of the node of a row.
    double depth(std::size_t row) const { return depth_[row]; }
    Point<N> point_of_row(std::size_t r) const { return lattice_.point(lattice_.unlinear(nodes_[r])); }
    NodeIndex<N> index_of_row(std::size_t r) const { return lattice_.unlinear(nodes_[r]); }

    /// Interior row nearest to p, or -1.
    std::int64_t row_near(const Point<N>& p) const { return row_of(lattice_.nearest(p)); }

    GridFunction<N> to_grid(const Eigen::VectorXd& v) const {
        GridFunction<N> g(lattice_);
        for (std::size_t r = 0; r < nodes_.size(); ++r) g.values[nodes_[r]] = v[static_cast<Eigen::Index>(r)];
        return g;
    }
    Eigen::VectorXd to_rows(const GridFunction<N>& g) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(nodes_.size()));
        for (std::size_t r = 0; r < nodes_.size(); ++r) v[static_cast<Eigen::Index>(r)] = g.values[nodes_[r]];
        return v;
    }
    template <class F>
    Eigen::VectorXd sample_rows(F&& f) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(nodes_.size()));
        for (std::size_t r = 0; r < nodes_.size(); ++r) v[static_cast<Eigen::Index>(r)] = f(point_of_row(r));
        return v;
    }

private:
    Lattice<N> lattice_;
    std::vector<NodeKind> kind_;
    std::vector<std::int64_t> row_;
    std::vector<std::size_t> nodes_;
    std::vector<double> theta_;
    std::vector<double> depth_;
};

/// Lattice with `points` nodes per axis spanning the domain's bounding box
/// (cube of the widest extent).
template <std::size_t N>
Lattice<N> box_lattice(const Domain<N>& d, int points) {
    auto [lo, hi] = d.bounding_box();
    double w = 0.0;
    for (std::size_t i = 0; i < N; ++i) w = std::max(w, hi[i] - lo[i]);
    Point<N> top = lo;
    for (auto& v : top) v += w;
    Lattice<N> l = Lattice<N>::spanning(lo, top, points);
    return l.covering(lo, hi);
}

struct DiscretizeOptions {
    bool enforce_resolution = true;  // require h <= rho/4
    double tolerance = 1e-12;        // CG relative residual
    double iteration_factor = 20.0;  // cap = factor·sqrt(unknowns)
};

/// −L_h = V⁻¹ S with S sparse symmetric positive definite (rows = interior
/// nodes, Dirichlet values eliminated) and V = hⁿ the control volumes. A cut
/// edge contributes a(·)/(θh²) to the diagonal only, which keeps S symmetric.
template <std::size_t N>
class DiscreteOperator {
public:
    using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    DiscreteOperator(const Domain<N>& d, std::shared_ptr<const CoefficientField<N>> a, const Lattice<N>& lattice,
                     DiscretizeOptions opt = {})
        : domain_(d), coeff_(std::move(a)), grid_(d, lattice), opt_(opt) {
        assemble();
    }

    const Domain<N>& domain() const { return domain_; }
    const CoefficientField<N>& coefficients() const { return *coeff_; }
    std::shared_ptr<const CoefficientField<N>> coefficients_ptr() const { return coeff_; }
    const Grid<N>& grid() const { return grid_; }
    /// The symmetric matrix S.
    const Sparse& matrix() const { return S_; }
    /// Control volumes V (quadrature weights of interior nodes).
    const Eigen::VectorXd& volumes() const { return V_; }
    double volume(std::size_t row) const { return V_[static_cast<Eigen::Index>(row)]; }
    double h() const { return grid_.h(); }
    double tolerance() const { return opt_.tolerance; }

    /// (−L_h) v.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return (S_ * v).cwiseQuotient(V_); }

    /// Right-hand-side contribution of Dirichlet data g on the boundary crossings.
    Eigen::VectorXd boundary_rhs(const std::function<double(const Point<N>&)>& g) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.unknowns()));
        const double h = grid_.h();
        const auto& L = grid_.lattice();
        for (std::size_t r = 0; r < grid_.unknowns(); ++r) {
            Point<N> x = grid_.point_of_row(r);
            NodeIndex<N> idx = grid_.index_of_row(r);
            const auto ri = static_cast<Eigen::Index>(r);
            for (std::size_t a = 0; a < N; ++a)
                for (int s : {-1, 1}) {
                    if (grid_.interior(shifted<N>(idx, static_cast<int>(a), s))) continue;
                    double th = grid_.theta(r, a, s);
                    Point<N> cross = x;
                    cross[a] += s * th * h;
                    b[ri] += boundary_face(r, a, s) * g(cross) / V_[ri];
                }
            if (coeff_->diagonal()) continue;
            for (std::size_t a = 0; a < N; ++a)
                for (std::size_t c = a + 1; c < N; ++c)
                    for (int s : {-1, 1})
                        for (int t : {-1, 1}) {
                            NodeIndex<N> nb = shifted<N>(shifted<N>(idx, static_cast<int>(a), s), static_cast<int>(c), t);
                            if (grid_.interior(nb)) continue;
                            b[ri] += cross_weight(idx, a, c, s, t) * std::sqrt(V_[ri] * std::pow(h, double(N))) *
                                     g(L.point(nb)) / V_[ri];
                        }
        }
        return b;
    }

    /// Solves (−L_h) u = b; throws SolverError if CG misses the tolerance within the cap.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        if (b.norm() == 0.0) return Eigen::VectorXd::Zero(b.size());
        Eigen::ConjugateGradient<Sparse, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(opt_.tolerance);
        cg.setMaxIterations(static_cast<Eigen::Index>(opt_.iteration_factor * std::sqrt(double(grid_.unknowns()))));
        cg.compute(S_);
        Eigen::VectorXd u = cg.solve(b.cwiseProduct(V_));
        if (cg.info() != Eigen::Success || cg.error() > opt_.tolerance)
            throw SolverError("conjugate gradients did not reach the tolerance within the iteration cap");
        last_iterations_ = static_cast<std::size_t>(cg.iterations());
        return u;
    }
    std::size_t last_iterations() const { return last_iterations_; }

private:
    /// Control-volume width along `axis` in units of h.
    double width(std::size_t, std::size_t) const { return 1.0; }

    /// Weight of a cut face: a·(transverse widths)·hⁿ⁻¹/(θh).
    double boundary_face(std::size_t r, std::size_t a, int s) const {
        const double h = grid_.h();
        double th = grid_.theta(r, a, s);
        Point<N> mid = grid_.point_of_row(r);
        mid[a] += 0.5 * s * th * h;
        double area = std::pow(h, double(N) - 1.0);
        for (std::size_t b = 0; b < N; ++b)
            if (b != a) area *= width(r, b);
        return coeff_->tensor(mid)(a, a) * area / (th * h);
    }

    /// Coefficient of u at idx + s e_a + t e_c in row idx of L_h (cross terms).
    double cross_weight(const NodeIndex<N>& idx, std::size_t a, std::size_t c, int s, int t) const {
        const double h = grid_.h();
        const auto& L = grid_.lattice();
        double A1 = coeff_->tensor(L.point(shifted<N>(idx, static_cast<int>(a), s)))(a, c);
        double A2 = coeff_->tensor(L.point(shifted<N>(idx, static_cast<int>(c), t)))(a, c);
        return s * t * (A1 + A2) / (4.0 * h * h);
    }

    void assemble() {
        const double h = grid_.h();
        const std::size_t M = grid_.unknowns();
        V_.resize(static_cast<Eigen::Index>(M));
        for (std::size_t r = 0; r < M; ++r) {
            double v = std::pow(h, double(N));
            for (std::size_t a = 0; a < N; ++a) v *= width(r, a);
            V_[static_cast<Eigen::Index>(r)] = v;
        }
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(M * (2 * N + 1 + (coeff_->diagonal() ? 0 : 2 * N * (N - 1))));
        for (std::size_t r = 0; r < M; ++r) {
            Point<N> x = grid_.point_of_row(r);
            NodeIndex<N> idx = grid_.index_of_row(r);
            double diag = 0.0;
            for (std::size_t a = 0; a < N; ++a)
                for (int s : {-1, 1}) {
                    NodeIndex<N> nb = shifted<N>(idx, static_cast<int>(a), s);
                    std::int64_t rn = grid_.row_of(nb);
                    if (rn >= 0) {
                        Point<N> mid = x;
                        mid[a] += 0.5 * s * h;
                        double area = std::pow(h, double(N) - 1.0);
                        for (std::size_t b = 0; b < N; ++b)
                            if (b != a) area *= std::sqrt(width(r, b) * width(static_cast<std::size_t>(rn), b));
                        double c = coeff_->tensor(mid)(a, a) * area / h;
                        diag += c;
                        trip.emplace_back(static_cast<int>(r), static_cast<int>(rn), -c);
                    } else {
                        diag += boundary_face(r, a, s);
                    }
                }
            trip.emplace_back(static_cast<int>(r), static_cast<int>(r), diag);
            if (coeff_->diagonal()) continue;
            for (std::size_t a = 0; a < N; ++a)
                for (std::size_t c = a + 1; c < N; ++c)
                    for (int s : {-1, 1})
                        for (int t : {-1, 1}) {
                            NodeIndex<N> nb = shifted<N>(shifted<N>(idx, static_cast<int>(a), s), static_cast<int>(c), t);
                            std::int64_t rn = grid_.row_of(nb);
                            if (rn < 0) continue;
                            double vv = std::sqrt(V_[static_cast<Eigen::Index>(r)] * V_[static_cast<Eigen::Index>(rn)]);
                            trip.emplace_back(static_cast<int>(r), static_cast<int>(rn), -vv * cross_weight(idx, a, c, s, t));
                        }
        }
        S_.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
        S_.setFromTriplets(trip.begin(), trip.end());
        S_.makeCompressed();
    }

    Domain<N> domain_;
    std::shared_ptr<const CoefficientField<N>> coeff_;
    Grid<N> grid_;
    DiscretizeOptions opt_;
    Sparse S_;
    Eigen::VectorXd V_;
    mutable std::atomic<std::size_t> last_iterations_{0};
};

template <std::size_t N>
std::shared_ptr<const DiscreteOperator<N>> discretize(const Domain<N>& d, std::shared_ptr<const CoefficientField<N>> a,
                                                      const Lattice<N>& lattice, DiscretizeOptions opt = {}) {
    if (opt.enforce_resolution && lattice.h > d.rho() / 4.0 * (1.0 + 1e-12))
        throw PreconditionError("discretize: grid spacing exceeds rho/4");
    return std::make_shared<DiscreteOperator<N>>(d, std::move(a), lattice, opt);
}

template <std::size_t N>
std::shared_ptr<const DiscreteOperator<N>> discretize(const Domain<N>& d, std::shared_ptr<const CoefficientField<N>> a,
                                                      double h, DiscretizeOptions opt = {}) {
    auto [lo, hi] = d.bounding_box();
    Lattice<N> l;
    l.origin = lo;
    l.h = h;
    return discretize(d, std::move(a), l.covering(lo, hi), opt);
}

// ---------------------------------------------------------------------------
// Green columns.

/// Runs f(i) for i in [0, n) on a small thread pool.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mutex;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

template <std::size_t N>
class GreenTable {
public:
    using Column = std::shared_ptr<const Eigen::VectorXd>;

    explicit GreenTable(std::shared_ptr<const DiscreteOperator<N>> op) : op_(std::move(op)) {}

    const DiscreteOperator<N>& op() const { return *op_; }
    std::shared_ptr<const DiscreteOperator<N>> op_ptr() const { return op_; }
    const Grid<N>& grid() const { return op_->grid(); }
    double h() const { return op_->h(); }
    /// ε_sym = 10 × solver tolerance.
    double eps_sym() const { return 10.0 * op_->tolerance(); }

    /// G_h(x, ·) for the source at interior row x; solves (−L_h) g = δ_x / V_x on first use.
    Column column(std::size_t row) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(row);
            if (it != cache_.end()) return it->second;
        }
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid().unknowns()));
        b[static_cast<Eigen::Index>(row)] = 1.0 / op_->volume(row);
        auto col = std::make_shared<const Eigen::VectorXd>(op_->solve(b));
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(row, col).first->second;
    }
    bool cached(std::size_t row) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.count(row) > 0;
    }
    std::size_t cached_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.size();
    }
    std::vector<std::size_t> cached_rows() const {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<std::size_t> r;
        for (const auto& kv : cache_) r.push_back(kv.first);
        std::sort(r.begin(), r.end());
        return r;
    }
    void warm(const std::vector<std::size_t>& rows) const {
        std::vector<std::size_t> todo;
        for (auto r : rows)
            if (!cached(r)) todo.push_back(r);
        std::sort(todo.begin(), todo.end());
        todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
        parallel_for(todo.size(), [&](std::size_t i) { column(todo[i]); });
    }
    void drop(std::size_t row) const {
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.erase(row);
    }

    /// G_h between two interior rows: column at y if cached, else at x, else solve at y.
    double value_rows(std::size_t rx, std::size_t ry) const {
        if (cached(ry)) return (*column(ry))[static_cast<Eigen::Index>(rx)];
        if (cached(rx)) return (*column(rx))[static_cast<Eigen::Index>(ry)];
        return (*column(ry))[static_cast<Eigen::Index>(rx)];
    }
    /// G_h on lattice nodes; zero when either node is not interior.
    double value(const NodeIndex<N>& x, const NodeIndex<N>& y) const {
        std::int64_t rx = grid().row_of(x), ry = grid().row_of(y);
        if (rx < 0 || ry < 0) return 0.0;
        return value_rows(static_cast<std::size_t>(rx), static_cast<std::size_t>(ry));
    }

private:
    std::shared_ptr<const DiscreteOperator<N>> op_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::size_t, Column> cache_;
};

template <std::size_t N>
GridFunction<N> green_column(const GreenTable<N>& gt, std::size_t row) {
    return gt.grid().to_grid(*gt.column(row));
}

/// max |G_h(x,y) − G_h(y,x)| over pairs of cached rows.
template <std::size_t N>
double symmetry_defect(const GreenTable<N>& gt, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    double m = 0.0;
    for (auto [a, b] : pairs)
        m = std::max(m, std::abs((*gt.column(a))[static_cast<Eigen::Index>(b)] - (*gt.column(b))[static_cast<Eigen::Index>(a)]));
    return m;
}

/// Smallest entry over cached columns.
template <std::size_t N>
double positivity_floor(const GreenTable<N>& gt) {
    double m = kInf;
    for (auto r : gt.cached_rows()) m = std::min(m, gt.column(r)->minCoeff());
    return m;
}

// ---------------------------------------------------------------------------
// Green's operator.

/// u = Σ_y V_y G_h(·,y) f(y), by one solve.
template <std::size_t N>
Eigen::VectorXd apply_green(const GreenTable<N>& gt, const Eigen::VectorXd& f) {
    return gt.op().solve(f);
}

/// Same, by dense summation over columns (cross-check on small grids).
template <std::size_t N>
Eigen::VectorXd apply_green_by_sum(const GreenTable<N>& gt, const Eigen::VectorXd& f) {
    std::vector<std::size_t> support;
    for (Eigen::Index r = 0; r < f.size(); ++r)
        if (f[r] != 0.0) support.push_back(static_cast<std::size_t>(r));
    gt.warm(support);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(f.size());
    for (auto r : support) u += (gt.op().volume(r) * f[static_cast<Eigen::Index>(r)]) * *gt.column(r);
    return u;
}

/// ‖(−L_h) G f − f‖ / ‖f‖.
template <std::size_t N>
double residual_check(const DiscreteOperator<N>& op, const GreenTable<N>& gt, const Eigen::VectorXd& f) {
    double nf = f.norm();
    if (nf == 0.0) return 0.0;
    return (op.apply(apply_green(gt, f)) - f).norm() / nf;
}

/// −L_h u = f in Ω, u = g on ∂Ω.
template <std::size_t N>
GridFunction<N> dirichlet_solve(const DiscreteOperator<N>& op, const std::function<double(const Point<N>&)>& g,
                                const std::function<double(const Point<N>&)>& f, double* residual = nullptr) {
    Eigen::VectorXd rhs = op.grid().sample_rows(f) + op.boundary_rhs(g);
    Eigen::VectorXd u = op.solve(rhs);
    if (residual) *residual = rhs.norm() > 0 ? (op.apply(u) - rhs).norm() / rhs.norm() : 0.0;
    GridFunction<N> out = op.grid().to_grid(u);
    const auto& L = op.grid().lattice();
    for (std::size_t k = 0; k < L.size(); ++k)
        if (op.grid().row_of_node(k) < 0) out.values[k] = g(L.point(L.unlinear(k)));
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference stencils on the lattice of a grid.

template <std::size_t N>
struct Tap {
    NodeIndex<N> node;
    double weight;
};

namespace detail {
/// Weights w with Σ w_k t_k^p / p! = [p == order], p < t.size().
inline std::vector<double> fd_weights(const std::vector<double>& t, int order) {
    const int K = static_cast<int>(t.size());
    Eigen::MatrixXd V(K, K);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
    for (int p = 0; p < K; ++p) {
        double fact = std::tgamma(p + 1.0);
        for (int k = 0; k < K; ++k) V(p, k) = std::pow(t[static_cast<std::size_t>(k)], p) / fact;
    }
    rhs[order] = 1.0;
    Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    return {w.data(), w.data() + K};
}
}  // namespace detail

/// 1-D stencil for the order-m derivative along `axis` at an interior node.
/// Central where the neighbours are interior; otherwise one-sided, using the
/// boundary crossing (value zero) when allow_crossing is set.
template <std::size_t N>
std::vector<Tap<N>> axis_stencil(const Grid<N>& g, const NodeIndex<N>& node, std::size_t axis, int m,
                                 bool allow_crossing) {
    std::int64_t row = g.row_of(node);
    if (row < 0) throw StencilError("derivative stencil centred off the interior");
    struct Sample {
        double t;
        bool zero;
        NodeIndex<N> node;
    };
    std::vector<Sample> pts{{0.0, false, node}};
    const int reach = m + 2;
    for (int s : {-1, 1}) {
        NodeIndex<N> cur = node;
        std::int64_t cur_row = row;
        for (int k = 1; k <= reach; ++k) {
            NodeIndex<N> nb = shifted<N>(cur, static_cast<int>(axis), s);
            std::int64_t rn = g.row_of(nb);
            if (rn >= 0) {
                pts.push_back({double(s * k), false, nb});
                cur = nb;
                cur_row = rn;
                continue;
            }
            if (allow_crossing) {
                double th = g.theta(static_cast<std::size_t>(cur_row), axis, s);
                pts.push_back({s * (k - 1 + th), true, nb});
            }
            break;
        }
    }
    auto has = [&](double t) {
        return std::any_of(pts.begin(), pts.end(), [&](const Sample& p) { return !p.zero && p.t == t; });
    };
    std::vector<Sample> use;
    if (m <= 2 && has(-1.0) && has(1.0)) {
        for (const auto& p : pts)
            if (!p.zero && std::abs(p.t) <= 1.0) use.push_back(p);
    } else {
        std::sort(pts.begin(), pts.end(), [](const Sample& a, const Sample& b) {
            return std::abs(a.t) < std::abs(b.t) || (std::abs(a.t) == std::abs(b.t) && a.t < b.t);
        });
        std::size_t want = static_cast<std::size_t>(m + 2);
        if (pts.size() < static_cast<std::size_t>(m + 1)) throw StencilError("derivative stencil unresolvable");
        use.assign(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(std::min(want, pts.size())));
    }
    std::vector<double> t;
    for (const auto& p : use) t.push_back(p.t);
    auto w = detail::fd_weights(t, m);
    const double scale = std::pow(g.h(), -m);
    std::vector<Tap<N>> taps;
    for (std::size_t k = 0; k < use.size(); ++k)
        if (!use[k].zero) taps.push_back({use[k].node, w[k] * scale});
    return taps;
}

/// Taps of ∂^β at an interior node, |β| ≤ 3: nested 1-D stencils, outer ones
/// restricted to interior nodes, the innermost allowed to use crossings.
template <std::size_t N>
std::vector<Tap<N>> derivative_taps(const Grid<N>& g, const NodeIndex<N>& node, const MultiIndex<N>& beta) {
    if (order(beta) > 3) throw CapabilityError("derivative order above 3");
    std::vector<std::size_t> axes;
    for (std::size_t a = 0; a < N; ++a)
        if (beta[a] > 0) axes.push_back(a);
    if (axes.empty()) {
        if (g.row_of(node) < 0) return {};
        return {{node, 1.0}};
    }
    std::map<NodeIndex<N>, double> cur{{node, 1.0}};
    for (std::size_t i = 0; i < axes.size(); ++i) {
        bool innermost = i + 1 == axes.size();
        std::map<NodeIndex<N>, double> next;
        for (const auto& [n, w] : cur)
            for (const auto& t : axis_stencil(g, n, axes[i], beta[axes[i]], innermost)) next[t.node] += w * t.weight;
        cur.swap(next);
    }
    std::vector<Tap<N>> taps;
    for (const auto& [n, w] : cur)
        if (w != 0.0) taps.push_back({n, w});
    return taps;
}

/// ∂_x^γ ∂_y^β G_h(x, y) at interior nodes by finite differences of cached columns.
template <std::size_t N>
double green_derivatives(const GreenTable<N>& gt, const NodeIndex<N>& x, const NodeIndex<N>& y,
                         const MultiIndex<N>& beta, const MultiIndex<N>& gamma = {}) {
    const auto& g = gt.grid();
    if (!g.interior(x) || !g.interior(y)) {
        if (order(beta) + order(gamma) == 0) return 0.0;
        throw StencilError("derivative requested at a non-interior node");
    }
    auto ty = derivative_taps(g, y, beta);
    auto tx = derivative_taps(g, x, gamma);
    // Solve columns for whichever side has fewer taps.
    bool by_y = ty.size() <= tx.size();
    std::vector<std::size_t> rows;
    for (const auto& t : by_y ? ty : tx) rows.push_back(static_cast<std::size_t>(g.row_of(t.node)));
    gt.warm(rows);
    double s = 0.0;
    for (const auto& a : tx)
        for (const auto& b : ty) {
            auto ra = static_cast<Eigen::Index>(g.row_of(a.node)), rb = static_cast<Eigen::Index>(g.row_of(b.node));
            double v = by_y ? (*gt.column(static_cast<std::size_t>(rb)))[ra] : (*gt.column(static_cast<std::size_t>(ra)))[rb];
            s += a.weight * b.weight * v;
        }
    return s;
}

/// ∂^σ of a grid function (rows) at every interior node whose stencil resolves; NaN elsewhere.
template <std::size_t N>
Eigen::VectorXd derivative_rows(const Grid<N>& g, const Eigen::VectorXd& u, const MultiIndex<N>& sigma) {
    Eigen::VectorXd out(u.size());
    for (std::size_t r = 0; r < g.unknowns(); ++r) {
        try {
            double s = 0.0;
            for (const auto& t : derivative_taps(g, g.index_of_row(r), sigma)) s += t.weight * u[g.row_of(t.node)];
            out[static_cast<Eigen::Index>(r)] = s;
        } catch (const StencilError&) {
            out[static_cast<Eigen::Index>(r)] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

/// Sparse matrix D with (D u)_r = ∂^σ u at row r (rows without a stencil left empty).
template <std::size_t N>
Eigen::SparseMatrix<double> derivative_matrix(const Grid<N>& g, const MultiIndex<N>& sigma) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < g.unknowns(); ++r) {
        try {
            for (const auto& t : derivative_taps(g, g.index_of_row(r), sigma))
                trip.emplace_back(static_cast<int>(r), static_cast<int>(g.row_of(t.node)), t.weight);
        } catch (const StencilError&) {
        }
    }
    Eigen::SparseMatrix<double> D(static_cast<Eigen::Index>(g.unknowns()), static_cast<Eigen::Index>(g.unknowns()));
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
}

// ---------------------------------------------------------------------------
// Off-grid evaluation.

/// Tricubic (n-cubic) Lagrange interpolation of lattice values around p.
/// `value(node)` supplies the lattice data.
template <std::size_t N, class F>
double lagrange_interpolate(const Lattice<N>& L, const Point<N>& p, F&& value) {
    std::array<std::int64_t, N> base;
    std::array<std::array<double, 4>, N> w;
    for (std::size_t a = 0; a < N; ++a) {
        double u = (p[a] - L.origin[a]) / L.h;
        base[a] = static_cast<std::int64_t>(std::floor(u)) - 1;
        double t = u - static_cast<double>(base[a]);  // in [1, 2)
        for (int k = 0; k < 4; ++k) {
            double l = 1.0;
            for (int j = 0; j < 4; ++j)
                if (j != k) l *= (t - j) / double(k - j);
            w[a][static_cast<std::size_t>(k)] = l;
        }
    }
    double s = 0.0;
    std::array<int, N> o{};
    while (true) {
        NodeIndex<N> n;
        double wt = 1.0;
        for (std::size_t a = 0; a < N; ++a) {
            n[a] = base[a] + o[a];
            wt *= w[a][static_cast<std::size_t>(o[a])];
        }
        s += wt * value(n);
        std::size_t a = 0;
        while (a < N && ++o[a] == 4) o[a++] = 0;
        if (a == N) break;
    }
    return s;
}

}  // namespace greenlab

#endif  // GREENLAB_SOLVER_HPP
