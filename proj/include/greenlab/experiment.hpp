#ifndef GREENLAB_EXPERIMENT_HPP
#define GREENLAB_EXPERIMENT_HPP

// Experiment configuration: an INI file with typed fields, domain and
// coefficient presets, and a content hash embedded in every report.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "greenlab/elliptic.hpp"
#include "greenlab/geometry.hpp"

namespace greenlab {

struct ExperimentConfig {
    // [domain]
    std::string domain = "ball";
    double radius = 1.0;
    std::vector<double> semi_axes{1.0, 0.8, 0.6};
    double amplitude = 0.1;
    double width = 4.0;
    double thickness = 1.0;
    double window = 2.0;
    // [coefficients]
    std::string coefficients = "identity";
    double epsilon = 0.2;
    double omega = 2.0;
    double slope = 0.3;
    double reach = 1.5;
    double angle = 0.5;
    std::vector<double> diagonal{1.0, 1.0, 1.0};
    // [grid]
    std::vector<int> points{17, 33};
    bool enforce_resolution = false;
    double tolerance = 1e-12;
    // [run]
    unsigned seed = 1;
    std::string output = "out";
    // [band] in multiples of the coarsest grid spacing
    double band_separation = 4.0;
    double band_depth_x = 0.0;
    double band_depth_y = 2.0;
    double band_widening = 1.5;
    // [verify]
    std::vector<std::string> verifiers{"1.12", "1.13", "2.8", "1.10", "1.9", "1.7", "1.8"};
    double threshold = 1e3;
    std::size_t per_stratum = 8;
    std::size_t source_pool = 8;
    std::size_t triples = 200;
    std::size_t balls = 100;
    // [extend]
    double r_out = 0.0;
    std::size_t hormander_samples = 3;
    double hormander_rmax = 2.0;
    std::size_t lp_trials = 5;
    std::size_t duality_trials = 5;
    // [schauder]
    std::string schauder_case = "flat";
    double schauder_radius = 0.5;
};

inline const std::vector<std::string>& known_verifiers() {
    static const std::vector<std::string> v{"1.12", "1.13", "2.8", "1.10", "1.9", "1.7", "1.8"};
    return v;
}

namespace detail {
inline std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}
template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s << ' ';
        if constexpr (std::is_floating_point_v<T>)
            s << format_double(v[i]);
        else
            s << v[i];
    }
    return s.str();
}
}  // namespace detail

inline boost::property_tree::ptree to_ptree(const ExperimentConfig& c) {
    using detail::format_double;
    using detail::join;
    boost::property_tree::ptree t;
    t.put("domain.preset", c.domain);
    t.put("domain.radius", format_double(c.radius));
    t.put("domain.semi_axes", join(c.semi_axes));
    t.put("domain.amplitude", format_double(c.amplitude));
    t.put("domain.width", format_double(c.width));
    t.put("domain.thickness", format_double(c.thickness));
    t.put("domain.window", format_double(c.window));
    t.put("coefficients.preset", c.coefficients);
    t.put("coefficients.epsilon", format_double(c.epsilon));
    t.put("coefficients.omega", format_double(c.omega));
    t.put("coefficients.slope", format_double(c.slope));
    t.put("coefficients.reach", format_double(c.reach));
    t.put("coefficients.angle", format_double(c.angle));
    t.put("coefficients.diagonal", join(c.diagonal));
    t.put("grid.points", join(c.points));
    t.put("grid.enforce_resolution", c.enforce_resolution ? "true" : "false");
    t.put("grid.tolerance", format_double(c.tolerance));
    t.put("run.seed", c.seed);
    t.put("run.output", c.output);
    t.put("band.separation", format_double(c.band_separation));
    t.put("band.depth_x", format_double(c.band_depth_x));
    t.put("band.depth_y", format_double(c.band_depth_y));
    t.put("band.widening", format_double(c.band_widening));
    t.put("verify.verifiers", join(c.verifiers));
    t.put("verify.threshold", format_double(c.threshold));
    t.put("verify.per_stratum", c.per_stratum);
    t.put("verify.source_pool", c.source_pool);
    t.put("verify.triples", c.triples);
    t.put("verify.balls", c.balls);
    t.put("extend.r_out", format_double(c.r_out));
    t.put("extend.hormander_samples", c.hormander_samples);
    t.put("extend.hormander_rmax", format_double(c.hormander_rmax));
    t.put("extend.lp_trials", c.lp_trials);
    t.put("extend.duality_trials", c.duality_trials);
    t.put("schauder.case", c.schauder_case);
    t.put("schauder.radius", format_double(c.schauder_radius));
    return t;
}

namespace detail {
template <class T>
T parse_scalar(const std::string& field, const std::string& text) {
    std::istringstream s(text);
    T v;
    if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw ConfigError("field '" + field + "': expected true/false, got '" + text + "'");
    } else {
        s >> v;
        if (s.fail() || !(s >> std::ws).eof())
            throw ConfigError("field '" + field + "': cannot parse '" + text + "'");
        return v;
    }
}
template <class T>
std::vector<T> parse_list(const std::string& field, const std::string& text) {
    std::istringstream s(text);
    std::vector<T> out;
    std::string tok;
    while (s >> tok) out.push_back(parse_scalar<T>(field, tok));
    if (out.empty()) throw ConfigError("field '" + field + "': empty list");
    return out;
}
}  // namespace detail

/// Reads every known key present in the tree; unknown sections or keys are errors.
inline ExperimentConfig from_ptree(const boost::property_tree::ptree& t) {
    ExperimentConfig c;
    const ExperimentConfig defaults;
    auto known = to_ptree(defaults);
    for (const auto& [sec, sub] : t) {
        if (known.find(sec) == known.not_found()) throw ConfigError("unknown section [" + sec + "]");
        for (const auto& [key, val] : sub)
            if (known.get_child(sec).find(key) == known.get_child(sec).not_found())
                throw ConfigError("unknown field '" + sec + "." + key + "'");
    }
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto v = t.get_optional<std::string>(boost::property_tree::ptree::path_type(k, '.'));
        if (!v) return std::nullopt;
        return *v;
    };
    using detail::parse_list;
    using detail::parse_scalar;
#define GL_FIELD(key, member, T) \
    if (auto v = get(key)) c.member = parse_scalar<T>(key, *v);
#define GL_LIST(key, member, T) \
    if (auto v = get(key)) c.member = parse_list<T>(key, *v);
    if (auto v = get("domain.preset")) c.domain = *v;
    GL_FIELD("domain.radius", radius, double)
    GL_LIST("domain.semi_axes", semi_axes, double)
    GL_FIELD("domain.amplitude", amplitude, double)
    GL_FIELD("domain.width", width, double)
    GL_FIELD("domain.thickness", thickness, double)
    GL_FIELD("domain.window", window, double)
    if (auto v = get("coefficients.preset")) c.coefficients = *v;
    GL_FIELD("coefficients.epsilon", epsilon, double)
    GL_FIELD("coefficients.omega", omega, double)
    GL_FIELD("coefficients.slope", slope, double)
    GL_FIELD("coefficients.reach", reach, double)
    GL_FIELD("coefficients.angle", angle, double)
    GL_LIST("coefficients.diagonal", diagonal, double)
    GL_LIST("grid.points", points, int)
    GL_FIELD("grid.enforce_resolution", enforce_resolution, bool)
    GL_FIELD("grid.tolerance", tolerance, double)
    GL_FIELD("run.seed", seed, unsigned)
    if (auto v = get("run.output")) c.output = *v;
    GL_FIELD("band.separation", band_separation, double)
    GL_FIELD("band.depth_x", band_depth_x, double)
    GL_FIELD("band.depth_y", band_depth_y, double)
    GL_FIELD("band.widening", band_widening, double)
    GL_LIST("verify.verifiers", verifiers, std::string)
    GL_FIELD("verify.threshold", threshold, double)
    GL_FIELD("verify.per_stratum", per_stratum, std::size_t)
    GL_FIELD("verify.source_pool", source_pool, std::size_t)
    GL_FIELD("verify.triples", triples, std::size_t)
    GL_FIELD("verify.balls", balls, std::size_t)
    GL_FIELD("extend.r_out", r_out, double)
    GL_FIELD("extend.hormander_samples", hormander_samples, std::size_t)
    GL_FIELD("extend.hormander_rmax", hormander_rmax, double)
    GL_FIELD("extend.lp_trials", lp_trials, std::size_t)
    GL_FIELD("extend.duality_trials", duality_trials, std::size_t)
    if (auto v = get("schauder.case")) c.schauder_case = *v;
    GL_FIELD("schauder.radius", schauder_radius, double)
#undef GL_FIELD
#undef GL_LIST
    for (const auto& v : c.verifiers)
        if (std::find(known_verifiers().begin(), known_verifiers().end(), v) == known_verifiers().end())
            throw ConfigError("field 'verify.verifiers': unknown verifier '" + v + "'");
    for (int p : c.points)
        if (p < 5) throw ConfigError("field 'grid.points': need at least 5 points per axis");
    return c;
}

inline std::string to_ini(const ExperimentConfig& c) {
    std::ostringstream s;
    boost::property_tree::write_ini(s, to_ptree(c));
    return s.str();
}

inline ExperimentConfig parse_config(const std::string& text) {
    std::istringstream s(text);
    boost::property_tree::ptree t;
    try {
        boost::property_tree::read_ini(s, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    return from_ptree(t);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Hash of the experiment content; the output directory is not part of it.
inline std::string config_hash(ExperimentConfig c) {
    c.output.clear();
    std::string ini = to_ini(c);
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(ini.data(), ini.size());
    return s.str();
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_ini(a) == to_ini(b); }

template <std::size_t N>
Domain<N> make_domain(const ExperimentConfig& c) {
    if (c.domain == "ball") return make_ball<N>(c.radius);
    if (c.domain == "ellipsoid") {
        if (c.semi_axes.size() != N) throw ConfigError("field 'domain.semi_axes': need " + std::to_string(N) + " values");
        Point<N> a;
        std::copy(c.semi_axes.begin(), c.semi_axes.end(), a.begin());
        return make_ellipsoid<N>(a);
    }
    if (c.domain == "bumped_ball") return make_bumped_ball<N>(c.amplitude, c.width);
    if (c.domain == "half_space") return make_half_space<N>(c.window);
    if (c.domain == "slab") return make_slab<N>(c.thickness, c.window);
    throw ConfigError("field 'domain.preset': unknown preset '" + c.domain + "'");
}

template <std::size_t N>
std::shared_ptr<const CoefficientField<N>> make_coefficients(const ExperimentConfig& c) {
    if (c.coefficients == "identity") return identity_field<N>();
    if (c.coefficients == "sine") return sine_perturbed_field<N>(c.epsilon, c.omega);
    if (c.coefficients == "diag_linear") return diag_linear_field<N>(c.slope, c.reach);
    if (c.coefficients == "rotated") return rotated_field<N>(c.epsilon, c.omega, c.angle);
    if (c.coefficients == "constant_diagonal") {
        if (c.diagonal.size() != N) throw ConfigError("field 'coefficients.diagonal': need " + std::to_string(N) + " values");
        Point<N> d;
        std::copy(c.diagonal.begin(), c.diagonal.end(), d.begin());
        return constant_diagonal_field<N>(d);
    }
    throw ConfigError("field 'coefficients.preset': unknown preset '" + c.coefficients + "'");
}

}  // namespace greenlab

#endif  // GREENLAB_EXPERIMENT_HPP
