#ifndef GREENLAB_REPORT_IO_HPP
#define GREENLAB_REPORT_IO_HPP

// JSON and CSV serialization of estimate reports.

#include <fstream>

#include "json.hpp"

#include "greenlab/kernel_analysis.hpp"

namespace greenlab {

using Json = nlohmann::ordered_json;

namespace detail {
/// Non-finite numbers are written as strings so the JSON stays valid.
inline Json number(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}
}  // namespace detail

template <std::size_t N>
Json to_json(const EstimateReport<N>& r, const std::string& config_hash = "") {
    Json j;
    j["tag"] = r.tag;
    j["estimate"] = r.name;
    j["kernel"] = r.kernel;
    j["constant"] = detail::number(r.constant);
    j["pass"] = r.pass;
    j["threshold"] = r.threshold;
    Json w = Json::array();
    for (const auto& p : r.witness) w.push_back(Json(std::vector<double>(p.begin(), p.end())));
    j["witness"] = w;
    j["witness_ratio"] = detail::number(r.witness_ratio);
    j["samples"] = r.samples;
    j["band"] = {{"min_separation", r.band.min_separation},
                 {"min_depth_x", r.band.min_depth_x},
                 {"min_depth_y", r.band.min_depth_y}};
    j["widened_constant"] = detail::number(r.widened_constant);
    j["widened_samples"] = r.widened_samples;
    j["band_stable"] = r.band_stable;
    Json st = Json::array();
    for (const auto& s : r.strata)
        st.push_back({{"lo", detail::number(s.lo)}, {"hi", detail::number(s.hi)}, {"samples", s.samples},
                      {"constant", detail::number(s.constant)}});
    j["strata"] = st;
    j["stratum_growth"] = detail::number(r.stratum_growth);
    j["resolution"] = r.resolution;
    j["seed"] = r.seed;
    if (!r.note.empty()) j["note"] = r.note;
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    return j;
}

inline std::string csv_header() {
    return "tag,estimate,kernel,resolution,constant,pass,samples,widened_constant,stratum_growth,seed";
}

template <std::size_t N>
std::string csv_row(const EstimateReport<N>& r) {
    std::ostringstream s;
    s.precision(12);
    s << r.tag << ',' << r.name << ',' << r.kernel << ',' << r.resolution << ',' << r.constant << ','
      << (r.pass ? 1 : 0) << ',' << r.samples << ',' << r.widened_constant << ',' << r.stratum_growth << ',' << r.seed;
    return s.str();
}

inline void write_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace greenlab

#endif  // GREENLAB_REPORT_IO_HPP
