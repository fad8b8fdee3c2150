#pragma once

#include "average.hpp"
#include "spectral.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef PHIHARM_VERSION
#define PHIHARM_VERSION "0.0.0"
#endif

namespace phiharm {

using Json = nlohmann::ordered_json;

// ---- config parsing ------------------------------------------------------------------------

namespace cfg {

inline void require_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigParse, where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw Error(ErrorKind::ConfigParse, where + ": unknown key '" + k + "'");
}

template <class T>
T get(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorKind::ConfigParse, where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigParse, where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const Json& j, const std::string& key, T dflt, const std::string& where) {
    return j.contains(key) ? get<T>(j, key, where) : dflt;
}

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

inline Json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileIO, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ConfigParse, path + ": " + e.what());
    }
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::FileIO, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorKind::FileIO, "write failed for " + path);
}

}  // namespace cfg

struct ChartSpec {
    std::string kind;
    int dim = 0;
    std::vector<double> axes;
    double radius = 3.0;

    ImmersionChart build() const {
        if (kind == "sphere") return sphere_chart(dim);
        if (kind == "ellipsoid") return ellipsoid_chart(cfg::to_vec(axes));
        if (kind == "paraboloid") return paraboloid_chart(dim, radius);
        if (kind == "torus") return torus_chart(dim);
        throw Error(ErrorKind::ConfigParse, "unknown chart kind '" + kind + "'");
    }
    Json to_json() const {
        Json j;
        j["kind"] = kind;
        if (kind == "ellipsoid")
            j["axes"] = axes;
        else
            j["dim"] = dim;
        if (kind == "paraboloid") j["radius"] = radius;
        return j;
    }
};

inline ChartSpec parse_chart(const Json& j, const std::string& where = "chart") {
    cfg::require_keys(j, {"kind", "dim", "axes", "radius"}, where);
    ChartSpec c;
    c.kind = cfg::get<std::string>(j, "kind", where);
    if (c.kind == "ellipsoid") {
        cfg::require_keys(j, {"kind", "axes"}, where);
        c.axes = cfg::get<std::vector<double>>(j, "axes", where);
        if (c.axes.size() < 2) throw Error(ErrorKind::ConfigParse, where + ": ellipsoid needs >= 2 axes");
        for (double a : c.axes)
            if (!(a > 0.0)) throw Error(ErrorKind::ConfigParse, where + ": axes must be positive");
        c.dim = static_cast<int>(c.axes.size()) - 1;
    } else if (c.kind == "sphere" || c.kind == "torus" || c.kind == "paraboloid") {
        cfg::require_keys(j, c.kind == "paraboloid" ? std::set<std::string>{"kind", "dim", "radius"}
                                                    : std::set<std::string>{"kind", "dim"},
                          where);
        c.dim = cfg::get<int>(j, "dim", where);
        if (c.dim < 1) throw Error(ErrorKind::ConfigParse, where + ": dim must be >= 1");
        c.radius = cfg::get_or<double>(j, "radius", 3.0, where);
    } else {
        throw Error(ErrorKind::ConfigParse, where + ": unknown chart kind '" + c.kind + "'");
    }
    return c;
}

// Named shorthand: sphere5, torus2, ...
inline ChartSpec chart_from_name(const std::string& s) {
    for (std::string k : {"sphere", "torus", "paraboloid"})
        if (s.rfind(k, 0) == 0 && s.size() > k.size()) {
            try {
                return {k, std::stoi(s.substr(k.size())), {}, 3.0};
            } catch (const std::exception&) {
                break;
            }
        }
    throw Error(ErrorKind::ConfigParse, "unknown chart name '" + s + "'");
}

inline std::vector<int> default_resolution(const ImmersionChart& c) {
    if (c.kind == ChartKind::Sphere) {
        if (c.n == 1) return {64};
        if (c.n == 2) return {16, 32};
        if (c.n == 3) return {12, 12, 24};
        std::vector<int> r(c.n, 4);
        r.back() = 8;
        return r;
    }
    if (c.kind == ChartKind::TorusFlat) return std::vector<int>(c.n, c.n <= 2 ? 32 : 12);
    return std::vector<int>(c.n, c.n <= 2 ? 16 : 6);
}

struct QuadSpec {
    std::vector<int> grid;  // empty: chart default
    std::string scheme = "product_trapezoid";
    std::uint64_t seed = 0;

    QuadratureSet build(const ImmersionChart& c) const {
        if (scheme == "monte_carlo") return build_quadrature(c, grid.empty() ? std::vector<int>{20000} : grid, Scheme::MonteCarlo, seed);
        if (scheme != "product_trapezoid") throw Error(ErrorKind::ConfigParse, "unknown scheme '" + scheme + "'");
        auto g = grid.empty() ? default_resolution(c) : grid;
        if (static_cast<int>(g.size()) != c.n)
            throw Error(ErrorKind::ConfigParse, "grid needs " + std::to_string(c.n) + " entries");
        return build_quadrature(c, g);
    }
};

struct MapSpec {
    ChartSpec domain;
    ChartSpec target;
    Json map;  // {"kind": ..., parameters}
    QuadSpec quad;
    std::string representation = "analytic";

    Json to_json() const {
        Json j;
        j["domain"] = domain.to_json();
        j["target"] = target.to_json();
        j["map"] = map;
        j["grid"] = quad.grid;
        j["scheme"] = quad.scheme;
        j["seed"] = quad.seed;
        j["representation"] = representation;
        return j;
    }
};

inline MapSpec parse_map(const Json& j) {
    cfg::require_keys(j, {"domain", "target", "map", "grid", "scheme", "seed", "representation"}, "map config");
    MapSpec m;
    m.domain = parse_chart(cfg::get<Json>(j, "domain", "map config"), "domain");
    m.target = j.contains("target") ? parse_chart(j.at("target"), "target") : m.domain;
    m.map = cfg::get<Json>(j, "map", "map config");
    if (!m.map.is_object() || !m.map.contains("kind")) throw Error(ErrorKind::ConfigParse, "map: needs a kind");
    m.quad.grid = cfg::get_or<std::vector<int>>(j, "grid", {}, "map config");
    m.quad.scheme = cfg::get_or<std::string>(j, "scheme", "product_trapezoid", "map config");
    m.quad.seed = cfg::get_or<std::uint64_t>(j, "seed", 0, "map config");
    m.representation = cfg::get_or<std::string>(j, "representation", "analytic", "map config");
    if (m.representation != "analytic" && m.representation != "grid")
        throw Error(ErrorKind::ConfigParse, "representation must be analytic or grid");
    return m;
}

// u(x) = (A x + b) / |A x + b| into a round sphere.
inline AnalyticMap normalized_affine(const Mat& a, const Vec& b) {
    return {[a, b](const Vec& x) {
                Vec z = a * x + b;
                return Vec(z / z.norm());
            },
            [a, b](const Vec& x) {
                Vec z = a * x + b;
                double n = z.norm();
                Mat p = Mat::Identity(z.size(), z.size()) - z * z.transpose() / (n * n);
                return Mat(p * a / n);
            }};
}

inline AnalyticMap diagonal_map(const Vec& s) {
    return {[s](const Vec& x) { return Vec(s.cwiseProduct(x)); }, [s](const Vec&) { return Mat(s.asDiagonal()); }};
}

inline SmoothMap build_map(const MapSpec& spec) {
    auto dom = std::make_shared<const ImmersionChart>(spec.domain.build());
    auto tgt = std::make_shared<const ImmersionChart>(spec.target.build());
    auto quad = std::make_shared<const QuadratureSet>(spec.quad.build(*dom));
    const Json& m = spec.map;
    std::string kind = cfg::get<std::string>(m, "kind", "map");
    SmoothMap out;
    auto need = [&](std::set<std::string> keys) {
        keys.insert("kind");
        cfg::require_keys(m, keys, "map");
    };
    if (kind == "identity") {
        need({});
        if (spec.domain.to_json() != spec.target.to_json())
            throw Error(ErrorKind::ConfigParse, "identity needs equal domain and target");
        out = identity_map(dom, quad);
    } else if (kind == "constant") {
        need({"point"});
        out = constant_map(dom, quad, tgt, cfg::to_vec(cfg::get<std::vector<double>>(m, "point", "map")));
    } else if (kind == "circle_power") {
        need({"k"});
        if (dom->kind != ChartKind::Sphere || dom->n != 1 || tgt->kind != ChartKind::Sphere || tgt->n != 1)
            throw Error(ErrorKind::ConfigParse, "circle_power maps S^1 to S^1");
        out = make_analytic_map(dom, quad, tgt, circle_power(cfg::get<int>(m, "k", "map")));
    } else if (kind == "equatorial") {
        need({});
        if (dom->kind != ChartKind::Sphere || dom->n != 1 || tgt->kind != ChartKind::Sphere)
            throw Error(ErrorKind::ConfigParse, "equatorial maps S^1 into a sphere");
        out = make_analytic_map(dom, quad, tgt, equatorial(tgt->q));
    } else if (kind == "diagonal") {
        need({"scale"});
        auto s = cfg::get<std::vector<double>>(m, "scale", "map");
        if (static_cast<int>(s.size()) != dom->q || dom->q != tgt->q)
            throw Error(ErrorKind::ConfigParse, "diagonal scale must match both ambient dimensions");
        out = make_analytic_map(dom, quad, tgt, diagonal_map(cfg::to_vec(s)));
    } else if (kind == "normalized_affine") {
        need({"matrix", "shift"});
        if (tgt->kind != ChartKind::Sphere) throw Error(ErrorKind::ConfigParse, "normalized_affine needs a sphere target");
        auto rows = cfg::get<std::vector<std::vector<double>>>(m, "matrix", "map");
        if (static_cast<int>(rows.size()) != tgt->q) throw Error(ErrorKind::ConfigParse, "matrix needs q_target rows");
        Mat a(tgt->q, dom->q);
        for (int r = 0; r < tgt->q; ++r) {
            if (static_cast<int>(rows[r].size()) != dom->q) throw Error(ErrorKind::ConfigParse, "matrix needs q_domain columns");
            for (int c = 0; c < dom->q; ++c) a(r, c) = rows[r][c];
        }
        Vec b = m.contains("shift") ? cfg::to_vec(cfg::get<std::vector<double>>(m, "shift", "map")) : Vec::Zero(tgt->q);
        if (b.size() != tgt->q) throw Error(ErrorKind::ConfigParse, "shift needs q_target entries");
        out = make_analytic_map(dom, quad, tgt, normalized_affine(a, b));
    } else {
        throw Error(ErrorKind::ConfigParse, "unknown map kind '" + kind + "'");
    }
    if (spec.representation == "grid") out = sample_to_grid(out);
    return out;
}

inline SpectrumModel parse_spectrum(const Json& j) {
    cfg::require_keys(j, {"dim", "c", "isometry_dim", "eigenpairs"}, "spectrum");
    SpectrumModel s;
    s.dim = cfg::get<int>(j, "dim", "spectrum");
    s.einstein_c = cfg::get<double>(j, "c", "spectrum");
    s.isometry_dim = cfg::get<int>(j, "isometry_dim", "spectrum");
    for (const auto& e : cfg::get<Json>(j, "eigenpairs", "spectrum")) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorKind::ConfigParse, "spectrum: eigenpairs are [lambda, multiplicity]");
        try {
            s.eigenpairs.push_back({e[0].get<double>(), e[1].get<int>()});
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::ConfigParse, std::string("spectrum: ") + ex.what());
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigParse, e.what());
    }
    return s;
}

inline Json spectrum_json(const SpectrumModel& s) {
    Json j;
    j["dim"] = s.dim;
    j["c"] = s.einstein_c;
    j["isometry_dim"] = s.isometry_dim;
    j["eigenpairs"] = Json::array();
    for (const auto& [l, m] : s.eigenpairs) j["eigenpairs"].push_back({l, m});
    return j;
}

// "2..8" or "5"
inline std::pair<int, int> parse_range(const std::string& s) {
    auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            int v = std::stoi(s);
            return {v, v};
        }
        return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
    } catch (const std::exception&) {
        throw Error(ErrorKind::ConfigParse, "bad range '" + s + "'");
    }
}

// ---- output --------------------------------------------------------------------------------

inline Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

struct Report {
    std::string command;
    Json inputs = Json::object();
    Json results = Json::object();
    double wall_seconds = 0.0;

    Json to_json() const {
        Json j;
        j["schema_version"] = "1";
        j["command"] = command;
        j["inputs"] = inputs;
        j["results"] = results;
        j["timings"] = {{"wall_seconds", wall_seconds}};
        j["tool"] = {{"name", "phiharm"}, {"version", PHIHARM_VERSION}};
        return j;
    }
    std::string dump() const { return to_json().dump(2) + "\n"; }
};

inline std::string fmt_num(double x) {
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

    template <class... T>
    void row(const T&... xs) {
        std::vector<std::string> cells{cell(xs)...};
        if (cells.size() != cols_) throw Error(ErrorKind::InvalidArgument, "csv row width mismatch");
        row_strings(cells);
    }
    const std::string& str() const { return out_; }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "true" : "false"; }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(double v) { return fmt_num(v); }
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ += (i ? "," : "") + cells[i];
        out_ += "\n";
    }
    std::size_t cols_;
    std::string out_;
};

// Hand-written polyline of log10(values) against index.
inline std::string svg_log_plot(const std::vector<double>& values, const std::string& title) {
    const double w = 640, h = 400, pad = 50;
    std::vector<double> ly;
    for (double v : values) ly.push_back(std::log10(std::max(v, 1e-300)));
    double lo = ly.empty() ? 0.0 : *std::min_element(ly.begin(), ly.end());
    double hi = ly.empty() ? 1.0 : *std::max_element(ly.begin(), ly.end());
    if (hi - lo < 1e-12) hi = lo + 1.0;
    std::ostringstream s;
    s << std::setprecision(6);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    s << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
    s << "<text x=\"4\" y=\"" << pad + 4 << "\" font-size=\"11\">" << hi << "</text>\n";
    s << "<text x=\"4\" y=\"" << h - pad << "\" font-size=\"11\">" << lo << "</text>\n";
    s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    double nx = std::max<double>(1.0, static_cast<double>(ly.size()) - 1.0);
    for (std::size_t i = 0; i < ly.size(); ++i) {
        double x = pad + (w - 2 * pad) * static_cast<double>(i) / nx;
        double y = h - pad - (h - 2 * pad) * (ly[i] - lo) / (hi - lo);
        s << (i ? " " : "") << x << "," << y;
    }
    s << "\"/>\n</svg>\n";
    return s.str();
}

inline Json verdict_json(const SsuVerdict& v) {
    Json j;
    j["is_ssu"] = v.is_ssu;
    j["marginal"] = v.marginal;
    j["converged"] = v.converged;
    j["worst_value"] = v.worst_value;
    j["tol"] = v.tol;
    j["method"] = to_string(v.method);
    j["samples_tested"] = v.samples_tested;
    j["witness_point"] = vec_json(v.witness_point);
    j["witness_direction"] = vec_json(v.witness_direction);
    return j;
}

inline Json trace_json(const DecayTrace& t) {
    Json j;
    j["status"] = t.status;
    j["seed"] = t.seed;
    j["kappa"] = t.kappa;
    j["xi"] = t.xi;
    j["xi_span"] = t.xi_span;
    j["zeta0"] = t.zeta0;
    j["iterations"] = t.steps.size();
    j["initial_energy"] = t.energies.front();
    j["final_energy"] = t.energies.back();
    j["trailing_ratio"] = t.trailing_ratio();
    j["strictly_decreasing"] = t.strictly_decreasing();
    j["energies"] = t.energies;
    return j;
}

inline std::string trace_csv(const DecayTrace& t) {
    Csv c({"iter", "energy", "ratio", "ell", "sign", "zeta"});
    c.row(0, t.energies[0], std::string(""), std::string(""), std::string(""), std::string(""));
    for (std::size_t i = 0; i < t.steps.size(); ++i)
        c.row(static_cast<int>(i + 1), t.energies[i + 1], t.rho_estimates[i], t.steps[i].ell, t.steps[i].sign, t.steps[i].zeta);
    return c.str();
}

}  // namespace phiharm
