#pragma once

#include "acceptance.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <set>

namespace phiharm::cli {

enum Exit { kOk = 0, kVerdictFailure = 1, kInputError = 2 };

struct Common {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    std::string csv;
    std::string svg;
    std::vector<int> grid;
    std::map<std::string, double> tol;
};

struct Outcome {
    Report report;
    std::string table;  // CSV body, if the command produces one
    std::string svg;
    bool ok = true;
};

// --tol.<name> <value> cannot be declared up front; strip them before CLI11 sees argv.
inline std::vector<std::string> extract_tolerances(std::vector<std::string> args, std::map<std::string, double>& tol) {
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--tol.", 0) != 0) {
            rest.push_back(a);
            continue;
        }
        std::string name = a.substr(6), value;
        auto eq = name.find('=');
        if (eq != std::string::npos) {
            value = name.substr(eq + 1);
            name = name.substr(0, eq);
        } else if (i + 1 < args.size()) {
            value = args[++i];
        } else {
            throw Error(ErrorKind::ConfigParse, a + " needs a value");
        }
        try {
            std::size_t used = 0;
            tol[name] = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw Error(ErrorKind::ConfigParse, "bad tolerance value for " + name);
        }
        if (name.empty() || !(tol[name] > 0.0)) throw Error(ErrorKind::ConfigParse, "tolerances must be named and positive");
    }
    return rest;
}

inline Json tol_json(const std::map<std::string, double>& t) {
    Json j = Json::object();
    for (const auto& [k, v] : t) j[k] = v;
    return j;
}

inline double tol_or(const Common& c, const std::string& k, double dflt) {
    auto it = c.tol.find(k);
    return it == c.tol.end() ? dflt : it->second;
}

inline void check_known_tols(const Common& c, const std::set<std::string>& known) {
    for (const auto& [k, v] : c.tol)
        if (!known.count(k)) throw Error(ErrorKind::ConfigParse, "unknown tolerance '" + k + "'");
}

inline std::vector<int> expand_grid(const std::vector<int>& g, int n) {
    if (g.size() == 1) return std::vector<int>(n, g[0]);
    return g;
}

inline MapSpec load_map(const std::string& path, const Common& c) {
    auto spec = parse_map(cfg::read_file(path));
    if (!c.grid.empty()) spec.quad.grid = c.grid;
    auto dom = spec.domain.build();
    if (spec.quad.scheme == "product_trapezoid")
        spec.quad.grid = spec.quad.grid.empty() ? default_resolution(dom) : expand_grid(spec.quad.grid, dom.n);
    return spec;
}

// ---- commands ------------------------------------------------------------------------------

inline Outcome ssu_check(const Common& c, const std::string& chart_path, std::optional<double> p) {
    check_known_tols(c, {});
    auto spec = parse_chart(cfg::read_file(chart_path));
    auto chart = spec.build();
    auto grid = c.grid.empty() ? default_resolution(chart) : expand_grid(c.grid, chart.n);
    auto quad = build_quadrature(chart, grid);
    Outcome o;
    o.report.command = "ssu-check";
    o.report.inputs = {{"chart", spec.to_json()}, {"grid", grid}, {"seed", c.seed}};
    if (p) {
        o.report.inputs["p"] = *p;
        QuarticOptions qo;
        qo.seed = c.seed;
        SsuVerdict worst;
        worst.method = SsuMethod::QuarticSearch;
        for (const auto& fp : quad.points) {
            auto v = check_p_ssu(fp, *p, qo);
            worst.tol = std::max(worst.tol, v.tol);
            worst.converged = worst.converged && v.converged;
            if (v.worst_value > worst.worst_value) {
                worst.worst_value = v.worst_value;
                worst.witness_point = v.witness_point;
                worst.witness_direction = v.witness_direction;
            }
            ++worst.samples_tested;
        }
        finalize(worst);
        o.report.results = verdict_json(worst);
    } else {
        o.report.results = verdict_json(check_phi_ssu(chart, quad));
    }
    return o;
}

inline Outcome ssu_sweep(const Common& c, const std::string& kind, const std::string& dims) {
    check_known_tols(c, {});
    auto [lo, hi] = parse_range(dims);
    if (lo < 2 || hi < lo || hi > 12) throw Error(ErrorKind::ConfigParse, "dims must lie in 2..12");
    Outcome o;
    o.report.command = "ssu-sweep";
    o.report.inputs = {{"kind", kind}, {"dims", dims}, {"seed", c.seed}};
    Csv csv({"dim", "verdict", "worst_value"});
    Json rows = Json::array();
    for (int n = lo; n <= hi; ++n) {
        std::vector<FramedPoint> pts;
        if (kind == "sphere") {
            auto chart = sphere_chart(n);
            pts = build_quadrature(chart, witness_resolution(n)).points;
        } else if (kind == "paraboloid") {
            pts = detail::paraboloid_samples(n, 200, 3.0, c.seed);
        } else {
            throw Error(ErrorKind::ConfigParse, "sweep kind must be sphere or paraboloid");
        }
        auto v = check_phi_ssu(pts);
        csv.row(n, v.is_ssu, v.worst_value);
        rows.push_back({{"dim", n}, {"verdict", v.is_ssu}, {"worst_value", v.worst_value}});
    }
    o.report.results["rows"] = rows;
    o.table = csv.str();
    return o;
}

inline Outcome energy_eval(const Common& c, const std::string& map_path, double p) {
    check_known_tols(c, {});
    auto spec = load_map(map_path, c);
    auto m = build_map(spec);
    auto e = energies(m, p);
    Outcome o;
    o.report.command = "energy-eval";
    o.report.inputs = {{"map", spec.to_json()}, {"p", p}};
    o.report.results = {{"E", e.e}, {"E_phi", e.e_phi}, {"E_p", e.e_p}, {"tension_sup", tension_sup(m)}};
    return o;
}

inline Outcome variation_check(const Common& c, const std::string& map_path, const std::string& suite) {
    check_known_tols(c, {"first_variation", "second_variation"});
    if (suite != "default") throw Error(ErrorKind::ConfigParse, "unknown suite '" + suite + "'");
    double t1 = tol_or(c, "first_variation", 1e-4), t2 = tol_or(c, "second_variation", 1e-3);
    auto spec = load_map(map_path, c);
    auto m = build_map(spec);
    Outcome o;
    o.report.command = "variation-check";
    o.report.inputs = {{"map", spec.to_json()}, {"suite", suite}, {"tol", {{"first_variation", t1}, {"second_variation", t2}}}};
    Csv csv({"case", "kind", "analytic", "fd", "abs_err", "rel_err", "pass"});
    Json rows = Json::array();
    auto add = [&](const VariationRow& r, double tol) {
        bool pass = r.rel_err < tol;
        o.ok = o.ok && pass;
        csv.row(r.name, r.kind, r.analytic, r.fd, std::abs(r.analytic - r.fd), r.rel_err, pass);
        rows.push_back({{"case", r.name}, {"kind", r.kind}, {"analytic", r.analytic}, {"fd", r.fd}, {"rel_err", r.rel_err}, {"pass", pass}});
    };
    for (int l = 0; l < m.target->q; ++l) {
        VariationCase vc{"e" + std::to_string(l), m, VariationSpec::projection(Vec::Unit(m.target->q, l))};
        add(run_first(vc), t1);
        if (m.analytic()) add(run_second(vc), t2);
    }
    o.report.results["cases"] = rows;
    o.report.results["all_pass"] = o.ok;
    o.table = csv.str();
    return o;
}

inline Outcome flow_decay(const Common& c, const std::string& map_path, const std::string& target, int iters, double stop) {
    check_known_tols(c, {});
    auto spec = load_map(map_path, c);
    if (!target.empty()) spec.target = chart_from_name(target);
    auto m = build_map(spec);
    DecayOptions opt;
    opt.max_iters = iters;
    opt.stop_energy = stop;
    opt.seed = c.seed;
    auto tr = homotopy_decay(m, opt);
    Outcome o;
    o.report.command = "flow-decay";
    o.report.inputs = {{"map", spec.to_json()}, {"iters", iters}, {"stop_energy", stop}, {"seed", c.seed}};
    o.report.results = trace_json(tr);
    o.ok = tr.status != "stalled" && tr.status != "no_descent";
    if (tr.status == "stalled") o.report.results["error"] = to_string(ErrorKind::StalledDecay);
    if (tr.status == "no_descent") o.report.results["error"] = to_string(ErrorKind::NoDescentDirection);
    o.table = trace_csv(tr);
    o.svg = svg_log_plot(tr.energies, "log10 E_phi per iteration");
    return o;
}

inline Outcome index_spectrum(const Common& c, const std::string& spectrum_path, int sphere, std::optional<double> p) {
    check_known_tols(c, {});
    SpectrumModel s;
    if (!spectrum_path.empty())
        s = parse_spectrum(cfg::read_file(spectrum_path));
    else if (sphere > 0)
        s = sphere_spectrum(sphere, 6);
    else
        throw Error(ErrorKind::ConfigParse, "index needs --spectrum or --sphere");
    auto in = p ? p_index_nullity(s, *p) : phi_index_nullity(s);
    Outcome o;
    o.report.command = "index";
    o.report.inputs = {{"spectrum", spectrum_json(s)}, {"mode", p ? "p" : "phi"}};
    if (p) o.report.inputs["p"] = *p;
    o.report.results = {{"index", in.index}, {"nullity", in.nullity}, {"threshold", in.threshold},
                        {"phi_unstable", phi_unstable_criterion(s)}};
    return o;
}

inline Outcome index_table(const Common& c, const std::string& dims) {
    check_known_tols(c, {});
    auto [lo, hi] = parse_range(dims);
    if (lo < 2 || hi < lo || hi > 10) throw Error(ErrorKind::ConfigParse, "dims must lie in 2..10");
    Outcome o;
    o.report.command = "index-table";
    o.report.inputs = {{"dims", dims}};
    Csv csv({"n", "A_ssu", "C_phi_conformal", "C_negative", "D_unstable", "consistent"});
    Json rows = Json::array();
    for (const auto& r : sphere_equivalence_table(lo, hi)) {
        o.ok = o.ok && r.consistent();
        csv.row(r.n, r.ssu, r.phi_conformal, r.negative, r.unstable, r.consistent());
        rows.push_back({{"n", r.n}, {"A_ssu", r.ssu}, {"C_phi_conformal", r.phi_conformal}, {"C_scale", r.scale},
                        {"C_negative", r.negative}, {"D_unstable", r.unstable}, {"consistent", r.consistent()}});
    }
    o.report.results["rows"] = rows;
    o.report.results["all_consistent"] = o.ok;
    o.table = csv.str();
    return o;
}

inline Outcome acceptance(const Common& c, const std::vector<std::string>& only, std::ostream& lines) {
    AcceptanceConfig cfg;
    if (c.seed) cfg.seed = c.seed;
    cfg.tol = c.tol;
    std::set<std::string> known{"ellipsoid_bounds", "identity_tension", "first_variation", "second_variation", "average_target",
                                "average_domain", "decay_factor", "hessian", "killing"};
    check_known_tols(c, known);
    for (const auto& name : only) {
        bool found = false;
        for (const auto& e : criteria()) found = found || e.name == name || std::to_string(e.id) == name;
        if (!found) throw Error(ErrorKind::ConfigParse, "unknown criterion '" + name + "'");
    }
    Outcome o;
    o.report.command = "acceptance";
    o.report.inputs = {{"seed", cfg.seed}, {"only", only}, {"tol", tol_json(c.tol)}};
    Json rows = Json::array();
    Csv csv({"id", "name", "passed", "summary"});
    for (const auto& e : criteria()) {
        if (!only.empty() && std::find(only.begin(), only.end(), e.name) == only.end() &&
            std::find(only.begin(), only.end(), std::to_string(e.id)) == only.end())
            continue;
        auto r = run_criterion(e, cfg);
        lines << criterion_line(r) << std::endl;
        o.ok = o.ok && r.passed;
        rows.push_back(criterion_json(r));
        csv.row(r.id, r.name, r.passed, "\"" + r.summary + "\"");
    }
    o.report.results["criteria"] = rows;
    o.report.results["all_pass"] = o.ok;
    o.table = csv.str();
    return o;
}

// ---- entry point ---------------------------------------------------------------------------

inline bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<std::string> args(argv + 1, argv + argc);
    Common c;
    try {
        args = extract_tolerances(args, c.tol);
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kInputError;
    }

    CLI::App app{"Phi-energy, SSU and identity-index toolkit", "phiharm"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--threads", c.threads, "worker cap")->check(CLI::Range(1, 256));
    app.add_option("--out", c.out, "report path (.csv: table)");
    app.add_option("--csv", c.csv, "CSV side file");
    app.add_option("--svg", c.svg, "SVG side file");
    app.add_option("--grid", c.grid, "quadrature resolution per axis");
    app.set_version_flag("--version", PHIHARM_VERSION);
    app.footer("Tolerances: --tol.<name> <value>.  Exit codes: 0 ok, 1 verdict failure, 2 input error.");

    std::string chart_path, map_path, kind = "sphere", dims = "2..8", suite = "default", target, spectrum_path;
    double p_val = 0.0, stop = 0.0, energy_p = 2.0;
    int iters = 100, sphere = 0;
    bool phi_flag = false;
    std::vector<std::string> only;

    auto* ssu = app.add_subcommand("ssu", "Phi-SSU and p-SSU checks");
    ssu->require_subcommand(1);
    auto* ssu_c = ssu->add_subcommand("check", "check a chart over its quadrature nodes");
    ssu_c->add_option("--chart", chart_path, "chart config JSON")->required();
    auto* ssu_p = ssu_c->add_option("--p", p_val, "p >= 2 for p-SSU");
    auto* ssu_s = ssu->add_subcommand("sweep", "verdict per dimension");
    ssu_s->add_option("--kind", kind, "sphere | paraboloid");
    ssu_s->add_option("--dims", dims, "range lo..hi");

    auto* energy = app.add_subcommand("energy", "energies and tension");
    energy->require_subcommand(1);
    auto* energy_e = energy->add_subcommand("eval", "E, E_phi, E_p, sup |tau_phi|");
    energy_e->add_option("--map", map_path, "map config JSON")->required();
    energy_e->add_option("--p", energy_p, "exponent for E_p")->capture_default_str();

    auto* variation = app.add_subcommand("variation", "variation formulas vs finite differences");
    variation->require_subcommand(1);
    auto* variation_c = variation->add_subcommand("check", "per-case analytic vs FD table");
    variation_c->add_option("--map", map_path, "map config JSON")->required();
    variation_c->add_option("--suite", suite, "suite name")->capture_default_str();

    auto* flow = app.add_subcommand("flow", "energy-decay flows");
    flow->require_subcommand(1);
    auto* flow_d = flow->add_subcommand("decay", "iterate target flows until the energy is small");
    flow_d->add_option("--map", map_path, "map config JSON")->required();
    flow_d->add_option("--target", target, "override target, e.g. sphere5");
    flow_d->add_option("--iters", iters, "max iterations")->capture_default_str()->check(CLI::Range(1, 100000));
    flow_d->add_option("--stop", stop, "stop once E_phi < stop")->capture_default_str();

    auto* index = app.add_subcommand("index", "Phi/p index and nullity of the identity");
    index->add_option("--spectrum", spectrum_path, "spectrum JSON");
    index->add_option("--sphere", sphere, "use the round S^n spectrum");
    auto* index_p = index->add_option("--p", p_val, "p-index threshold");
    index->add_flag("--phi", phi_flag, "Phi-index (default)");
    auto* index_t = index->add_subcommand("table", "sphere equivalence table");
    index_t->add_option("--dims", dims, "range lo..hi");

    auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
    acc->add_option("--only", only, "criterion names or ids");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion& e) {
        out << PHIHARM_VERSION << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (args.empty()) {
            err << app.help();
        } else {
            err << "ConfigParse: " << e.what() << "\n";
        }
        return kInputError;
    }
    set_threads(c.threads);

    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    std::ostringstream acc_lines;
    try {
        if (ssu_c->parsed()) {
            o = ssu_check(c, chart_path, ssu_p->count() ? std::optional<double>(p_val) : std::nullopt);
        } else if (ssu_s->parsed()) {
            o = ssu_sweep(c, kind, dims);
        } else if (energy_e->parsed()) {
            o = energy_eval(c, map_path, energy_p);
        } else if (variation_c->parsed()) {
            o = variation_check(c, map_path, suite);
        } else if (flow_d->parsed()) {
            o = flow_decay(c, map_path, target, iters, stop);
        } else if (index_t->parsed()) {
            o = index_table(c, dims);
        } else if (index->parsed()) {
            if (phi_flag && index_p->count()) throw Error(ErrorKind::ConfigParse, "--p and --phi are exclusive");
            o = index_spectrum(c, spectrum_path, sphere, index_p->count() ? std::optional<double>(p_val) : std::nullopt);
        } else if (acc->parsed()) {
            o = acceptance(c, only, out);
        }
    } catch (const Error& e) {
        err << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::ConfigParse:
            case ErrorKind::FileIO:
            case ErrorKind::InvalidArgument:
            case ErrorKind::DimensionTooSmall:
            case ErrorKind::RepresentationUnsupported:
                return kInputError;
            default:
                return kVerdictFailure;
        }
    }
    o.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.report.inputs["threads"] = c.threads;

    try {
        bool out_is_csv = ends_with(c.out, ".csv");
        if (out_is_csv) {
            if (o.table.empty()) throw Error(ErrorKind::FileIO, "this command has no table for a .csv --out");
            cfg::write_file(c.out, o.table);
        }
        if (!c.csv.empty()) cfg::write_file(c.csv, o.table);
        if (!c.svg.empty()) {
            if (o.svg.empty()) throw Error(ErrorKind::FileIO, "this command has no plot for --svg");
            cfg::write_file(c.svg, o.svg);
        }
        if (!c.out.empty() && !out_is_csv)
            cfg::write_file(c.out, o.report.dump());
        else if (c.out.empty() && !acc->parsed())
            out << o.report.dump();
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kInputError;
    }
    return o.ok ? kOk : kVerdictFailure;
}

}  // namespace phiharm::cli
