#include <catch2/catch_amalgamated.hpp>

#include <phiharm/cli.hpp>

#include <filesystem>
#include <fstream>

using namespace phiharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "phiharm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(PHIHARM_CONFIG_DIR) + "/" + name; }
std::string golden(const std::string& name) { return std::string(PHIHARM_GOLDEN_DIR) + "/" + name; }

std::string write_tmp(const std::string& name, const std::string& text) {
    auto p = std::filesystem::temp_directory_path() / ("phiharm_test_" + name);
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    return {std::istreambuf_iterator<char>(f), {}};
}

// same keys in the same order, equal strings/bools, numbers within rel 1e-9
bool same_shape(const Json& a, const Json& b, const std::string& path, std::string& why) {
    if (a.is_number() && b.is_number()) {
        double x = a.get<double>(), y = b.get<double>();
        if (std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y))) return true;
        why = path + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    if (a.type() != b.type() || a.size() != b.size()) {
        why = path + ": type or size differs";
        return false;
    }
    if (a.is_object()) {
        auto ia = a.begin();
        for (auto ib = b.begin(); ib != b.end(); ++ia, ++ib) {
            if (ia.key() != ib.key()) {
                why = path + ": key " + ia.key() + " vs " + ib.key();
                return false;
            }
            if (!same_shape(ia.value(), ib.value(), path + "/" + ia.key(), why)) return false;
        }
        return true;
    }
    if (a.is_array()) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!same_shape(a[i], b[i], path + "/" + std::to_string(i), why)) return false;
        return true;
    }
    if (a != b) why = path + ": " + a.dump() + " vs " + b.dump();
    return a == b;
}

Json without_timings(const std::string& s) {
    auto j = Json::parse(s);
    j.erase("timings");
    return j;
}

}  // namespace

TEST_CASE("usage and input errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"energy", "eval", "--map", "does_not_exist.json"}).code == 2);
    CHECK(run({"index", "--sphere", "5", "--tol.nope", "1e-3"}).code == 2);
    CHECK(run({"index", "--sphere", "5", "--tol.x"}).code == 2);
    CHECK(run({"index", "--sphere", "5", "--p", "3", "--phi"}).code == 2);
    CHECK(run({"ssu", "sweep", "--dims", "5..2"}).code == 2);
    auto bad = write_tmp("bad.json", "{\"kind\": \"sphere\", \"dim\": 2,");
    auto r = run({"ssu", "check", "--chart", bad});
    CHECK(r.code == 2);
    CHECK(r.err.find("ConfigParse") != std::string::npos);
    auto extra = write_tmp("extra.json", R"({"kind": "sphere", "dim": 2, "colour": 1})");
    CHECK(run({"ssu", "check", "--chart", extra}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("report schema") {
    auto r = run({"index", "--sphere", "5"});
    REQUIRE(r.code == 0);
    auto j = Json::parse(r.out);
    CHECK(j["schema_version"] == "1");
    CHECK(j["command"] == "index");
    CHECK(j["tool"]["name"] == "phiharm");
    CHECK(j["timings"].contains("wall_seconds"));
    CHECK(j["inputs"]["mode"] == "phi");
    CHECK(j["results"]["index"] == 6);
    CHECK(j["results"]["nullity"] == 15);
    CHECK(j["results"]["phi_unstable"] == true);
}

TEST_CASE("index from a spectrum file") {
    auto path = write_tmp("spec.json", R"({"dim": 3, "c": 2.0, "isometry_dim": 6, "eigenpairs": [[3.0, 4], [8.0, 9]]})");
    auto j = Json::parse(run({"index", "--spectrum", path}).out);
    CHECK(j["results"]["index"] == 0);
    CHECK(j["results"]["nullity"] == 6);
    auto p = Json::parse(run({"index", "--spectrum", path, "--p", "2"}).out);
    CHECK(p["results"]["index"] == 4);
    auto broken = write_tmp("spec_bad.json", R"({"dim": 3, "c": 2.0, "isometry_dim": 6, "eigenpairs": [[3.0, 4], [2.0, 9]]})");
    CHECK(run({"index", "--spectrum", broken}).code == 2);
}

TEST_CASE("ssu sweep: csv output and determinism") {
    auto a = run({"ssu", "sweep", "--kind", "sphere", "--dims", "2..8"});
    auto b = run({"ssu", "sweep", "--kind", "sphere", "--dims", "2..8"});
    REQUIRE(a.code == 0);
    CHECK(without_timings(a.out) == without_timings(b.out));
    auto rows = Json::parse(a.out)["results"]["rows"];
    REQUIRE(rows.size() == 7);
    for (const auto& row : rows) {
        int n = row["dim"];
        CHECK(row["verdict"] == (n >= 5));
        CHECK_THAT(row["worst_value"].get<double>(), WithinAbs(4.0 - n, 1e-9));
    }
    auto csv = (std::filesystem::temp_directory_path() / "phiharm_test_sweep.csv").string();
    auto c = run({"ssu", "sweep", "--dims", "2..3", "--out", csv});
    CHECK(c.code == 0);
    CHECK(c.out.empty());
    auto text = slurp(csv);
    CHECK(text.rfind("dim,verdict,worst_value\n2,false,", 0) == 0);

    auto p1 = run({"--seed", "3", "ssu", "sweep", "--kind", "paraboloid", "--dims", "4..5"});
    auto p2 = run({"ssu", "sweep", "--kind", "paraboloid", "--dims", "4..5", "--seed", "3"});
    CHECK(without_timings(p1.out) == without_timings(p2.out));
}

TEST_CASE("ssu check fills in the default grid") {
    auto r = run({"ssu", "check", "--chart", config("ellipsoid.json")});
    REQUIRE(r.code == 0);
    auto j = Json::parse(r.out);
    CHECK(j["inputs"]["grid"] == Json::array({16, 16}));
    CHECK(j["results"]["is_ssu"] == false);
    auto p = Json::parse(run({"ssu", "check", "--chart", config("sphere3.json"), "--grid", "4", "--p", "2.5"}).out);
    CHECK(p["inputs"]["grid"] == Json::array({4, 4, 4}));
    CHECK(p["results"]["is_ssu"] == true);
    CHECK(p["results"]["method"] == "quartic_search");
}

TEST_CASE("energy eval") {
    auto j = Json::parse(run({"energy", "eval", "--map", config("identity_s2.json")}).out);
    CHECK_THAT(j["results"]["E"].get<double>(), WithinRel(4.0 * kPi, 1e-10));
    CHECK_THAT(j["results"]["E_phi"].get<double>(), WithinRel(2.0 * kPi, 1e-10));
    CHECK(j["results"]["tension_sup"].get<double>() < 1e-6);
    auto k = Json::parse(run({"energy", "eval", "--map", config("circle_k2.json"), "--p", "4"}).out);
    CHECK_THAT(k["results"]["E_phi"].get<double>(), WithinRel(8.0 * kPi, 1e-10));
    CHECK_THAT(k["results"]["E_p"].get<double>(), WithinRel(16.0 * 2.0 * kPi / 4.0, 1e-10));
}

TEST_CASE("variation check") {
    auto csv = (std::filesystem::temp_directory_path() / "phiharm_test_var.csv").string();
    auto r = run({"variation", "check", "--map", config("affine_s2.json"), "--out", csv});
    CHECK(r.code == 0);
    auto text = slurp(csv);
    CHECK(text.rfind("case,kind,analytic,fd,abs_err,rel_err,pass\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    CHECK(text.find("false") == std::string::npos);
    // a tolerance nothing can meet turns into a contract failure
    CHECK(run({"variation", "check", "--map", config("affine_s2.json"), "--tol.first_variation", "1e-300"}).code == 1);
}

TEST_CASE("flow decay writes a trace and a plot") {
    auto dir = std::filesystem::temp_directory_path();
    auto csv = (dir / "phiharm_test_trace.csv").string(), svg = (dir / "phiharm_test_trace.svg").string();
    auto r = run({"flow", "decay", "--map", config("equatorial_s5.json"), "--iters", "5", "--out", csv, "--svg", svg});
    REQUIRE(r.code == 0);
    auto text = slurp(csv);
    CHECK(text.rfind("iter,energy,ratio,ell,sign,zeta\n0,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    CHECK(slurp(svg).rfind("<svg", 0) == 0);
    auto j = Json::parse(run({"flow", "decay", "--map", config("equatorial_s5.json"), "--iters", "3"}).out);
    CHECK(j["results"]["status"] == "ok");
    CHECK(j["results"]["energies"].size() == 4);
    CHECK(run({"flow", "decay", "--map", config("circle_k2.json")}).code == 2);
}

TEST_CASE("index table") {
    auto r = run({"index", "table", "--dims", "2..8"});
    REQUIRE(r.code == 0);
    auto rows = Json::parse(r.out)["results"]["rows"];
    REQUIRE(rows.size() == 7);
    for (const auto& row : rows) {
        bool big = row["n"].get<int>() >= 5;
        CHECK(row["A_ssu"] == big);
        CHECK(row["D_unstable"] == big);
        CHECK(row["C_negative"] == big);
    }
}

TEST_CASE("acceptance subset") {
    auto r = run({"acceptance", "--only", "sphere-dichotomy", "--only", "12"});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS   1 sphere-dichotomy") != std::string::npos);
    CHECK(r.out.find("PASS  12 S5-index") != std::string::npos);
    CHECK(run({"acceptance", "--only", "no-such-criterion"}).code == 2);
}

TEST_CASE("golden reports") {
    std::vector<std::pair<std::string, std::vector<std::string>>> cases{
        {"index_sphere5.json", {"index", "--sphere", "5", "--phi"}},
        {"index_spectrum_p2.json", {"index", "--spectrum", config("spectrum_s3.json"), "--p", "2"}},
        {"index_table.json", {"index", "table", "--dims", "2..8"}},
        {"ssu_sweep.json", {"ssu", "sweep", "--kind", "sphere", "--dims", "2..8"}},
        {"ssu_check.json", {"ssu", "check", "--chart", config("ellipsoid.json"), "--grid", "6"}},
        {"energy_identity_s5.json", {"energy", "eval", "--map", config("identity_s5.json")}},
        {"variation_affine_s2.json", {"variation", "check", "--map", config("affine_s2.json")}},
        {"flow_equatorial_s5.json", {"flow", "decay", "--map", config("equatorial_s5.json"), "--iters", "4"}},
    };
    for (const auto& [file, args] : cases) {
        INFO(file);
        auto r = run(args);
        REQUIRE(r.code == 0);
        std::string why;
        CHECK(same_shape(without_timings(r.out), Json::parse(slurp(golden(file))), "", why));
        INFO(why);
        CHECK(why.empty());
    }
    // identity of S^5: constant density 5/4 times the volume pi^3
    auto e = Json::parse(slurp(golden("energy_identity_s5.json")));
    CHECK_THAT(e["results"]["E_phi"].get<double>(), WithinRel(1.25 * std::pow(kPi, 3), 1e-6));
}

TEST_CASE("results do not depend on the thread cap") {
    auto a = run({"--threads", "1", "energy", "eval", "--map", config("affine_s2.json")});
    auto b = run({"--threads", "3", "energy", "eval", "--map", config("affine_s2.json")});
    auto ja = without_timings(a.out), jb = without_timings(b.out);
    CHECK(ja["results"] == jb["results"]);
    CHECK(ja["inputs"]["threads"] == 1);
    CHECK(jb["inputs"]["threads"] == 3);
}
