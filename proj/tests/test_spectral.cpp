#include <catch2/catch_amalgamated.hpp>

#include <phiharm/spectral.hpp>

using namespace phiharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("harmonic dimensions: closed form vs rank of the Laplacian kernel") {
    for (int n = 1; n <= 5; ++n)
        for (int k = 0; k <= 4; ++k) CHECK(harmonic_dim(n, k) == harmonic_dim_by_rank(n, k));
    for (int k = 0; k <= 10; ++k) {
        CHECK(harmonic_dim(2, k) == 2 * k + 1);
        CHECK(harmonic_dim(3, k) == (k + 1) * (k + 1));
    }
    // harmonics up to degree k span the restricted polynomials of degree <= k
    for (int n = 2; n <= 6; ++n)
        for (int k = 1; k <= 5; ++k) {
            long long s = 0;
            for (int j = 0; j <= k; ++j) s += harmonic_dim(n, j);
            CHECK(s == binomial(n + k, k) + binomial(n + k - 1, k - 1));
        }
}

TEST_CASE("round sphere spectrum") {
    auto s = sphere_spectrum(4, 3);
    REQUIRE(s.eigenpairs.size() == 3);
    CHECK(s.eigenpairs[0] == std::pair<double, int>{4.0, 5});
    CHECK(s.eigenpairs[1] == std::pair<double, int>{10.0, 14});
    CHECK(s.eigenpairs[2] == std::pair<double, int>{18.0, 30});
    CHECK(s.isometry_dim == 10);
    CHECK_THAT(s.scal(), WithinAbs(12.0, 0.0));
}

TEST_CASE("phi index of the identity of S^n") {
    for (int n = 2; n <= 10; ++n) {
        auto s = sphere_spectrum(n, 4);
        auto in = phi_index_nullity(s);
        CHECK_THAT(in.threshold, WithinRel(4.0 * (n - 1) / 3.0, 1e-15));
        CHECK(phi_unstable_criterion(s) == (n >= 5));
        if (n >= 5) {
            CHECK(in.index == n + 1);
            CHECK(in.nullity == n * (n + 1) / 2);
        } else if (n == 4) {
            CHECK(in.index == 0);
            CHECK(in.nullity == 10 + 5);
        } else {
            CHECK(in.index == 0);
            CHECK(in.nullity == n * (n + 1) / 2);
        }
    }
}

TEST_CASE("p index of the identity of S^n: unstable iff p < n") {
    for (int n = 2; n <= 8; ++n)
        for (double p : {1.5, 2.0, 3.0, 4.0, 5.5}) {
            auto in = p_index_nullity(sphere_spectrum(n, 4), p);
            CHECK(in.index == (p < n ? n + 1 : 0));
            CHECK(in.nullity == n * (n + 1) / 2 + (p == n ? n + 1 : 0));
        }
    auto inf = p_index_nullity(sphere_spectrum(5, 2), std::numeric_limits<double>::infinity());
    CHECK(inf.threshold == 0.0);
    CHECK(inf.index == 0);
    CHECK_THROWS_AS(p_index_nullity(sphere_spectrum(5, 2), 1.0), Error);
}

TEST_CASE("spectrum validation") {
    SpectrumModel s{3, 2.0, 6, {{3.0, 4}, {3.0, 1}}};
    CHECK_THROWS_AS(s.validate(), Error);
    s.eigenpairs = {{-1.0, 1}};
    CHECK_THROWS_AS(phi_index_nullity(s), Error);
    s.eigenpairs = {};
    CHECK_THROWS_AS(s.lambda1(), Error);
}

TEST_CASE("Killing fields are in the kernel of every form") {
    auto c = sphere_chart(2);
    auto q = build_quadrature(c, {4, 8});
    auto h = hessian_quadratic_form(c, q, killing_field(3, 0, 1));
    // |v|^2 = x0^2 + x1^2, integral 8 pi / 3
    CHECK_THAT(h.v_sq, WithinRel(8.0 * kPi / 3.0, 1e-10));
    CHECK_THAT(h.div_sq, WithinAbs(0.0, 1e-10));
    for (double v : h.values()) CHECK(std::abs(v) < 1e-5 * h.scale);
}

TEST_CASE("conformal fields on S^m") {
    // div grad <a,x> = -m <a,x>; all forms equal (4 - m)/m int (div v)^2
    for (int m : {2, 3, 5, 6}) {
        auto c = sphere_chart(m);
        std::vector<int> res(m, 3);
        res.back() = 6;
        auto q = build_quadrature(c, res);
        auto h = hessian_quadratic_form(c, q, conformal_field(Vec::Unit(m + 1, 0)));
        CHECK_THAT(h.div_sq, WithinRel(m * m * sphere_volume(m) / (m + 1), 1e-6));
        double expect = (4.0 - m) / m * h.div_sq;
        for (double v : h.values()) CHECK_THAT(v, WithinRel(expect, 1e-4));
        auto cheap = hessian_quadratic_form(c, q, conformal_field(Vec::Unit(m + 1, 0)), {false, 1e-3});
        CHECK_THAT(cheap.codiff_form, WithinRel(h.codiff_form, 1e-9));
    }
}

TEST_CASE("the four forms agree on a generic field") {
    auto c = std::make_shared<const ImmersionChart>(sphere_chart(2));
    auto q = build_quadrature(*c, {24, 48});
    Rng rng(4);
    for (int k = 0; k < 3; ++k) CHECK(hessian_quadratic_form(*c, q, random_trig_field(c, rng, 3, 0.7)).spread() < 1e-3);
}

TEST_CASE("sphere equivalence table") {
    for (const auto& r : sphere_equivalence_table(2, 9)) {
        CHECK(r.consistent());
        CHECK(r.ssu == (r.n >= 5));
        CHECK(r.negative == (r.n >= 5));
    }
    CHECK_THROWS_AS(sphere_equivalence_table(1, 3), Error);
}

TEST_CASE("flat torus: translations span the kernel, no negative directions") {
    auto c = std::make_shared<const ImmersionChart>(torus_chart(2));
    auto q = build_quadrature(*c, {16, 16});
    for (int a = 0; a < 2; ++a) {
        VectorFieldOnManifold t{FieldKind::Killing, "translation", [a](const Vec&) { return Vec(Vec::Unit(3, a)); },
                                [](const Vec&) { return Mat(Mat::Zero(3, 3)); }};
        auto h = hessian_quadratic_form(*c, q, t);
        CHECK_THAT(h.v_sq, WithinRel(4.0 * kPi * kPi, 1e-12));
        for (double v : h.values()) CHECK(std::abs(v) <= 1e-9 * h.v_sq);
    }
    // v = sin(x) e_1: codiff form is 2|grad v|^2 + (div v)^2 = 3 int cos^2 = 6 pi^2
    VectorFieldOnManifold w{FieldKind::Custom, "wave", [](const Vec& x) { return Vec(std::sin(x[0]) * Vec::Unit(3, 0)); }, nullptr};
    auto h = hessian_quadratic_form(*c, q, w);
    for (double v : h.values()) CHECK_THAT(v, WithinRel(6.0 * kPi * kPi, 1e-5));
}
