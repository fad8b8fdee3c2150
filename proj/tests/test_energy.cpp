#include <catch2/catch_amalgamated.hpp>

#include <phiharm/energy.hpp>

using namespace phiharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using ChartPtr = std::shared_ptr<const ImmersionChart>;
using QuadPtr = std::shared_ptr<const QuadratureSet>;

ChartPtr sphere(int n) { return std::make_shared<const ImmersionChart>(sphere_chart(n)); }
QuadPtr quad(const ChartPtr& c, std::vector<int> g) { return std::make_shared<const QuadratureSet>(build_quadrature(*c, g)); }

// theta -> theta + a sin(theta) on the circle
AnalyticMap wobble(double a) {
    AnalyticMap f;
    f.u = [a](const Vec& x) {
        double th = std::atan2(x[1], x[0]), s = th + a * std::sin(th);
        return Vec((Vec(2) << std::cos(s), std::sin(s)).finished());
    };
    f.du = [a](const Vec& x) {
        double th = std::atan2(x[1], x[0]), s = th + a * std::sin(th), fp = 1.0 + a * std::cos(th);
        Vec t(2), dth(2);
        t << -std::sin(s), std::cos(s);
        dth << -x[1], x[0];
        dth /= x.squaredNorm();
        return Mat(fp * t * dth.transpose());
    };
    return f;
}

AnalyticMap normalized_linear(const Mat& a) {
    return {[a](const Vec& x) {
                Vec z = a * x;
                return Vec(z / z.norm());
            },
            [a](const Vec& x) {
                Vec z = a * x;
                double n = z.norm();
                return Mat((Mat::Identity(z.size(), z.size()) - z * z.transpose() / (n * n)) * a / n);
            }};
}

Mat random_near_identity(Rng& rng, int q, double eps) {
    Mat a = Mat::Identity(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) a(i, j) += eps * rng.normal();
    return a;
}

}  // namespace

TEST_CASE("identity map energies") {
    for (int n : {1, 2, 3}) {
        auto c = sphere(n);
        auto m = identity_map(c, quad(c, std::vector<int>(n, n == 1 ? 32 : 10)));
        double vol = sphere_volume(n);
        for (double p : {2.0, 3.0, 4.5}) {
            auto e = energies(m, p);
            CHECK_THAT(e.e, WithinRel(0.5 * n * vol, 1e-10));
            CHECK_THAT(e.e_phi, WithinRel(0.25 * n * vol, 1e-10));
            CHECK_THAT(e.e_p, WithinRel(std::pow(n, 0.5 * p) * vol / p, 1e-10));
        }
        CHECK(tension_sup(m) < 1e-6);
    }
}

TEST_CASE("circle powers") {
    auto c = sphere(1);
    auto q = quad(c, {64});
    for (int k : {0, 1, 2, 3, -2}) {
        auto m = make_analytic_map(c, q, c, circle_power(k));
        auto e = energies(m, 2.0);
        CHECK_THAT(e.e, WithinAbs(kPi * k * k, 1e-10));
        CHECK_THAT(e.e_phi, WithinAbs(0.5 * kPi * std::pow(k, 4), 1e-9));
        CHECK(tension_sup(m) < 1e-5 * (1.0 + std::pow(k, 4)));
    }
}

TEST_CASE("tension of a non-uniform circle map") {
    // f = theta + a sin theta: tau = (f'^3)' T = 3 f'^2 f'' T
    double a = 0.3;
    auto c = sphere(1);
    auto q = quad(c, {128});
    auto m = make_analytic_map(c, q, c, wobble(a));
    auto tau = tension_field(m);
    for (std::size_t i = 0; i < q->size(); ++i) {
        Vec x = q->points[i].position;
        double th = std::atan2(x[1], x[0]), s = th + a * std::sin(th);
        double f1 = 1.0 + a * std::cos(th), f2 = -a * std::sin(th);
        Vec t(2);
        t << -std::sin(s), std::cos(s);
        CHECK((tau[i] - 3.0 * f1 * f1 * f2 * t).norm() < 1e-6);
    }
    auto g = sample_to_grid(m);
    auto tg = tension_field(g);
    double worst = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) worst = std::max(worst, (tg[i] - tau[i]).norm());
    CHECK(worst < 1e-2);
}

TEST_CASE("phi density is a quarter of the sum of squared eigenvalues") {
    // |U|^2 = (tr U)^2 - 2 sigma_2(U)
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        int n = 2 + i % 4;
        Mat du = Mat::Zero(n + 2, n);
        for (int r = 0; r < n + 2; ++r)
            for (int s = 0; s < n; ++s) du(r, s) = rng.normal();
        Mat u = du.transpose() * du;
        Vec lam = sorted_eigenvalues(u);
        double s2 = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) s2 += lam[a] * lam[b];
        double tr = lam.sum();
        CHECK_THAT(phi_energy_density(u), WithinRel(0.25 * (tr * tr - 2.0 * s2), 1e-10));
    }
}

TEST_CASE("energy lower bound E_phi >= E^2 / (m vol)") {
    Rng rng(5);
    auto c = sphere(2);
    auto q = quad(c, {16, 32});
    double vol = sphere_volume(2);
    for (int i = 0; i < 8; ++i) {
        auto m = make_analytic_map(c, q, c, normalized_linear(random_near_identity(rng, 3, 0.4)));
        auto e = energies(m, 2.0);
        CHECK(e.e_phi >= e.e * e.e / (2.0 * vol) * (1.0 - 1e-12));
    }
    auto id = identity_map(c, q);
    auto e = energies(id, 2.0);
    CHECK_THAT(e.e_phi, WithinRel(e.e * e.e / (2.0 * vol), 1e-10));
}

TEST_CASE("grid representation approximates the analytic energy") {
    auto c = sphere(1);
    auto q = quad(c, {256});
    auto m = make_analytic_map(c, q, c, wobble(0.4));
    auto g = sample_to_grid(m);
    CHECK_THAT(phi_energy(g), WithinRel(phi_energy(m), 1e-3));
    auto s2 = sphere(2);
    CHECK_THROWS_AS(sample_to_grid(identity_map(s2, quad(s2, {6, 12}))), Error);
}

TEST_CASE("first variation against finite differences") {
    Rng rng(9);
    auto c = sphere(2);
    auto q = quad(c, {24, 48});
    auto m = make_analytic_map(c, q, c, normalized_linear(random_near_identity(rng, 3, 0.3)));
    for (int l = 0; l < 3; ++l) {
        auto v = VariationSpec::projection(Vec::Unit(3, l));
        double a = first_variation(m, v), b = first_variation_fd(m, v);
        CHECK(std::abs(a - b) < 1e-5 * std::max(1.0, std::abs(b)));
        auto s = second_variation(m, v);
        double fd2 = second_variation_fd(m, v);
        CHECK(std::abs(s.value - fd2) < 1e-3 * std::max(1.0, std::abs(fd2)));
        CHECK_THAT(s.terms[0] + s.terms[1] + s.terms[2] + s.terms[3], WithinRel(s.value, 1e-12));
    }
    // the identity is critical
    auto id = identity_map(c, q);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(first_variation(id, VariationSpec::projection(Vec::Unit(3, l)))) < 1e-8);
}

TEST_CASE("bad maps are rejected") {
    auto c = sphere(2);
    auto q = quad(c, {6, 12});
    CHECK_THROWS_AS(constant_map(c, q, c, Vec::Ones(3)), Error);
    AnalyticMap wrong{[](const Vec& x) { return x; }, [](const Vec&) { return Mat(2.0 * Mat::Identity(3, 3)); }};
    CHECK_THROWS_AS(make_analytic_map(c, q, c, wrong), Error);
}
