#include <catch2/catch_amalgamated.hpp>

#include <phiharm/average.hpp>

using namespace phiharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using ChartPtr = std::shared_ptr<const ImmersionChart>;
using QuadPtr = std::shared_ptr<const QuadratureSet>;

ChartPtr sphere(int n) { return std::make_shared<const ImmersionChart>(sphere_chart(n)); }
QuadPtr quad(const ChartPtr& c, std::vector<int> g) { return std::make_shared<const QuadratureSet>(build_quadrature(*c, g)); }

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

// theta -> k theta + a sin theta
AnalyticMap circle_degree(int k, double a) {
    AnalyticMap f;
    f.u = [k, a](const Vec& x) {
        double th = std::atan2(x[1], x[0]), s = k * th + a * std::sin(th);
        return Vec((Vec(2) << std::cos(s), std::sin(s)).finished());
    };
    f.du = [k, a](const Vec& x) {
        double th = std::atan2(x[1], x[0]), s = k * th + a * std::sin(th), d = k + a * std::cos(th);
        Vec t(2), dth(2);
        t << -std::sin(s), std::cos(s);
        dth << -x[1], x[0];
        dth /= x.squaredNorm();
        return Mat(d * t * dth.transpose());
    };
    return f;
}

Mat near_identity(Rng& rng, int q, double eps) {
    Mat a = Mat::Identity(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) a(i, j) += eps * rng.normal();
    return a;
}

double sech(double t) { return 1.0 / std::cosh(t); }

}  // namespace

TEST_CASE("sphere flow matches the closed form") {
    Rng rng(1);
    for (int n : {2, 5}) {
        auto c = sphere_chart(n);
        for (int i = 0; i < 10; ++i) {
            Vec v = rng.normal_vec(n + 1), y0 = rng.unit_vec(n + 1);
            for (double t : {-0.7, 0.05, 0.3, 1.5}) {
                Vec a = integrate_flow(c, FlowField{v}, y0, t);
                Vec b = sphere_flow_exact(v, y0, t);
                CHECK((a - b).norm() < 1e-6);
                CHECK_THAT(a.norm(), WithinAbs(1.0, 1e-14));
            }
            CHECK(integrate_flow(c, FlowField{v}, y0, 0.0) == y0);
        }
    }
}

TEST_CASE("flow on an ellipsoid stays on it and composes") {
    Vec ax(3);
    ax << 0.8, 1.2, 1.7;
    auto c = ellipsoid_chart(ax);
    Rng rng(2);
    for (int i = 0; i < 5; ++i) {
        Vec y0 = project(c, rng.normal_vec(3));
        Vec v = rng.normal_vec(3);
        Vec y1 = integrate_flow(c, FlowField{v}, y0, 0.6);
        CHECK(c.residual(y1) < 1e-12);
        Vec y2 = integrate_flow(c, FlowField{v}, integrate_flow(c, FlowField{v}, y0, 0.25), 0.35);
        CHECK((y1 - y2).norm() < 1e-6);
        CHECK((integrate_flow(c, FlowField{v}, y1, -0.6) - y0).norm() < 1e-6);
    }
}

TEST_CASE("pushed-forward jets match finite differences of the flow") {
    Rng rng(3);
    auto c = sphere_chart(3);
    for (int i = 0; i < 5; ++i) {
        Vec y0 = rng.unit_vec(4), v = rng.normal_vec(4);
        Vec w = tangent_projector(c, y0) * rng.normal_vec(4);
        Vec y = y0;
        Mat x = w;
        integrate_flow_jet(c, v, y, x, 0.8);
        double h = 1e-5;
        auto at = [&](double s) { return sphere_flow_exact(v, project(c, y0 + s * w), 0.8); };
        Vec fd = (at(h) - at(-h)) / (2.0 * h);
        CHECK((x.col(0) - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }
}

TEST_CASE("energy along the normal flow of the equator") {
    // y_t = tanh t e + sech t y, |du_t| = sech t: E_phi(t) = pi/2 sech^4 t
    auto s1 = sphere(1);
    auto s5 = sphere(5);
    auto m = make_analytic_map(s1, quad(s1, {64}), s5, equatorial(6));
    auto js = jets(m);
    Vec e = Vec::Unit(6, 4);
    for (double t : {-1.0, -0.2, 0.0, 0.5, 2.0})
        CHECK_THAT(flowed_energy(m, js, e, t), WithinRel(0.5 * kPi * std::pow(sech(t), 4), 1e-6));
    auto d = descent_derivatives(m, js);
    CHECK_THAT(d.d2_all[4], WithinRel(-2.0 * kPi, 1e-5));
    CHECK_THAT(d.d1_all[4], WithinAbs(0.0, 1e-9));
    auto pick = select_descent_direction(m, js);
    CHECK(pick.d2 < 0.0);

    // xi over 8 samples in [-T, T] dominates the closed-form third derivative there
    for (double span : {1.0, 0.25}) {
        double xi = xi_estimate(m, js, 0.0, span), worst = 0.0;
        for (int k = 0; k < 8; ++k) {
            double t = span * (-1.0 + (2.0 * k + 1.0) / 8.0), s = sech(t), th = std::tanh(t);
            worst = std::max(worst, std::abs(0.5 * kPi * (-64.0 * std::pow(s, 4) * std::pow(th, 3) + 56.0 * std::pow(s, 6) * th)));
        }
        CHECK(xi >= worst / (0.5 * kPi) * (1.0 - 1e-4));
    }
    auto b = initial_step(m, js, 1.0 / 6.0);
    CHECK(b.zeta <= b.span);
    CHECK(b.zeta >= 0.25 * b.span);
}

TEST_CASE("homotopy decay on the equator of S^5") {
    auto s1 = sphere(1);
    auto s5 = sphere(5);
    auto m = make_analytic_map(s1, quad(s1, {64}), s5, equatorial(6));
    DecayOptions opt;
    opt.max_iters = 12;
    auto tr = homotopy_decay(m, opt);
    REQUIRE(tr.energies.size() == 13);
    CHECK(tr.strictly_decreasing());
    CHECK(tr.status == "ok");
    CHECK(tr.trailing_ratio() < 1.0);
    CHECK_THAT(tr.energies.front(), WithinRel(0.5 * kPi, 1e-12));
    CHECK_THAT(tr.kappa, WithinRel(1.0 / 6.0, 1e-9));
    for (std::size_t i = 0; i < tr.rho_estimates.size(); ++i)
        CHECK_THAT(tr.rho_estimates[i], WithinRel(tr.energies[i + 1] / tr.energies[i], 1e-14));

    opt.stop_energy = 10.0;
    CHECK(homotopy_decay(m, opt).energies.size() == 1);
}

TEST_CASE("decay preconditions") {
    auto s1 = sphere(1);
    auto s2 = sphere(2);
    auto q = quad(s1, {32});
    CHECK_THROWS_AS(homotopy_decay(make_analytic_map(s1, q, s2, equatorial(3)), {}), Error);
    auto s5 = sphere(5);
    Vec p = Vec::Unit(6, 0);
    auto tr = homotopy_decay(constant_map(s1, q, s5, p), {});
    CHECK(tr.status == "constant");
}

TEST_CASE("composition energy identity on random circle maps") {
    Rng rng(4);
    auto s1 = sphere(1);
    auto q = quad(s1, {96});
    for (int i = 0; i < 6; ++i) {
        auto u = make_analytic_map(s1, q, s1, circle_degree(1 + i % 3, 0.2 * rng.uniform()));
        auto psi = normalized_linear(near_identity(rng, 2, 0.3));
        auto r = compose_energy(u, psi);
        CHECK_THAT(r.product, WithinRel(r.direct, 1e-12));
        CHECK(r.max_node_gap < 1e-10 * (1.0 + r.direct));
    }
}

TEST_CASE("discrete descent on a degree-two circle map") {
    auto s1 = sphere(1);
    auto q = quad(s1, {64});
    auto start = sample_to_grid(make_analytic_map(s1, q, s1, circle_degree(2, 0.4)));
    auto r = discrete_phi_descent(start, 1e-3, 400, 1e-6);
    REQUIRE(r.energies.size() >= 2);
    for (std::size_t i = 1; i < r.energies.size(); ++i) CHECK(r.energies[i] <= r.energies[i - 1]);
    CHECK(r.residuals.back() < 1e-2 * r.residuals.front());
    // uniform double cover; central differences shrink |du| by sin(2h)/(2h)
    double h = 2.0 * kPi / 64.0, shrink = std::pow(std::sin(2.0 * h) / (2.0 * h), 4);
    CHECK_THAT(r.energies.back(), WithinRel(8.0 * kPi * shrink, 1e-4));

    auto flat = sample_to_grid(constant_map(s1, q, s1, Vec::Unit(2, 0)));
    auto c = discrete_phi_descent(flat, 1e-2, 10);
    CHECK(c.energies.size() == 1);
    CHECK(c.residuals.front() == 0.0);
    CHECK_THROWS_AS(discrete_phi_descent(make_analytic_map(s1, q, s1, circle_power(2)), 1e-2, 10), Error);
}

TEST_CASE("averaged second variation: target side") {
    Rng rng(5);
    auto s2 = sphere(2);
    auto q = quad(s2, {16, 32});
    auto m = make_analytic_map(s2, q, s2, normalized_linear(near_identity(rng, 3, 0.2)));
    auto r = average_second_variation_target(m);
    CHECK(r.per_direction.size() == 3);
    CHECK(r.rel_error() < 1e-5);
    // identity of S^n: -n(n-4)... summed over directions equals the closed form; n = 5 gives -5 pi^3
    auto s5 = sphere(5);
    auto id5 = identity_map(s5, quad(s5, {4, 4, 4, 4, 8}));
    auto r5 = average_second_variation_target(id5);
    CHECK_THAT(r5.rhs, WithinRel(-5.0 * std::pow(kPi, 3), 1e-9));
    CHECK(r5.rel_error() < 1e-5);
}

TEST_CASE("averaged second variation: domain side") {
    auto s2 = sphere(2);
    auto q = quad(s2, {12, 24});
    auto id = identity_map(s2, q);
    auto r = average_second_variation_domain(id);
    CHECK(r.rel_error() < 1e-5);
    Rng rng(6);
    auto bent = make_analytic_map(s2, q, s2, normalized_linear(near_identity(rng, 3, 0.3)));
    CHECK_THROWS_AS(average_second_variation_domain(bent), Error);
}
