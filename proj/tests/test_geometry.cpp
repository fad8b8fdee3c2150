#include <catch2/catch_amalgamated.hpp>

#include <phiharm/ssu.hpp>

using namespace phiharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// |S^n| by the recursion |S^n| = 2 pi / (n - 1) |S^{n-2}|
double sphere_area_recursive(int n) {
    if (n == 0) return 2.0;
    if (n == 1) return 2.0 * kPi;
    return 2.0 * kPi / (n - 1) * sphere_area_recursive(n - 2);
}

void require_frame_ok(const FramedPoint& fp) {
    int n = fp.n();
    CHECK((fp.tangent.transpose() * fp.tangent - Mat::Identity(n, n)).norm() < 1e-12);
    CHECK((fp.normal.transpose() * fp.tangent).norm() < 1e-12);
    CHECK((fp.tangent * fp.r - fp.jacobian).norm() < 1e-10);
    for (const auto& a : fp.sff) CHECK((a - a.transpose()).norm() < 1e-10);
}

}  // namespace

TEST_CASE("sphere frames: unit position, orthonormal frames, A = I") {
    for (int n : {1, 2, 3, 5}) {
        auto c = sphere_chart(n);
        auto q = build_quadrature(c, std::vector<int>(n, 5));
        for (const auto& fp : q.points) {
            REQUIRE_THAT(fp.position.norm(), WithinAbs(1.0, 1e-14));
            require_frame_ok(fp);
            REQUIRE(fp.codim() == 1);
            CHECK((fp.sff[0] - Mat::Identity(n, n)).norm() < 1e-7);
        }
    }
}

TEST_CASE("sphere volumes match the recursion") {
    for (int n = 1; n <= 6; ++n) {
        CHECK_THAT(sphere_volume(n), WithinRel(sphere_area_recursive(n), 1e-13));
        auto c = sphere_chart(n);
        auto q = build_quadrature(c, std::vector<int>(n, n <= 3 ? 8 : 4));
        CHECK_THAT(q.total_volume, WithinRel(sphere_area_recursive(n), 1e-10));
        double w = 0.0;
        for (double x : q.weights) w += x;
        CHECK_THAT(w, WithinRel(sphere_area_recursive(n), 1e-10));
    }
}

TEST_CASE("sphere moments") {
    // int x_1^2 = |S^n|/(n+1), int x_1^2 x_2^2 = |S^n|/((n+1)(n+3)), int x_1^4 = 3x that
    for (int n : {2, 3, 4}) {
        auto c = sphere_chart(n);
        auto q = build_quadrature(c, std::vector<int>(n, 8));
        double vol = sphere_area_recursive(n);
        auto mom = [&](auto f) { return q.integrate([&](std::size_t i) { return f(q.points[i].position); }); };
        CHECK_THAT(mom([](const Vec& y) { return y[0] * y[0]; }), WithinRel(vol / (n + 1), 1e-10));
        CHECK_THAT(mom([](const Vec& y) { return y[y.size() - 1] * y[y.size() - 1]; }), WithinRel(vol / (n + 1), 1e-10));
        CHECK_THAT(mom([](const Vec& y) { return y[0] * y[0] * y[1] * y[1]; }), WithinRel(vol / ((n + 1) * (n + 3)), 1e-10));
        CHECK_THAT(mom([](const Vec& y) { return std::pow(y[y.size() - 1], 4); }), WithinRel(3.0 * vol / ((n + 1) * (n + 3)), 1e-10));
        CHECK_THAT(mom([](const Vec& y) { return y[0] * y[y.size() - 1]; }), WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("monte carlo quadrature is seeded and unbiased") {
    auto c = sphere_chart(3);
    auto a = build_quadrature(c, {4000}, Scheme::MonteCarlo, 7);
    auto b = build_quadrature(c, {4000}, Scheme::MonteCarlo, 7);
    REQUIRE(a.size() == 4000);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.points[i].position == b.points[i].position);
    double vol = sphere_area_recursive(3);
    double w = 0.0;
    for (double x : a.weights) w += x;
    CHECK_THAT(w, WithinRel(vol, 1e-12));
    double m2 = a.integrate([&](std::size_t i) { return a.points[i].position[0] * a.points[i].position[0]; });
    CHECK_THAT(m2, WithinRel(vol / 4.0, 0.05));
}

TEST_CASE("paraboloid principal curvatures") {
    // radial 2/(1+4r^2)^{3/2}, tangential 2/(1+4r^2)^{1/2}
    for (int n : {2, 3, 5}) {
        auto c = paraboloid_chart(n);
        for (double r : {0.0, 0.3, 1.0, 2.5}) {
            Vec x = Vec::Zero(n);
            x[0] = r;
            auto fp = build_frames(c, x);
            require_frame_ok(fp);
            Vec k = principal_curvatures(fp).cwiseAbs();
            std::sort(k.data(), k.data() + k.size());
            double s = 1.0 + 4.0 * r * r;
            CHECK_THAT(k[0], WithinRel(2.0 / std::pow(s, 1.5), 1e-7));
            for (int i = 1; i < n; ++i) CHECK_THAT(k[i], WithinRel(2.0 / std::sqrt(s), 1e-7));
        }
    }
}

TEST_CASE("ellipsoid curvatures at a pole") {
    Vec ax(3);
    ax << 1.0, 1.5, 2.0;
    auto c = ellipsoid_chart(ax);
    Vec pole = Vec::Zero(3);
    pole[2] = 2.0;
    auto fr = ambient_frame(c, pole);
    Vec k = sorted_eigenvalues(fr.frame_sff()[0]).cwiseAbs();
    std::sort(k.data(), k.data() + k.size());
    CHECK_THAT(k[0], WithinRel(2.0 / (1.5 * 1.5), 1e-8));
    CHECK_THAT(k[1], WithinRel(2.0 / 1.0, 1e-8));
    auto [lo, hi] = ellipsoid_curvature_bounds(ax);
    for (int i = 0; i < 2; ++i) {
        CHECK(lo <= k[i] + 1e-9);
        CHECK(k[i] <= hi + 1e-9);
    }
}

TEST_CASE("ellipsoid frames on random nodes") {
    Vec ax(4);
    ax << 0.7, 1.0, 1.3, 2.2;
    auto c = ellipsoid_chart(ax);
    auto q = build_quadrature(c, {50}, Scheme::MonteCarlo, 3);
    for (const auto& fp : q.points) {
        require_frame_ok(fp);
        double lev = 0.0;
        for (int i = 0; i < 4; ++i) lev += fp.position[i] * fp.position[i] / (ax[i] * ax[i]);
        CHECK_THAT(lev, WithinAbs(1.0, 1e-12));
        // second form from the chart matches the implicit frame
        auto fr = ambient_frame(c, fp.position);
        auto a = fr.frame_sff()[0];
        CHECK_THAT(a.trace() * a.trace(), WithinRel(fp.sff[0].trace() * fp.sff[0].trace(), 1e-6));
    }
}

TEST_CASE("sectional curvature through the Gauss equation") {
    auto s = sphere_chart(3);
    Rng rng(11);
    auto q = build_quadrature(s, {3, 3, 6});
    for (const auto& fp : q.points) {
        Vec x = rng.unit_vec(3), y = rng.unit_vec(3);
        CHECK_THAT(sectional_curvature(fp, x, y), WithinAbs(1.0, 1e-6));
        CHECK((gauss_ricci(fp) - 2.0 * Mat::Identity(3, 3)).norm() < 1e-6);
    }
    auto p = paraboloid_chart(2);
    auto fp = build_frames(p, Vec::Zero(2));
    Vec e0 = Vec::Unit(2, 0), e1 = Vec::Unit(2, 1);
    CHECK_THAT(sectional_curvature(fp, e0, e1), WithinAbs(4.0, 1e-6));
}

TEST_CASE("projection onto the manifold") {
    auto c = sphere_chart(4);
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        Vec z = rng.normal_vec(5) * 3.0;
        Vec y = project(c, z);
        CHECK_THAT(y.norm(), WithinAbs(1.0, 1e-12));
        CHECK((y - z / z.norm()).norm() < 1e-10);
    }
}

TEST_CASE("bad inputs are rejected") {
    CHECK_THROWS_AS(paraboloid_chart(0), Error);
    CHECK_THROWS_AS(build_quadrature(sphere_chart(2), {500}, Scheme::MonteCarlo), Error);
    CHECK_THROWS_AS(build_quadrature(sphere_chart(2), {8, 8}, Scheme::MonteCarlo, 1), Error);
}
