#pragma once

#include "flows.hpp"

namespace phiharm {

struct AverageResult {
    double lhs = 0.0;  // sum over l of d^2/dt^2 E at t = 0
    double rhs = 0.0;  // closed form
    std::vector<double> per_direction;

    double rel_error() const { return std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)); }
};

namespace detail {

inline double d2_at_zero(const std::function<double(double)>& e, double e0, double h) {
    double v[5];
    for (int k = 0; k < 5; ++k) v[k] = k == 2 ? e0 : e((k - 2) * h);
    return fd::d2_5pt(v, h);
}

}  // namespace detail

// Target side: flows of the tangential parts of the coordinate fields of the ambient space of N.
inline double average_target_density(const AmbientFrame& fr, const Mat& du) {
    Mat u = du.transpose() * du;
    Mat sigma = du * u;
    int q = static_cast<int>(fr.position.size());
    Mat qa = Mat::Zero(q, q);
    double quart = 0.0;
    for (int r = 0; r < fr.codim(); ++r) {
        Mat s = fr.proj * fr.shape[r] * fr.proj;
        qa += 2.0 * s * s - s.trace() * s;
        quart += (du.transpose() * s * du).squaredNorm();
    }
    double lin = 0.0;
    for (int i = 0; i < du.cols(); ++i) lin += du.col(i).dot(qa * sigma.col(i));
    return lin + 2.0 * quart;
}

inline AverageResult average_second_variation_target(const SmoothMap& m, double h = kFdStep2) {
    auto js = jets(m);
    const auto& quad = *m.quad;
    AverageResult r;
    double e0 = phi_energy_of(js, quad);
    for (int l = 0; l < m.target->q; ++l) {
        Vec v = Vec::Unit(m.target->q, l);
        double d2 = detail::d2_at_zero([&](double t) { return flowed_energy(m, js, v, t); }, e0, h);
        r.per_direction.push_back(d2);
    }
    r.lhs = pairwise_sum(r.per_direction);
    r.rhs = quad.integrate([&](std::size_t i) { return average_target_density(ambient_frame(*m.target, js[i].y), js[i].du); });
    return r;
}

// Domain side: flows of the tangential coordinate fields of the ambient space of M, u o f_t.
inline AverageResult average_second_variation_domain(const SmoothMap& m, double h = kFdStep2) {
    if (!m.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "domain flows need an analytic map");
    double e0 = phi_energy(m);
    double ts = tension_sup(m);
    if (!(ts < harmonicity_tol(e0)))
        throw Error(ErrorKind::NotPhiHarmonic, "tension sup " + std::to_string(ts) + " exceeds tolerance");
    const auto& quad = *m.quad;
    AverageResult r;
    int q = m.domain->q;
    for (int l = 0; l < q; ++l) {
        Vec v = Vec::Unit(q, l);
        double d2 = detail::d2_at_zero([&](double t) { return phi_energy_of(domain_flow_jets(m, v, t), quad); }, e0, h);
        r.per_direction.push_back(d2);
    }
    r.lhs = pairwise_sum(r.per_direction);
    r.rhs = quad.integrate([&](std::size_t i) {
        const auto& fp = quad.points[i];
        Mat du = m.fn().du(fp.position) * fp.tangent;
        Mat u = du.transpose() * du;
        Mat sigma = du * u;
        Mat qm = Mat::Zero(fp.n(), fp.n());
        double quart = 0.0;
        for (const auto& a : fp.sff) {
            qm += 2.0 * a * a - a.trace() * a;
            Mat au = a * u;
            quart += (au * au).trace();
        }
        Mat dq = du * qm;
        double lin = 0.0;
        for (int i2 = 0; i2 < fp.n(); ++i2) lin += dq.col(i2).dot(sigma.col(i2));
        return lin + 2.0 * quart;
    });
    return r;
}

}  // namespace phiharm
