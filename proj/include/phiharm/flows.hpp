#pragma once

#include "energy.hpp"
#include "ssu.hpp"

namespace phiharm {

struct FlowField {
    Vec v;
    Side side = Side::Target;

    Vec evaluate(const ImmersionChart& c, const Vec& y) const { return tangent_projector(c, y) * v; }
};

namespace detail {

// y' = P(y) v together with its linearization X' = D(Pv)(y) X.
struct FlowRhs {
    const ImmersionChart& c;
    const Vec& v;

    void operator()(const Vec& y, const Mat& x, Vec& fy, Mat& fx) const {
        if (c.kind == ChartKind::Sphere) {
            double r = y.norm();
            Vec nu = -y / r;
            double nv = nu.dot(v);
            fy = v - nv * nu;
            if (x.cols() == 0) {
                fx = x;
                return;
            }
            // d = P / r acting on X
            Mat dx = (x - nu * (nu.transpose() * x)) / r;
            fx = nu * (v.transpose() * dx) + nv * dx;
            return;
        }
        auto fr = ambient_frame(c, y);
        fy = fr.proj * v;
        fx = Mat::Zero(x.rows(), x.cols());
        for (int k = 0; k < fr.codim(); ++k) {
            Vec nu = fr.normal.col(k);
            Mat dx = fr.dnormal[k] * x;
            fx += nu * (v.transpose() * dx) + nu.dot(v) * dx;
        }
    }
};

inline int flow_steps(double t) {
    double at = std::abs(t);
    double h = std::max(at / 64.0, 1e-3);
    return std::max(1, static_cast<int>(std::ceil(at / h - 1e-12)));
}

}  // namespace detail

// RK4 on the flow and its tangent map, then closest-point re-projection.
inline void integrate_flow_jet(const ImmersionChart& c, const Vec& v, Vec& y, Mat& x, double t) {
    if (t == 0.0) return;
    int steps = detail::flow_steps(t);
    double h = t / steps;
    detail::FlowRhs rhs{c, v};
    Vec k1, k2, k3, k4;
    Mat l1, l2, l3, l4;
    for (int s = 0; s < steps; ++s) {
        rhs(y, x, k1, l1);
        rhs(y + 0.5 * h * k1, x + 0.5 * h * l1, k2, l2);
        rhs(y + 0.5 * h * k2, x + 0.5 * h * l2, k3, l3);
        rhs(y + h * k3, x + h * l3, k4, l4);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (x.cols() > 0) x += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        if (!y.allFinite()) throw Error(ErrorKind::ProjectionDivergence, "flow blew up");
    }
    y = project(c, y);
    if (x.cols() > 0) x = tangent_projector(c, y) * x;
}

inline Vec integrate_flow(const ImmersionChart& c, const FlowField& f, const Vec& start, double t) {
    Vec y = start;
    Mat none(start.size(), 0);
    integrate_flow_jet(c, f.v, y, none, t);
    return y;
}

// Exact flow of v - <v,y> y on the unit sphere.
inline Vec sphere_flow_exact(const Vec& v, const Vec& y0, double t) {
    double vn = v.norm();
    if (vn == 0.0) return y0;
    Vec e = v / vn;
    double s0 = std::clamp(e.dot(y0), -1.0, 1.0);
    Vec w0 = y0 - s0 * e;
    double wn = w0.norm();
    if (wn < 1e-300) return y0;
    double a = std::atanh(std::clamp(s0, -1.0 + 1e-16, 1.0 - 1e-16));
    double tt = vn * t + a;
    // tanh(tt) e + sech(tt) w0/|w0|
    return std::tanh(tt) * e + (w0 / wn) / std::cosh(tt);
}

inline std::vector<Jet> flow_jets(const ImmersionChart& target, const Vec& v, const std::vector<Jet>& in, double t) {
    std::vector<Jet> out = in;
    if (t == 0.0) return out;
    parallel_for(out.size(), [&](std::size_t i) { integrate_flow_jet(target, v, out[i].y, out[i].du, t); });
    return out;
}

// Domain-side flow composed into an analytic map: u o f_t.
inline std::vector<Jet> domain_flow_jets(const SmoothMap& m, const Vec& v, double t) {
    if (!m.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "domain flows need an analytic map");
    std::vector<Jet> out(m.quad->size());
    parallel_for(out.size(), [&](std::size_t i) {
        const auto& fp = m.quad->points[i];
        Vec x = fp.position;
        Mat e = fp.tangent;
        integrate_flow_jet(*m.domain, v, x, e, t);
        out[i] = {m.fn().u(x), m.fn().du(x) * e};
    });
    return out;
}

inline double flowed_energy(const SmoothMap& m, const std::vector<Jet>& js, const Vec& v, double t) {
    return phi_energy_of(flow_jets(*m.target, v, js, t), *m.quad);
}

struct DescentChoice {
    int ell = -1;
    int sign = 1;
    double d1 = 0.0;
    double d2 = 0.0;
    std::vector<double> d1_all, d2_all;
};

inline constexpr double kFdStep2 = 1e-3;

inline DescentChoice descent_derivatives(const SmoothMap& m, const std::vector<Jet>& js, double h = kFdStep2) {
    int q = m.target->q;
    DescentChoice c;
    double e0 = phi_energy_of(js, *m.quad);
    for (int l = 0; l < q; ++l) {
        Vec v = Vec::Unit(q, l);
        double e[5];
        for (int k = 0; k < 5; ++k) e[k] = k == 2 ? e0 : flowed_energy(m, js, v, (k - 2) * h);
        c.d1_all.push_back(fd::d1_5pt(e, h));
        c.d2_all.push_back(fd::d2_5pt(e, h));
    }
    return c;
}

inline DescentChoice select_descent_direction(const SmoothMap& m, const std::vector<Jet>& js) {
    DescentChoice c = descent_derivatives(m, js);
    double e0 = phi_energy_of(js, *m.quad);
    double noise = 1e-9 * (1.0 + e0);
    int best = -1;
    for (int l = 0; l < static_cast<int>(c.d2_all.size()); ++l)
        if (c.d2_all[l] < -noise && (best < 0 || c.d2_all[l] < c.d2_all[best])) best = l;
    if (best < 0) throw Error(ErrorKind::NoDescentDirection, "no flow direction has negative second derivative");
    c.ell = best;
    c.sign = c.d1_all[best] <= 0.0 ? 1 : -1;
    c.d1 = c.sign * c.d1_all[best];
    c.d2 = c.d2_all[best];
    return c;
}

inline DescentChoice select_descent_direction(const SmoothMap& m) { return select_descent_direction(m, jets(m)); }

// kappa = -(max phi_form eigenvalue over target samples) / q
inline double kappa_estimate(const ImmersionChart& target, const std::vector<FramedPoint>& samples) {
    auto v = check_phi_ssu(samples);
    return -v.worst_value / target.q;
}

inline std::vector<FramedPoint> default_target_samples(const ImmersionChart& target) {
    std::vector<int> res;
    for (const auto& iv : target.box) res.push_back(iv.periodic ? 6 : 3);
    return build_quadrature(target, res).points;
}

// Energy-normalized third-derivative bound: max |d^3/dt^3 E(f_t o u)| / (m E(u)) over the q flows at 8 t-samples in [-T, T].
inline double xi_estimate(const SmoothMap& m, const std::vector<Jet>& js, double kappa, double span = 1.0) {
    int q = m.target->q;
    double e0 = phi_energy_of(js, *m.quad);
    double h = 1e-2 * span, best = 0.0;
    for (int l = 0; l < q; ++l) {
        Vec v = Vec::Unit(q, l);
        for (int k = 0; k < 8; ++k) {
            double t0 = span * (-1.0 + (2.0 * k + 1.0) / 8.0);
            double e[5];
            for (int s = 0; s < 5; ++s) e[s] = s == 2 ? 0.0 : flowed_energy(m, js, v, t0 + (s - 2) * h);
            best = std::max(best, std::abs(fd::d3_5pt(e, h)));
        }
    }
    double mdim = m.m();
    return std::max(3.0 * kappa / mdim, best / (mdim * e0));
}

struct StepBound {
    double xi;
    double zeta;
    double span;
};

// The cubic Taylor bound only needs xi on [-zeta, zeta]: take the widest span 2^-k whose step stays comparable to it.
inline StepBound initial_step(const SmoothMap& m, const std::vector<Jet>& js, double kappa) {
    double mdim = m.m();
    StepBound b{};
    for (int k = 0; k <= 12; ++k) {
        b.span = std::ldexp(1.0, -k);
        b.xi = xi_estimate(m, js, kappa, b.span);
        b.zeta = std::min(b.span, 3.0 * kappa / (mdim * b.xi));
        if (b.zeta >= 0.25 * b.span) break;
    }
    return b;
}

struct DecayStep {
    int ell;
    int sign;
    double zeta;
};

struct DecayTrace {
    std::vector<double> energies;
    std::vector<double> rho_estimates;
    std::vector<DecayStep> steps;
    std::uint64_t seed = 0;
    double kappa = 0.0;
    double xi = 0.0;
    double zeta0 = 0.0;
    double xi_span = 1.0;
    std::string status = "ok";

    // geometric mean of the trailing half of the ratios
    double trailing_ratio() const {
        if (rho_estimates.empty()) return 1.0;
        std::size_t from = rho_estimates.size() / 2;
        double s = 0.0;
        for (std::size_t i = from; i < rho_estimates.size(); ++i) s += std::log(rho_estimates[i]);
        return std::exp(s / static_cast<double>(rho_estimates.size() - from));
    }
    bool strictly_decreasing() const {
        for (std::size_t i = 1; i < energies.size(); ++i)
            if (!(energies[i] < energies[i - 1])) return false;
        return true;
    }
};

struct DecayOptions {
    int max_iters = 500;
    double stop_energy = 0.0;
    std::uint64_t seed = 0;
    std::vector<FramedPoint> target_samples;
};

inline DecayTrace homotopy_decay(const SmoothMap& m, const DecayOptions& opt) {
    DecayTrace tr;
    tr.seed = opt.seed;
    auto samples = opt.target_samples.empty() ? default_target_samples(*m.target) : opt.target_samples;
    auto ssu = check_phi_ssu(samples);
    if (!ssu.is_ssu) throw Error(ErrorKind::InvalidArgument, "target is not Phi-SSU");
    auto js = jets(m);
    double e = phi_energy_of(js, *m.quad);
    tr.energies.push_back(e);
    if (e <= 1e-300) {
        tr.status = "constant";
        return tr;
    }
    tr.kappa = -ssu.worst_value / m.target->q;
    auto sb = initial_step(m, js, tr.kappa);
    tr.xi = sb.xi;
    tr.zeta0 = sb.zeta;
    tr.xi_span = sb.span;
    int q = m.target->q;
    for (int it = 0; it < opt.max_iters && e >= opt.stop_energy; ++it) {
        DescentChoice c;
        try {
            c = select_descent_direction(m, js);
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::NoDescentDirection) throw;
            tr.status = "no_descent";
            return tr;
        }
        Vec v = c.sign * Vec::Unit(q, c.ell);
        double zeta = tr.zeta0;
        bool ok = false;
        std::vector<Jet> next;
        double en = e;
        for (int k = 0; k < 60; ++k, zeta *= 0.5) {
            next = flow_jets(*m.target, v, js, zeta);
            en = phi_energy_of(next, *m.quad);
            if (en < e) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            tr.status = "stalled";
            return tr;
        }
        tr.rho_estimates.push_back(en / e);
        tr.steps.push_back({c.ell, c.sign, zeta});
        tr.energies.push_back(en);
        js = std::move(next);
        e = en;
    }
    if (e >= opt.stop_energy && opt.stop_energy > 0.0) tr.status = "max_iters";
    return tr;
}

struct ComposeResult {
    double direct = 0.0;
    double product = 0.0;
    double max_node_gap = 0.0;
};

// E_phi(u o psi) twice: from d(u o psi) directly, and from 1/4 tr(U P U P) with P = D D^T the
// push-forward Gram matrix of psi and U the pullback Gram matrix of u, both in a frame at psi(x).
inline ComposeResult compose_energy(const SmoothMap& u, const AnalyticMap& psi) {
    if (!u.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "composition needs an analytic map");
    std::size_t n = u.quad->size();
    std::vector<double> a(n), b(n), gap(n);
    parallel_for(n, [&](std::size_t i) {
        const auto& fp = u.quad->points[i];
        Vec z = psi.u(fp.position);
        Mat dpsi = psi.du(fp.position) * fp.tangent;
        Mat comp = u.fn().du(z) * dpsi;
        double ed = phi_energy_density(comp.transpose() * comp);
        if (!u.domain->implicit)
            throw Error(ErrorKind::RepresentationUnsupported, "domain frames at image points need an implicit chart");
        Mat e2 = ambient_frame(*u.domain, z).tangent;
        Mat d = e2.transpose() * dpsi;
        Mat ug = (u.fn().du(z) * e2).transpose() * (u.fn().du(z) * e2);
        Mat p = d * d.transpose();
        double ep = 0.25 * (ug * p * ug * p).trace();
        double w = u.quad->weights[i];
        a[i] = w * ed;
        b[i] = w * ep;
        gap[i] = std::abs(ed - ep);
    });
    ComposeResult r;
    r.direct = pairwise_sum(a);
    r.product = pairwise_sum(b);
    r.max_node_gap = *std::max_element(gap.begin(), gap.end());
    return r;
}

struct DiscreteDescentResult {
    SmoothMap map;
    std::vector<double> energies;
    std::vector<double> residuals;
    std::string status = "ok";
};

// Projected gradient descent on the grid energy; the gradient at node k is -w_k tau_k.
inline DiscreteDescentResult discrete_phi_descent(const SmoothMap& start, double step, int iters, double residual_tol = 1e-7) {
    if (start.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "discrete descent runs on grid maps");
    DiscreteDescentResult r{start, {}, {}, "ok"};
    auto sup = [](const std::vector<Vec>& t) {
        double s = 0.0;
        for (const auto& x : t) s = std::max(s, x.norm());
        return s;
    };
    double e = phi_energy(r.map);
    auto tau = tension_field(r.map);
    r.energies.push_back(e);
    r.residuals.push_back(sup(tau));
    for (int it = 0; it < iters && r.residuals.back() > residual_tol; ++it) {
        bool accepted = false;
        while (step > 1e-16) {
            std::vector<Vec> pts = r.map.grid().points;
            for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = project(*r.map.target, pts[i] + step * tau[i]);
            SmoothMap trial = r.map;
            trial.rep = GridMap{std::move(pts)};
            double et = phi_energy(trial);
            if (et <= e) {
                r.map = std::move(trial);
                e = et;
                accepted = true;
                step *= 1.25;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            r.status = "step_underflow";
            break;
        }
        tau = tension_field(r.map);
        r.energies.push_back(e);
        r.residuals.push_back(sup(tau));
    }
    return r;
}

}  // namespace phiharm
