#pragma once

#include "geometry.hpp"

#include <variant>

namespace phiharm {

// du given as a q_N x q_M matrix acting on tangent vectors of the domain.
struct AnalyticMap {
    std::function<Vec(const Vec&)> u;
    std::function<Mat(const Vec&)> du;
};

// One target point per quadrature node of a periodic product grid.
struct GridMap {
    std::vector<Vec> points;
};

struct SmoothMap {
    std::shared_ptr<const ImmersionChart> domain;
    std::shared_ptr<const ImmersionChart> target;
    std::shared_ptr<const QuadratureSet> quad;
    std::variant<AnalyticMap, GridMap> rep;

    int m() const { return domain->n; }
    int n() const { return target->n; }
    bool analytic() const { return std::holds_alternative<AnalyticMap>(rep); }
    const AnalyticMap& fn() const { return std::get<AnalyticMap>(rep); }
    const GridMap& grid() const { return std::get<GridMap>(rep); }
};

// Image point and du(e_i) columns (q_N x m) at a quadrature node.
struct Jet {
    Vec y;
    Mat du;
};

constexpr double kOnManifoldTol = 1e-9;

inline Mat tangent_projector(const ImmersionChart& c, const Vec& y) {
    int q = static_cast<int>(y.size());
    if (c.kind == ChartKind::Sphere) return Mat::Identity(q, q) - y * y.transpose() / y.squaredNorm();
    if (c.kind == ChartKind::TorusFlat) {
        Mat p = Mat::Identity(q, q);
        p(q - 1, q - 1) = 0.0;
        return p;
    }
    return ambient_frame(c, y).proj;
}

inline Mat chart_projector(const ImmersionChart& c, const Vec& params) {
    Mat j = chart_jacobian(c, params);
    return j * (j.transpose() * j).ldlt().solve(j.transpose());
}

// ---- construction -------------------------------------------------------------------------

inline SmoothMap make_analytic_map(std::shared_ptr<const ImmersionChart> domain, std::shared_ptr<const QuadratureSet> quad,
                                   std::shared_ptr<const ImmersionChart> target, AnalyticMap f, bool validate = true) {
    SmoothMap m{domain, target, quad, std::move(f)};
    if (validate && !quad->points.empty()) {
        std::size_t stride = std::max<std::size_t>(1, quad->size() / 7);
        for (std::size_t i = 0; i < quad->size(); i += stride) {
            const auto& fp = quad->points[i];
            Vec y = m.fn().u(fp.position);
            if (target->residual(y) > kOnManifoldTol)
                throw Error(ErrorKind::InvalidArgument, "map image leaves the target");
            Mat du = m.fn().du(fp.position) * fp.tangent;
            for (int a = 0; a < domain->n; ++a) {
                auto g = [&](double s) {
                    Vec p = fp.params;
                    p[a] += s;
                    return m.fn().u(domain->eval(p));
                };
                Vec d = fd::richardson_d1(g, fd::step_for(fp.params[a]));
                Vec an = m.fn().du(fp.position) * fp.jacobian.col(a);
                if ((d - an).norm() > 1e-6 * (1.0 + an.norm()))
                    throw Error(ErrorKind::InvalidArgument, "analytic differential disagrees with finite differences");
            }
        }
    }
    return m;
}

inline SmoothMap identity_map(std::shared_ptr<const ImmersionChart> chart, std::shared_ptr<const QuadratureSet> quad) {
    int q = chart->q;
    AnalyticMap f{[](const Vec& x) { return x; }, [q](const Vec&) { return Mat(Mat::Identity(q, q)); }};
    return make_analytic_map(chart, quad, chart, std::move(f));
}

inline SmoothMap constant_map(std::shared_ptr<const ImmersionChart> domain, std::shared_ptr<const QuadratureSet> quad,
                              std::shared_ptr<const ImmersionChart> target, const Vec& point) {
    int qn = target->q, qm = domain->q;
    AnalyticMap f{[point](const Vec&) { return point; }, [qn, qm](const Vec&) { return Mat(Mat::Zero(qn, qm)); }};
    return make_analytic_map(domain, quad, target, std::move(f));
}

// z -> z^k on the unit circle.
inline AnalyticMap circle_power(int k) {
    AnalyticMap f;
    f.u = [k](const Vec& x) {
        double th = std::atan2(x[1], x[0]);
        return Vec((Vec(2) << std::cos(k * th), std::sin(k * th)).finished());
    };
    f.du = [k](const Vec& x) {
        double th = std::atan2(x[1], x[0]);
        double c = k * std::cos((k - 1) * th), s = k * std::sin((k - 1) * th);
        return Mat((Mat(2, 2) << c, -s, s, c).finished());
    };
    return f;
}

// S^1 -> S^n, (x1, x2) -> (x1, x2, 0, ..., 0).
inline AnalyticMap equatorial(int target_q) {
    AnalyticMap f;
    f.u = [target_q](const Vec& x) {
        Vec y = Vec::Zero(target_q);
        y.head(2) = x.head(2);
        return y;
    };
    f.du = [target_q](const Vec&) {
        Mat d = Mat::Zero(target_q, 2);
        d.topLeftCorner(2, 2).setIdentity();
        return d;
    };
    return f;
}

namespace detail {

struct GridLayout {
    std::vector<int> res;
    std::vector<std::size_t> stride;
    std::vector<double> h;

    std::size_t neighbor(std::size_t idx, int axis, int dir) const {
        std::size_t k = (idx / stride[axis]) % res[axis];
        std::size_t kn = (k + res[axis] + dir) % res[axis];
        return idx + (kn - k) * stride[axis];
    }
};

inline GridLayout grid_layout(const ImmersionChart& c, const QuadratureSet& q) {
    if (q.scheme != Scheme::ProductTrapezoid || static_cast<int>(q.resolution.size()) != c.n)
        throw Error(ErrorKind::RepresentationUnsupported, "grid maps need a product grid");
    for (const auto& iv : c.box)
        if (!iv.periodic) throw Error(ErrorKind::RepresentationUnsupported, "grid maps need a periodic domain");
    GridLayout g;
    g.res = q.resolution;
    g.stride.assign(c.n, 1);
    for (int a = c.n - 2; a >= 0; --a) g.stride[a] = g.stride[a + 1] * g.res[a + 1];
    for (int a = 0; a < c.n; ++a) g.h.push_back((c.box[a].hi - c.box[a].lo) / g.res[a]);
    return g;
}

}  // namespace detail

inline SmoothMap make_grid_map(std::shared_ptr<const ImmersionChart> domain, std::shared_ptr<const QuadratureSet> quad,
                               std::shared_ptr<const ImmersionChart> target, std::vector<Vec> points) {
    detail::grid_layout(*domain, *quad);
    if (points.size() != quad->size()) throw Error(ErrorKind::InvalidArgument, "one grid point per node required");
    for (auto& p : points) p = project(*target, p);
    return SmoothMap{domain, target, quad, GridMap{std::move(points)}};
}

inline SmoothMap sample_to_grid(const SmoothMap& m) {
    std::vector<Vec> pts;
    for (const auto& fp : m.quad->points) pts.push_back(m.fn().u(fp.position));
    return make_grid_map(m.domain, m.quad, m.target, std::move(pts));
}

// ---- jets ---------------------------------------------------------------------------------

inline std::vector<Jet> grid_jets(const SmoothMap& m, const std::vector<Vec>& pts) {
    auto lay = detail::grid_layout(*m.domain, *m.quad);
    std::vector<Jet> out(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        const auto& fp = m.quad->points[i];
        Mat dp(m.target->q, m.m());
        for (int a = 0; a < m.m(); ++a)
            dp.col(a) = (pts[lay.neighbor(i, a, +1)] - pts[lay.neighbor(i, a, -1)]) / (2.0 * lay.h[a]);
        out[i] = {pts[i], dp * fp.frame_inverse()};
    });
    return out;
}

inline std::vector<Jet> jets(const SmoothMap& m) {
    if (!m.analytic()) return grid_jets(m, m.grid().points);
    std::vector<Jet> out(m.quad->size());
    parallel_for(out.size(), [&](std::size_t i) {
        const auto& fp = m.quad->points[i];
        out[i] = {m.fn().u(fp.position), m.fn().du(fp.position) * fp.tangent};
    });
    return out;
}

// Jets of x -> F(x) by Richardson central differences in chart parameters.
template <class F>
std::vector<Jet> jets_by_fd(const ImmersionChart& domain, const QuadratureSet& quad, F&& f) {
    std::vector<Jet> out(quad.size());
    parallel_for(out.size(), [&](std::size_t i) {
        const auto& fp = quad.points[i];
        Vec y = f(fp.position);
        Mat dp(y.size(), domain.n);
        for (int a = 0; a < domain.n; ++a) {
            auto g = [&](double s) {
                Vec p = fp.params;
                p[a] += s;
                return f(domain.eval(p));
            };
            dp.col(a) = fd::richardson_d1(g, fd::step_for(fp.params[a]));
        }
        out[i] = {y, dp * fp.frame_inverse()};
    });
    return out;
}

// ---- densities ----------------------------------------------------------------------------

inline Mat pullback_gram(const Jet& j) { return j.du.transpose() * j.du; }

inline Mat pullback_gram(const SmoothMap& m, std::size_t node) {
    if (m.analytic()) {
        const auto& fp = m.quad->points[node];
        Mat du = m.fn().du(fp.position) * fp.tangent;
        return du.transpose() * du;
    }
    return pullback_gram(grid_jets(m, m.grid().points)[node]);
}

inline double phi_energy_density(const Mat& u) { return 0.25 * u.squaredNorm(); }

struct EnergyDensities {
    double e;
    double e_p;
};

inline EnergyDensities energy_densities(const Mat& u, double p) {
    double tr = u.trace();
    return {0.5 * tr, std::pow(std::max(tr, 0.0), 0.5 * p) / p};
}

inline double phi_energy_of(const std::vector<Jet>& js, const QuadratureSet& quad) {
    auto v = map_nodes(js.size(), [&](std::size_t i) { return quad.weights[i] * phi_energy_density(pullback_gram(js[i])); });
    return pairwise_sum(v);
}

inline double phi_energy(const SmoothMap& m) { return phi_energy_of(jets(m), *m.quad); }

struct EnergySummary {
    double e;
    double e_phi;
    double e_p;
};

inline EnergySummary energies(const SmoothMap& m, double p) {
    auto js = jets(m);
    std::vector<double> a(js.size()), b(js.size()), c(js.size());
    parallel_for(js.size(), [&](std::size_t i) {
        Mat u = pullback_gram(js[i]);
        auto d = energy_densities(u, p);
        double w = m.quad->weights[i];
        a[i] = w * d.e;
        b[i] = w * phi_energy_density(u);
        c[i] = w * d.e_p;
    });
    return {pairwise_sum(a), pairwise_sum(b), pairwise_sum(c)};
}

// ---- tension ------------------------------------------------------------------------------

namespace detail {

// sigma = C C^T C with C = du P_M; sigma(X) = sum_j <du X, du e_j> du e_j.
inline Mat stress_matrix(const AnalyticMap& f, const ImmersionChart& domain, const Vec& params) {
    Vec x = domain.eval(params);
    Mat c = f.du(x) * chart_projector(domain, params);
    return c * c.transpose() * c;
}

}  // namespace detail

inline std::vector<Vec> tension_field(const SmoothMap& m) {
    std::vector<Vec> out(m.quad->size());
    if (m.analytic()) {
        const auto& f = m.fn();
        parallel_for(out.size(), [&](std::size_t i) {
            const auto& fp = m.quad->points[i];
            Mat dual = fp.tangent * fp.frame_inverse().transpose();  // columns: gradients of the chart coordinates
            Vec acc = Vec::Zero(m.target->q);
            for (int a = 0; a < m.m(); ++a) {
                auto g = [&](double s) {
                    Vec p = fp.params;
                    p[a] += s;
                    return detail::stress_matrix(f, *m.domain, p);
                };
                Mat ds = fd::richardson_d1(g, fd::step_for(fp.params[a]));
                acc += ds * dual.col(a);
            }
            Vec y = f.u(fp.position);
            out[i] = tangent_projector(*m.target, y) * acc;
        });
        return out;
    }
    const auto& pts = m.grid().points;
    auto js = grid_jets(m, pts);
    auto lay = detail::grid_layout(*m.domain, *m.quad);
    std::vector<Mat> sig(js.size());
    for (std::size_t i = 0; i < js.size(); ++i) sig[i] = js[i].du * pullback_gram(js[i]);
    parallel_for(out.size(), [&](std::size_t i) {
        Mat rinv = m.quad->points[i].frame_inverse();
        Vec acc = Vec::Zero(m.target->q);
        for (int a = 0; a < m.m(); ++a) {
            Mat d = (sig[lay.neighbor(i, a, +1)] - sig[lay.neighbor(i, a, -1)]) / (2.0 * lay.h[a]);
            acc += d * rinv.row(a).transpose();
        }
        out[i] = tangent_projector(*m.target, pts[i]) * acc;
    });
    return out;
}

inline Vec phi_tension(const SmoothMap& m, std::size_t node) {
    if (!m.analytic()) return tension_field(m)[node];
    SmoothMap one = m;
    auto q = std::make_shared<QuadratureSet>();
    q->points = {m.quad->points[node]};
    q->weights = {m.quad->weights[node]};
    one.quad = q;
    return tension_field(one)[0];
}

inline double tension_sup(const SmoothMap& m) {
    double s = 0.0;
    for (const auto& t : tension_field(m)) s = std::max(s, t.norm());
    return s;
}

// ---- variations ---------------------------------------------------------------------------

enum class Side { Target, Domain };

struct VariationSpec {
    enum class Mode { AmbientProjection, Callback } mode = Mode::AmbientProjection;
    Vec direction;
    Side side = Side::Target;
    std::function<Vec(const Vec&)> callback;  // domain point -> vector tangent to the target at u(x)
    std::string description;

    static VariationSpec projection(const Vec& v, Side s = Side::Target, std::string d = "") {
        VariationSpec spec;
        spec.mode = Mode::AmbientProjection;
        spec.direction = v;
        spec.side = s;
        spec.description = std::move(d);
        return spec;
    }
    static VariationSpec field(std::function<Vec(const Vec&)> f, std::string d = "") {
        VariationSpec spec;
        spec.mode = Mode::Callback;
        spec.callback = std::move(f);
        spec.description = std::move(d);
        return spec;
    }
};

// Variation vector at a domain point x with image y.
inline Vec variation_vector(const SmoothMap& m, const VariationSpec& v, const Vec& x, const Vec& y) {
    if (v.mode == VariationSpec::Mode::Callback) {
        Vec w = v.callback(x);
        Vec t = tangent_projector(*m.target, y) * w;
        if ((w - t).norm() > 1e-10 * (1.0 + w.norm()))
            throw Error(ErrorKind::InvalidArgument, "variation field is not tangent to the target");
        return t;
    }
    if (v.side == Side::Target) return tangent_projector(*m.target, y) * v.direction;
    if (!m.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "domain-side variations need an analytic map");
    return m.fn().du(x) * (tangent_projector(*m.domain, x) * v.direction);
}

inline double first_variation(const SmoothMap& m, const VariationSpec& v) {
    auto tau = tension_field(m);
    std::vector<double> terms(tau.size());
    parallel_for(tau.size(), [&](std::size_t i) {
        const auto& fp = m.quad->points[i];
        Vec y = m.analytic() ? m.fn().u(fp.position) : m.grid().points[i];
        terms[i] = -m.quad->weights[i] * variation_vector(m, v, fp.position, y).dot(tau[i]);
    });
    return pairwise_sum(terms);
}

// E_phi(Pi(u + t v)) with closest-point retraction.
inline double retracted_energy(const SmoothMap& m, const VariationSpec& v, double t) {
    if (!m.analytic()) {
        const auto& pts = m.grid().points;
        std::vector<Vec> moved(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            moved[i] = project(*m.target, pts[i] + t * variation_vector(m, v, m.quad->points[i].position, pts[i]));
        });
        return phi_energy_of(grid_jets(m, moved), *m.quad);
    }
    const auto& f = m.fn();
    auto js = jets_by_fd(*m.domain, *m.quad, [&](const Vec& x) {
        Vec y = f.u(x);
        return project(*m.target, y + t * variation_vector(m, v, x, y));
    });
    return phi_energy_of(js, *m.quad);
}

inline double first_variation_fd(const SmoothMap& m, const VariationSpec& v, double h = 1e-4) {
    return fd::richardson_d1_scalar([&](double t) { return retracted_energy(m, v, t); }, h);
}

// exp_y(w) on the target; closed form on round spheres, RK4 with projection otherwise.
inline Vec geodesic_exp(const ImmersionChart& c, const Vec& y, const Vec& w) {
    double len = w.norm();
    if (len == 0.0) return y;
    if (c.kind == ChartKind::Sphere) return std::cos(len) * y + std::sin(len) * (w / len);
    if (c.kind == ChartKind::TorusFlat) return project(c, y + w);
    int steps = std::max(8, static_cast<int>(std::ceil(64.0 * len)));
    double h = 1.0 / steps;
    Vec pos = y, vel = w;
    double speed = len;
    auto acc = [&](const Vec& p, const Vec& v) {
        auto fr = ambient_frame(c, p);
        return fr.second_form(fr.proj * v, fr.proj * v);
    };
    for (int s = 0; s < steps; ++s) {
        Vec k1p = vel, k1v = acc(pos, vel);
        Vec k2p = vel + 0.5 * h * k1v, k2v = acc(pos + 0.5 * h * k1p, k2p);
        Vec k3p = vel + 0.5 * h * k2v, k3v = acc(pos + 0.5 * h * k2p, k3p);
        Vec k4p = vel + h * k3v, k4v = acc(pos + h * k3p, k4p);
        pos += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        vel += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        try {
            pos = project(c, pos);
        } catch (const Error&) {
            throw Error(ErrorKind::GeodesicIntegrationFailure, "geodesic left the projection neighbourhood");
        }
        vel = tangent_projector(c, pos) * vel;
        double vn = vel.norm();
        if (!std::isfinite(vn) || vn == 0.0) throw Error(ErrorKind::GeodesicIntegrationFailure, "velocity collapsed");
        vel *= speed / vn;
    }
    return pos;
}

inline double geodesic_energy(const SmoothMap& m, const VariationSpec& v, double t) {
    if (!m.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "geodesic homotopy needs an analytic map");
    const auto& f = m.fn();
    auto js = jets_by_fd(*m.domain, *m.quad, [&](const Vec& x) {
        Vec y = f.u(x);
        return geodesic_exp(*m.target, y, t * variation_vector(m, v, x, y));
    });
    return phi_energy_of(js, *m.quad);
}

inline double second_variation_fd(const SmoothMap& m, const VariationSpec& v, double h = 1e-3) {
    double e[5];
    for (int k = 0; k < 5; ++k) e[k] = k == 2 ? phi_energy(m) : geodesic_energy(m, v, (k - 2) * h);
    return fd::d2_5pt(e, h);
}

struct SecondVariation {
    double value = 0.0;
    double terms[4] = {0.0, 0.0, 0.0, 0.0};
};

// Four integrals along a geodesic homotopy: two mixed stress terms, the weighted gradient term and curvature.
inline SecondVariation second_variation(const SmoothMap& m, const VariationSpec& v) {
    if (!m.analytic()) throw Error(ErrorKind::RepresentationUnsupported, "second variation needs an analytic map");
    const auto& f = m.fn();
    std::size_t n = m.quad->size();
    std::vector<double> t[4];
    for (auto& x : t) x.assign(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const auto& fp = m.quad->points[i];
        Vec y = f.u(fp.position);
        Mat du = f.du(fp.position) * fp.tangent;
        Vec vv = variation_vector(m, v, fp.position, y);
        Mat dp(y.size(), m.m());
        for (int a = 0; a < m.m(); ++a) {
            auto g = [&](double s) {
                Vec p = fp.params;
                p[a] += s;
                Vec x = m.domain->eval(p);
                return variation_vector(m, v, x, f.u(x));
            };
            dp.col(a) = fd::richardson_d1(g, fd::step_for(fp.params[a]));
        }
        Mat p = tangent_projector(*m.target, y);
        Mat dv = p * dp * fp.frame_inverse();  // columns: nabla_{e_i} v
        Mat u = du.transpose() * du;
        Mat mm = dv.transpose() * du;
        double w = m.quad->weights[i];
        t[0][i] = w * mm.squaredNorm();
        t[1][i] = w * (mm * mm).trace();
        t[2][i] = w * (u * (dv.transpose() * dv)).trace();
        double curv = 0.0;
        if (m.target->kind == ChartKind::TorusFlat) {
            curv = 0.0;
        } else {
            auto fr = ambient_frame(*m.target, y);
            Vec bvv = fr.second_form(vv, vv);
            for (int a = 0; a < m.m(); ++a)
                for (int b = 0; b < m.m(); ++b) {
                    if (u(a, b) == 0.0) continue;
                    double r = fr.second_form(vv, du.col(b)).dot(fr.second_form(du.col(a), vv)) -
                               bvv.dot(fr.second_form(du.col(a), du.col(b)));
                    curv += u(a, b) * r;
                }
        }
        t[3][i] = w * curv;
    });
    SecondVariation sv;
    for (int k = 0; k < 4; ++k) {
        sv.terms[k] = pairwise_sum(t[k]);
        sv.value += sv.terms[k];
    }
    return sv;
}

inline double harmonicity_tol(double e_phi) { return 1e-5 * (1.0 + e_phi); }

}  // namespace phiharm
