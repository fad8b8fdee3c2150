#pragma once

#include "geometry.hpp"

namespace phiharm {

enum class SsuMethod { EigenExact, QuarticSearch, ClosedForm };

inline const char* to_string(SsuMethod m) {
    switch (m) {
        case SsuMethod::EigenExact: return "eigen_exact";
        case SsuMethod::QuarticSearch: return "quartic_search";
        case SsuMethod::ClosedForm: return "closed_form";
    }
    return "";
}

struct SsuVerdict {
    bool is_ssu = false;
    bool marginal = false;
    bool converged = true;
    double worst_value = -std::numeric_limits<double>::infinity();
    double tol = 0.0;
    Vec witness_point;
    Vec witness_direction;  // frame coordinates at the witness point
    int samples_tested = 0;
    SsuMethod method = SsuMethod::EigenExact;
};

struct QuarticOptions {
    int restarts = 64;
    int max_iters = 500;
    double grad_tol = 1e-12;
    std::uint64_t seed = 0;
};

inline double definiteness_tol(const FramedPoint& fp) {
    double amax = 0.0;
    for (const auto& a : fp.sff) amax = std::max(amax, a.cwiseAbs().maxCoeff());
    return 1e-9 * std::pow(1.0 + amax, 2);
}

inline SymmetricForm phi_form(const FramedPoint& fp) {
    Mat g = Mat::Zero(fp.n(), fp.n());
    for (const auto& a : fp.sff) g += 4.0 * a * a - a.trace() * a;
    return SymmetricForm(g);
}

// F_y(x) straight from the second fundamental form: sum_b 4|B(x,e_b)|^2 - <B(x,x),B(e_b,e_b)>.
inline double phi_functional(const FramedPoint& fp, const Vec& x) {
    double s = 0.0;
    for (int b = 0; b < fp.n(); ++b) {
        Vec eb = Vec::Unit(fp.n(), b);
        s += 4.0 * fp.second_form(x, eb).squaredNorm() - fp.second_form(x, x).dot(fp.second_form(eb, eb));
    }
    return s;
}

inline void finalize(SsuVerdict& v) {
    v.is_ssu = v.worst_value < -v.tol;
    v.marginal = !v.is_ssu && std::abs(v.worst_value) <= v.tol;
}

inline SsuVerdict check_phi_ssu_at(const FramedPoint& fp) {
    SsuVerdict v;
    auto g = phi_form(fp);
    Eigen::SelfAdjointEigenSolver<Mat> es(g.matrix);
    v.worst_value = es.eigenvalues()[fp.n() - 1];
    v.witness_direction = es.eigenvectors().col(fp.n() - 1);
    v.witness_point = fp.params;
    v.tol = definiteness_tol(fp);
    v.samples_tested = 1;
    finalize(v);
    return v;
}

inline SsuVerdict check_phi_ssu(const std::vector<FramedPoint>& pts) {
    SsuVerdict v;
    v.method = SsuMethod::EigenExact;
    for (const auto& fp : pts) {
        auto s = check_phi_ssu_at(fp);
        v.tol = std::max(v.tol, s.tol);
        if (s.worst_value > v.worst_value) {
            v.worst_value = s.worst_value;
            v.witness_point = s.witness_point;
            v.witness_direction = s.witness_direction;
        }
        ++v.samples_tested;
    }
    finalize(v);
    return v;
}

inline SsuVerdict check_phi_ssu(const ImmersionChart&, const QuadratureSet& quad) { return check_phi_ssu(quad.points); }

inline bool hypersurface_phi_criterion(const Vec& lams) {
    int n = static_cast<int>(lams.size());
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "need at least two principal curvatures");
    return lams[0] > 0.0 && lams[n - 1] < lams.head(n - 1).sum() / 3.0;
}

inline bool hypersurface_p_criterion(const Vec& lams, double p) {
    int n = static_cast<int>(lams.size());
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "need at least two principal curvatures");
    if (p < 2.0) throw Error(ErrorKind::InvalidArgument, "p must be >= 2");
    return lams[0] > 0.0 && lams[n - 1] < lams.head(n - 1).sum() / (p - 1.0);
}

// F_{p,y}(x) = (p-2)|B(x,x)|^2 + <Q x, x>
inline double p_functional(const FramedPoint& fp, double p, const Vec& x) {
    double b2 = 0.0;
    for (const auto& a : fp.sff) b2 += std::pow(x.dot(a * x), 2);
    return (p - 2.0) * b2 + q_operator(fp).value(x);
}

namespace detail {

struct QuarticModel {
    std::vector<Mat> a;
    Mat q;
    double p;

    double value(const Vec& x) const {
        double b2 = 0.0;
        for (const auto& m : a) b2 += std::pow(x.dot(m * x), 2);
        return (p - 2.0) * b2 + x.dot(q * x);
    }
    Vec grad(const Vec& x) const {
        Vec g = 2.0 * q * x;
        for (const auto& m : a) g += 4.0 * (p - 2.0) * x.dot(m * x) * (m * x);
        return g;
    }
};

struct AscentResult {
    Vec x;
    double value;
    bool converged;
};

inline AscentResult ascend(const QuarticModel& m, Vec x, const QuarticOptions& opt) {
    x.normalize();
    double f = m.value(x);
    double step = 1.0;
    double scale = 1.0 + m.q.cwiseAbs().maxCoeff();
    for (const auto& a : m.a) scale += std::abs(m.p - 2.0) * a.squaredNorm();
    for (int it = 0; it < opt.max_iters; ++it) {
        Vec g = m.grad(x);
        Vec gt = g - g.dot(x) * x;
        double gn = gt.norm();
        if (gn <= opt.grad_tol) return {x, f, true};
        step = std::min(1.0, 2.0 * step);
        bool moved = false;
        while (step > 1e-20) {
            Vec xn = (x + step * gt).normalized();
            double fn = m.value(xn);
            if (fn >= f + 1e-4 * step * gn * gn) {
                x = xn;
                f = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        // stationary to working precision
        if (!moved) return {x, f, gn <= 1e-7 * scale};
    }
    Vec g = m.grad(x);
    return {x, f, (g - g.dot(x) * x).norm() <= 1e-7 * scale};
}

}  // namespace detail

inline SsuVerdict check_p_ssu(const FramedPoint& fp, double p, const QuarticOptions& opt = {}) {
    if (p < 2.0) throw Error(ErrorKind::InvalidArgument, "p must be >= 2");
    detail::QuarticModel m{fp.sff, q_operator(fp).matrix, p};
    int n = fp.n();
    std::vector<Vec> starts;
    Rng rng(opt.seed);
    for (int r = 0; r < opt.restarts; ++r) starts.push_back(rng.unit_vec(n));
    // structured starts: eigenvectors of Q and of each shape operator
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(m.q);
        for (int k = 0; k < n; ++k) starts.push_back(es.eigenvectors().col(k));
        for (const auto& a : fp.sff) {
            Eigen::SelfAdjointEigenSolver<Mat> ea(a);
            for (int k = 0; k < n; ++k) starts.push_back(ea.eigenvectors().col(k));
        }
    }
    std::vector<detail::AscentResult> res(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) { res[i] = detail::ascend(m, starts[i], opt); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.size(); ++i)
        if (res[i].value > res[best].value) best = i;
    SsuVerdict v;
    v.method = SsuMethod::QuarticSearch;
    v.worst_value = res[best].value;
    v.witness_direction = res[best].x;
    v.witness_point = fp.params;
    v.converged = res[best].converged;
    v.samples_tested = 1;
    v.tol = definiteness_tol(fp);
    finalize(v);
    return v;
}

inline bool minimal_in_sphere_criterion(int k, double ric_lower) { return ric_lower > 0.75 * k; }

inline bool minimal_in_ellipsoid_criterion(int k, double ric_lower, const Vec& axes) {
    double amax = axes.maxCoeff(), amin = axes.minCoeff();
    return ric_lower > 0.75 * k * amax * amax / std::pow(amin, 4);
}

inline double b1_threshold(int k) {
    if (k <= 4) throw Error(ErrorKind::DimensionTooSmall, "the B1 bound needs k > 4");
    return (k - 4.0) / (std::sqrt(static_cast<double>(k)) + 4.0);
}

inline bool b1_norm_criterion(int k, double b1_norm_sq) { return b1_norm_sq < b1_threshold(k); }

inline std::pair<double, double> ellipsoid_curvature_bounds(const Vec& axes) {
    double amax = axes.maxCoeff(), amin = axes.minCoeff();
    return {amin / (amax * amax), amax / (amin * amin)};
}

// Point sample with prescribed shape operators; tangent/normal frames are coordinate axes.
inline FramedPoint synthetic_framed_point(const std::vector<Mat>& sff) {
    FramedPoint fp;
    int n = static_cast<int>(sff.front().rows());
    int k = static_cast<int>(sff.size());
    int q = n + k;
    Mat id = Mat::Identity(q, q);
    fp.params = Vec::Zero(n);
    fp.position = Vec::Zero(q);
    fp.tangent = id.leftCols(n);
    fp.normal = id.rightCols(k);
    fp.jacobian = fp.tangent;
    fp.r = Mat::Identity(n, n);
    for (const auto& a : sff) fp.sff.push_back(symmetrize(a));
    fp.mean_curvature = Vec::Zero(q);
    for (int a = 0; a < k; ++a) fp.mean_curvature += fp.sff[a].trace() * fp.normal.col(a);
    return fp;
}

// Convex hypersurface sample: eigenvalues log-uniform in [lo, hi], random orthogonal conjugation.
inline FramedPoint random_convex_hypersurface_sample(Rng& rng, int n, double lo = 0.2, double hi = 5.0) {
    Vec lam(n);
    for (int i = 0; i < n; ++i) lam[i] = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    Mat o = rng.orthogonal(n);
    return synthetic_framed_point({o * lam.asDiagonal() * o.transpose()});
}

}  // namespace phiharm
