#pragma once

#include "core.hpp"

#include <memory>
#include <optional>

namespace phiharm {

constexpr double kRankTol = 1e-8;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    bool periodic = false;
    // Power k of sin(t) in the volume element near the ends of a polar axis; 0 otherwise.
    int polar_exponent = 0;
};

enum class ChartKind { Sphere, Ellipsoid, Paraboloid, TorusFlat, Custom };

inline const char* to_string(ChartKind k) {
    switch (k) {
        case ChartKind::Sphere: return "sphere";
        case ChartKind::Ellipsoid: return "ellipsoid";
        case ChartKind::Paraboloid: return "paraboloid";
        case ChartKind::TorusFlat: return "torus";
        case ChartKind::Custom: return "custom";
    }
    return "custom";
}

// Zero set g(y) = 0 in R^q with codim components, used for projection and frames at ambient points.
struct LevelSet {
    int codim = 1;
    std::function<Vec(const Vec&)> g;
    std::function<Mat(const Vec&)> grad;               // codim x q
    std::function<std::vector<Mat>(const Vec&)> hess;  // codim matrices, q x q
};

struct ImmersionChart {
    int n = 0;
    int q = 0;
    std::vector<Interval> box;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;               // q x n, optional
    std::function<std::vector<Mat>(const Vec&)> hessian;   // q matrices n x n, optional
    ChartKind kind = ChartKind::Custom;
    Vec axes;
    std::optional<LevelSet> implicit;

    int codim() const { return q - n; }
    double residual(const Vec& y) const {
        if (kind == ChartKind::Sphere) return std::abs(y.norm() - 1.0);
        if (!implicit) return 0.0;
        return implicit->g(y).cwiseAbs().maxCoeff();
    }
};

struct SymmetricForm {
    Mat matrix;

    SymmetricForm() = default;
    explicit SymmetricForm(const Mat& m) : matrix(symmetrize(m)) {}

    int dim() const { return static_cast<int>(matrix.rows()); }
    const Vec& eigenvalues() const {
        if (!eig_) eig_ = std::make_shared<Vec>(sorted_eigenvalues(matrix));
        return *eig_;
    }
    double max_eigenvalue() const { return eigenvalues()[dim() - 1]; }
    double min_eigenvalue() const { return eigenvalues()[0]; }
    double value(const Vec& x) const { return x.dot(matrix * x); }

private:
    mutable std::shared_ptr<Vec> eig_;
};

struct FramedPoint {
    Vec params;
    Vec position;
    Mat jacobian;   // q x n
    Mat tangent;    // q x n, orthonormal
    Mat normal;     // q x (q-n), orthonormal
    Mat r;          // jacobian = tangent * r
    std::vector<Mat> sff;  // A_nu, n x n each
    Vec mean_curvature;

    int n() const { return static_cast<int>(tangent.cols()); }
    int q() const { return static_cast<int>(tangent.rows()); }
    int codim() const { return static_cast<int>(normal.cols()); }

    // B(X, Y) for tangent vectors given in frame coordinates.
    Vec second_form(const Vec& x, const Vec& y) const {
        Vec out = Vec::Zero(q());
        for (int k = 0; k < codim(); ++k) out += x.dot(sff[k] * y) * normal.col(k);
        return out;
    }
    Mat frame_inverse() const { return r.triangularView<Eigen::Upper>().solve(Mat::Identity(n(), n())); }
};

namespace detail {

enum class Factor { One, Sin, Cos };

inline double factor(Factor f, double a, int order) {
    switch (f) {
        case Factor::One: return order == 0 ? 1.0 : 0.0;
        case Factor::Sin: {
            switch (order % 4) {
                case 0: return std::sin(a);
                case 1: return std::cos(a);
                case 2: return -std::sin(a);
                default: return -std::cos(a);
            }
        }
        case Factor::Cos: {
            switch (order % 4) {
                case 0: return std::cos(a);
                case 1: return -std::sin(a);
                case 2: return -std::cos(a);
                default: return std::sin(a);
            }
        }
    }
    return 0.0;
}

// Hyperspherical coordinates: y_k = prod_j f_kj(a_j), exact derivatives by differentiating factors.
struct SphereProduct {
    int n;
    std::vector<std::vector<Factor>> f;

    explicit SphereProduct(int n_) : n(n_), f(n_ + 1, std::vector<Factor>(n_, Factor::One)) {
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < k; ++j) f[k][j] = Factor::Sin;
            f[k][k] = Factor::Cos;
        }
        for (int j = 0; j < n; ++j) f[n][j] = Factor::Sin;
    }

    double term(int k, const Vec& a, int i = -1, int j = -1) const {
        double v = 1.0;
        for (int s = 0; s < n; ++s) {
            int ord = (s == i) + (s == j);
            v *= factor(f[k][s], a[s], ord);
            if (v == 0.0) return 0.0;
        }
        return v;
    }
    Vec eval(const Vec& a) const {
        Vec y(n + 1);
        for (int k = 0; k <= n; ++k) y[k] = term(k, a);
        return y;
    }
    Mat jacobian(const Vec& a) const {
        Mat j(n + 1, n);
        for (int k = 0; k <= n; ++k)
            for (int s = 0; s < n; ++s) j(k, s) = term(k, a, s);
        return j;
    }
    std::vector<Mat> hessian(const Vec& a) const {
        std::vector<Mat> h(n + 1, Mat::Zero(n, n));
        for (int k = 0; k <= n; ++k)
            for (int s = 0; s < n; ++s)
                for (int t = s; t < n; ++t) {
                    h[k](s, t) = term(k, a, s, t);
                    h[k](t, s) = h[k](s, t);
                }
        return h;
    }
};

inline std::vector<Interval> sphere_box(int n) {
    std::vector<Interval> box;
    for (int j = 0; j + 1 < n; ++j) box.push_back({0.0, kPi, false, n - 1 - j});
    box.push_back({0.0, 2.0 * kPi, true, 0});
    return box;
}

}  // namespace detail

inline ImmersionChart sphere_chart(int n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "sphere dimension must be >= 1");
    auto sp = std::make_shared<detail::SphereProduct>(n);
    ImmersionChart c;
    c.n = n;
    c.q = n + 1;
    c.box = detail::sphere_box(n);
    c.kind = ChartKind::Sphere;
    c.eval = [sp](const Vec& a) { return sp->eval(a); };
    c.jacobian = [sp](const Vec& a) { return sp->jacobian(a); };
    c.hessian = [sp](const Vec& a) { return sp->hessian(a); };
    LevelSet ls;
    ls.codim = 1;
    ls.g = [](const Vec& y) { return Vec::Constant(1, y.squaredNorm() - 1.0); };
    ls.grad = [](const Vec& y) { return Mat(2.0 * y.transpose()); };
    ls.hess = [](const Vec& y) {
        return std::vector<Mat>{2.0 * Mat::Identity(y.size(), y.size())};
    };
    c.implicit = ls;
    return c;
}

inline ImmersionChart ellipsoid_chart(const Vec& axes) {
    int q = static_cast<int>(axes.size());
    if (q < 2) throw Error(ErrorKind::InvalidArgument, "ellipsoid needs at least two axes");
    if ((axes.array() <= 0.0).any()) throw Error(ErrorKind::InvalidArgument, "ellipsoid axes must be positive");
    int n = q - 1;
    auto sp = std::make_shared<detail::SphereProduct>(n);
    ImmersionChart c;
    c.n = n;
    c.q = q;
    c.box = detail::sphere_box(n);
    c.kind = ChartKind::Ellipsoid;
    c.axes = axes;
    c.eval = [sp, axes](const Vec& a) { return Vec(axes.cwiseProduct(sp->eval(a))); };
    c.jacobian = [sp, axes](const Vec& a) { return Mat(axes.asDiagonal() * sp->jacobian(a)); };
    c.hessian = [sp, axes](const Vec& a) {
        auto h = sp->hessian(a);
        for (std::size_t k = 0; k < h.size(); ++k) h[k] *= axes[k];
        return h;
    };
    Vec inv2 = axes.array().square().inverse();
    LevelSet ls;
    ls.g = [inv2](const Vec& y) { return Vec::Constant(1, y.cwiseProduct(y).dot(inv2) - 1.0); };
    ls.grad = [inv2](const Vec& y) { return Mat(2.0 * y.cwiseProduct(inv2).transpose()); };
    ls.hess = [inv2](const Vec&) { return std::vector<Mat>{Mat(2.0 * inv2.asDiagonal())}; };
    c.implicit = ls;
    return c;
}

// Graph of sum x_i^2 over the cube [-radius, radius]^n.
inline ImmersionChart paraboloid_chart(int n, double radius = 3.0) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "paraboloid dimension must be >= 1");
    ImmersionChart c;
    c.n = n;
    c.q = n + 1;
    c.box.assign(n, Interval{-radius, radius, false, 0});
    c.kind = ChartKind::Paraboloid;
    c.eval = [n](const Vec& x) {
        Vec y(n + 1);
        y.head(n) = x;
        y[n] = x.squaredNorm();
        return y;
    };
    c.jacobian = [n](const Vec& x) {
        Mat j = Mat::Zero(n + 1, n);
        j.topRows(n).setIdentity();
        j.row(n) = 2.0 * x.transpose();
        return j;
    };
    c.hessian = [n](const Vec&) {
        std::vector<Mat> h(n + 1, Mat::Zero(n, n));
        h[n] = 2.0 * Mat::Identity(n, n);
        return h;
    };
    LevelSet ls;
    ls.g = [n](const Vec& y) { return Vec::Constant(1, y.head(n).squaredNorm() - y[n]); };
    ls.grad = [n](const Vec& y) {
        Mat g(1, n + 1);
        g.leftCols(n) = 2.0 * y.head(n).transpose();
        g(0, n) = -1.0;
        return g;
    };
    ls.hess = [n](const Vec&) {
        Mat h = Mat::Zero(n + 1, n + 1);
        h.topLeftCorner(n, n).setIdentity();
        return std::vector<Mat>{2.0 * h};
    };
    c.implicit = ls;
    return c;
}

// Flat m-torus as the periodic cube [0, 2pi)^m sitting in R^{m+1} with last coordinate 0.
inline ImmersionChart torus_chart(int m) {
    if (m < 1) throw Error(ErrorKind::InvalidArgument, "torus dimension must be >= 1");
    ImmersionChart c;
    c.n = m;
    c.q = m + 1;
    c.box.assign(m, Interval{0.0, 2.0 * kPi, true, 0});
    c.kind = ChartKind::TorusFlat;
    c.eval = [m](const Vec& t) {
        Vec y = Vec::Zero(m + 1);
        y.head(m) = t;
        return y;
    };
    c.jacobian = [m](const Vec&) {
        Mat j = Mat::Zero(m + 1, m);
        j.topRows(m).setIdentity();
        return j;
    };
    c.hessian = [m](const Vec&) { return std::vector<Mat>(m + 1, Mat::Zero(m, m)); };
    LevelSet ls;
    ls.g = [m](const Vec& y) { return Vec::Constant(1, y[m]); };
    ls.grad = [m](const Vec&) {
        Mat g = Mat::Zero(1, m + 1);
        g(0, m) = 1.0;
        return g;
    };
    ls.hess = [m](const Vec&) { return std::vector<Mat>{Mat::Zero(m + 1, m + 1)}; };
    c.implicit = ls;
    return c;
}

inline Mat chart_jacobian(const ImmersionChart& c, const Vec& p) {
    if (c.jacobian) return c.jacobian(p);
    Mat j(c.q, c.n);
    for (int a = 0; a < c.n; ++a) {
        auto f = [&](double s) {
            Vec pp = p;
            pp[a] += s;
            return c.eval(pp);
        };
        j.col(a) = fd::richardson_d1(f, fd::step_for(p[a]));
    }
    return j;
}

inline std::vector<Mat> chart_hessian(const ImmersionChart& c, const Vec& p) {
    if (c.hessian) return c.hessian(p);
    std::vector<Mat> h(c.q, Mat::Zero(c.n, c.n));
    if (c.jacobian) {
        for (int b = 0; b < c.n; ++b) {
            auto f = [&](double s) {
                Vec pp = p;
                pp[b] += s;
                return c.jacobian(pp);
            };
            Mat d = fd::richardson_d1(f, fd::step_for(p[b]));
            for (int k = 0; k < c.q; ++k) h[k].col(b) = d.row(k).transpose();
        }
    } else {
        // eval-only charts: mixed second differences need a larger step to stay above roundoff
        for (int a = 0; a < c.n; ++a)
            for (int b = a; b < c.n; ++b) {
                auto d2 = [&](double s) {
                    double sa = s * (1.0 + std::abs(p[a])), sb = s * (1.0 + std::abs(p[b]));
                    auto at = [&](double x, double y) {
                        Vec pp = p;
                        pp[a] += x;
                        pp[b] += y;
                        return c.eval(pp);
                    };
                    return Vec((at(sa, sb) - at(sa, -sb) - at(-sa, sb) + at(-sa, -sb)) / (4.0 * sa * sb));
                };
                Vec v = (4.0 * d2(0.5e-3) - d2(1e-3)) / 3.0;
                for (int k = 0; k < c.q; ++k) h[k](a, b) = h[k](b, a) = v[k];
            }
    }
    for (auto& m : h) m = symmetrize(m);
    return h;
}

namespace detail {

// Modified Gram-Schmidt: j = e * r.
inline void mgs(const Mat& j, Mat& e, Mat& r) {
    int n = static_cast<int>(j.cols());
    e = j;
    r = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < a; ++b) {
            r(b, a) = e.col(b).dot(e.col(a));
            e.col(a) -= r(b, a) * e.col(b);
        }
        r(a, a) = e.col(a).norm();
        e.col(a) /= r(a, a);
    }
}

inline Mat complement(const Mat& e) {
    int q = static_cast<int>(e.rows()), n = static_cast<int>(e.cols());
    Eigen::HouseholderQR<Mat> qr(e);
    Mat full = qr.householderQ();
    Mat nrm = full.rightCols(q - n);
    // re-orthogonalize against e for tight orthonormality
    for (int k = 0; k < q - n; ++k) {
        nrm.col(k) -= e * (e.transpose() * nrm.col(k));
        for (int l = 0; l < k; ++l) nrm.col(k) -= nrm.col(l).dot(nrm.col(k)) * nrm.col(l);
        nrm.col(k).normalize();
    }
    return nrm;
}

// Orthonormal inward normals -(grad g) orthonormalized; also returns the matrix mapping grad rows to normals.
inline void implicit_normals(const LevelSet& ls, const Vec& y, Mat& nrm, Mat& coef) {
    Mat gt = ls.grad(y).transpose();  // q x codim
    Eigen::HouseholderQR<Mat> qr(gt);
    Mat rr = qr.matrixQR().topRows(ls.codim).triangularView<Eigen::Upper>();
    Mat qthin = qr.householderQ() * Mat::Identity(gt.rows(), ls.codim);
    for (int k = 0; k < ls.codim; ++k)
        if (rr(k, k) < 0) {
            rr.row(k) = -rr.row(k);
            qthin.col(k) = -qthin.col(k);
        }
    nrm = -qthin;
    // nrm = -gt * rinv, so coef = -rinv
    coef = -rr.triangularView<Eigen::Upper>().solve(Mat::Identity(ls.codim, ls.codim));
}

}  // namespace detail

inline FramedPoint build_frames(const ImmersionChart& c, const Vec& p) {
    FramedPoint fp;
    fp.params = p;
    fp.position = c.eval(p);
    fp.jacobian = chart_jacobian(c, p);
    Eigen::JacobiSVD<Mat> svd(fp.jacobian);
    const Vec& sv = svd.singularValues();
    if (!(sv[sv.size() - 1] > kRankTol * sv[0]))
        throw Error(ErrorKind::DegenerateFrame, "jacobian rank deficient at sampled parameters");
    detail::mgs(fp.jacobian, fp.tangent, fp.r);
    int n = c.n, k = c.codim();
    if (c.implicit && c.implicit->codim == k) {
        Mat coef;
        detail::implicit_normals(*c.implicit, fp.position, fp.normal, coef);
        for (int a = 0; a < k; ++a) {
            fp.normal.col(a) -= fp.tangent * (fp.tangent.transpose() * fp.normal.col(a));
            for (int b = 0; b < a; ++b) fp.normal.col(a) -= fp.normal.col(b).dot(fp.normal.col(a)) * fp.normal.col(b);
            fp.normal.col(a).normalize();
        }
    } else {
        fp.normal = detail::complement(fp.tangent);
    }
    auto h = chart_hessian(c, p);
    Mat rinv = fp.frame_inverse();
    fp.sff.resize(k);
    for (int a = 0; a < k; ++a) {
        Mat hn = Mat::Zero(n, n);
        for (int s = 0; s < c.q; ++s) hn += fp.normal(s, a) * h[s];
        fp.sff[a] = symmetrize(rinv.transpose() * hn * rinv);
    }
    if (k == 1 && !c.implicit && fp.sff[0].trace() < 0) {
        fp.normal = -fp.normal;
        fp.sff[0] = -fp.sff[0];
    }
    fp.mean_curvature = Vec::Zero(c.q);
    for (int a = 0; a < k; ++a) fp.mean_curvature += fp.sff[a].trace() * fp.normal.col(a);
    return fp;
}

inline Vec principal_curvatures(const FramedPoint& fp) {
    if (fp.codim() != 1) throw Error(ErrorKind::NotHypersurface, "principal curvatures need codimension 1");
    return sorted_eigenvalues(fp.sff[0]);
}

inline Mat sum_sq(const FramedPoint& fp) {
    Mat s = Mat::Zero(fp.n(), fp.n());
    for (const auto& a : fp.sff) s += a * a;
    return s;
}

inline SymmetricForm q_operator(const FramedPoint& fp) {
    Mat q = Mat::Zero(fp.n(), fp.n());
    for (const auto& a : fp.sff) q += 2.0 * a * a - a.trace() * a;
    return SymmetricForm(q);
}

// Ricci tensor from the Gauss equation, frame coordinates.
inline Mat gauss_ricci(const FramedPoint& fp) {
    Mat r = Mat::Zero(fp.n(), fp.n());
    for (const auto& a : fp.sff) r += a.trace() * a - a * a;
    return symmetrize(r);
}

// <R(X,Y)Z,W> = <B(X,W),B(Y,Z)> - <B(X,Z),B(Y,W)>
inline double gauss_curvature_tensor(const FramedPoint& fp, const Vec& x, const Vec& y, const Vec& z, const Vec& w) {
    return fp.second_form(x, w).dot(fp.second_form(y, z)) - fp.second_form(x, z).dot(fp.second_form(y, w));
}

inline double sectional_curvature(const FramedPoint& fp, const Vec& x, const Vec& y) {
    double den = x.squaredNorm() * y.squaredNorm() - std::pow(x.dot(y), 2);
    return gauss_curvature_tensor(fp, x, y, y, x) / den;
}

// Frame data at an ambient point of an implicitly described manifold.
struct AmbientFrame {
    Vec position;
    Mat tangent;  // q x n
    Mat normal;   // q x codim
    Mat proj;     // tangential projector
    std::vector<Mat> shape;  // ambient q x q with <S X, Y> = <B(X,Y), nu> on tangent vectors
    std::vector<Mat> dnormal;  // tangential part of -D nu as a q x q map on any ambient vector

    int codim() const { return static_cast<int>(normal.cols()); }
    Vec second_form(const Vec& x, const Vec& y) const {
        Vec out = Vec::Zero(position.size());
        for (int k = 0; k < codim(); ++k) out += x.dot(shape[k] * y) * normal.col(k);
        return out;
    }
    std::vector<Mat> frame_sff() const {
        std::vector<Mat> a;
        for (const auto& s : shape) a.push_back(symmetrize(tangent.transpose() * s * tangent));
        return a;
    }
};

inline AmbientFrame ambient_frame(const ImmersionChart& c, const Vec& y) {
    if (!c.implicit)
        throw Error(ErrorKind::RepresentationUnsupported, "ambient frames need an implicit description");
    const LevelSet& ls = *c.implicit;
    AmbientFrame f;
    f.position = y;
    Mat coef;
    detail::implicit_normals(ls, y, f.normal, coef);
    int q = static_cast<int>(y.size());
    f.proj = Mat::Identity(q, q) - f.normal * f.normal.transpose();
    Eigen::HouseholderQR<Mat> qr(f.normal);
    Mat full = qr.householderQ();
    f.tangent = full.rightCols(q - ls.codim);
    auto hs = ls.hess(y);
    for (int r = 0; r < ls.codim; ++r) {
        // nu_r = sum_c grad g_c * coef(c, r)
        Mat hc = Mat::Zero(q, q);
        for (int cc = 0; cc < ls.codim; ++cc) hc += coef(cc, r) * hs[cc];
        Mat d = -f.proj * hc;
        f.dnormal.push_back(d);
        f.shape.push_back(symmetrize(d * f.proj));
    }
    return f;
}

// Closest point on the manifold.
inline Vec project(const ImmersionChart& c, const Vec& z) {
    if (c.kind == ChartKind::Sphere) {
        double r = z.norm();
        if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorKind::ProjectionDivergence, "cannot normalize");
        return z / r;
    }
    if (c.kind == ChartKind::TorusFlat) {
        Vec y = z;
        y[y.size() - 1] = 0.0;
        return y;
    }
    if (!c.implicit) throw Error(ErrorKind::RepresentationUnsupported, "projection needs an implicit description");
    const LevelSet& ls = *c.implicit;
    int q = static_cast<int>(z.size()), k = ls.codim;
    Vec y = z;
    // Gauss-Newton onto the zero set
    for (int it = 0; it < 50; ++it) {
        Vec g = ls.g(y);
        if (g.cwiseAbs().maxCoeff() < 1e-15) break;
        Mat dg = ls.grad(y);
        y -= dg.transpose() * (dg * dg.transpose()).ldlt().solve(g);
    }
    // Newton on the Lagrange system for the closest point
    Vec lam = Vec::Zero(k);
    {
        Mat dg = ls.grad(y);
        lam = (dg * dg.transpose()).ldlt().solve(dg * (z - y));
    }
    for (int it = 0; it < 50; ++it) {
        Mat dg = ls.grad(y);
        auto hs = ls.hess(y);
        Vec f1 = y - z + dg.transpose() * lam;
        Vec f2 = ls.g(y);
        double res = std::max(f1.cwiseAbs().maxCoeff(), f2.cwiseAbs().maxCoeff());
        if (res < 1e-13) return y;
        Mat jac = Mat::Zero(q + k, q + k);
        jac.topLeftCorner(q, q).setIdentity();
        for (int cc = 0; cc < k; ++cc) jac.topLeftCorner(q, q) += lam[cc] * hs[cc];
        jac.topRightCorner(q, k) = dg.transpose();
        jac.bottomLeftCorner(k, q) = dg;
        Vec rhs(q + k);
        rhs << f1, f2;
        Vec step = jac.fullPivLu().solve(rhs);
        y -= step.head(q);
        lam -= step.tail(k);
        if (!y.allFinite()) break;
    }
    if (!y.allFinite() || ls.g(y).cwiseAbs().maxCoeff() > 1e-10)
        throw Error(ErrorKind::ProjectionDivergence, "closest-point iteration did not converge");
    return y;
}

enum class Scheme { ProductTrapezoid, MonteCarlo };

struct QuadratureSet {
    std::vector<FramedPoint> points;
    std::vector<double> weights;
    double total_volume = 0.0;
    Scheme scheme = Scheme::ProductTrapezoid;
    std::vector<int> resolution;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
    template <class F>
    double integrate(F&& f) const {
        auto v = map_nodes(points.size(), [&](std::size_t i) { return weights[i] * f(i); });
        return pairwise_sum(v);
    }
};

// Gauss rule for weight (1 - x^2)^gamma on [-1, 1] (Golub-Welsch).
inline void gauss_gegenbauer(int npts, double gamma, Vec& x, Vec& w) {
    Mat t = Mat::Zero(npts, npts);
    for (int k = 1; k < npts; ++k) {
        double kk = k;
        double b = std::sqrt(kk * (kk + 2.0 * gamma) / ((2.0 * kk + 2.0 * gamma + 1.0) * (2.0 * kk + 2.0 * gamma - 1.0)));
        t(k, k - 1) = t(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(t);
    x = es.eigenvalues();
    double mu0 = std::exp(0.5 * std::log(kPi) + std::lgamma(gamma + 1.0) - std::lgamma(gamma + 1.5));
    w.resize(npts);
    for (int k = 0; k < npts; ++k) w[k] = mu0 * std::pow(es.eigenvectors()(0, k), 2);
}

inline double metric_volume_factor(const FramedPoint& fp) { return std::abs(fp.r.diagonal().prod()); }

inline double polar_factor(const ImmersionChart& c, const Vec& p) {
    double s = 1.0;
    for (int a = 0; a < c.n; ++a)
        if (c.box[a].polar_exponent > 0) s *= std::pow(std::sin(p[a]), c.box[a].polar_exponent);
    return s;
}

inline QuadratureSet quadrature_from_params(const ImmersionChart& c, const std::vector<Vec>& params,
                                            const std::vector<double>& weights) {
    QuadratureSet qs;
    for (std::size_t i = 0; i < params.size(); ++i) {
        qs.points.push_back(build_frames(c, params[i]));
        qs.weights.push_back(weights[i]);
    }
    qs.total_volume = pairwise_sum(qs.weights);
    return qs;
}

// Periodic axes: offset trapezoid. Polar axes: Gauss rule for the sin^k factor. Other bounded axes: Gauss-Legendre.
inline QuadratureSet build_quadrature(const ImmersionChart& c, std::vector<int> resolution,
                                      Scheme scheme = Scheme::ProductTrapezoid, std::optional<std::uint64_t> seed = {}) {
    QuadratureSet qs;
    qs.scheme = scheme;
    if (scheme == Scheme::MonteCarlo) {
        if (!seed) throw Error(ErrorKind::InvalidArgument, "monte_carlo needs an explicit seed");
        if (resolution.size() != 1 || resolution[0] < 2)
            throw Error(ErrorKind::InvalidArgument, "monte_carlo resolution is a single sample count >= 2");
        qs.seed = *seed;
        qs.resolution = resolution;
        Rng rng(*seed);
        int count = resolution[0];
        double base = 1.0;
        std::vector<double> norm(c.n);
        for (int a = 0; a < c.n; ++a) {
            const Interval& iv = c.box[a];
            if (iv.polar_exponent > 0) {
                Vec x, w;
                gauss_gegenbauer(16, 0.5 * (iv.polar_exponent - 1), x, w);
                norm[a] = w.sum();
            } else {
                norm[a] = iv.hi - iv.lo;
            }
            base *= norm[a];
        }
        std::vector<Vec> params;
        std::vector<double> weights;
        while (static_cast<int>(qs.points.size()) < count) {
            Vec p(c.n);
            for (int a = 0; a < c.n; ++a) {
                const Interval& iv = c.box[a];
                if (iv.polar_exponent > 0) {
                    // rejection sampling from sin^k on [0, pi]
                    for (;;) {
                        double t = rng.uniform(0.0, kPi);
                        if (rng.uniform() <= std::pow(std::sin(t), iv.polar_exponent)) {
                            p[a] = t;
                            break;
                        }
                    }
                } else {
                    p[a] = rng.uniform(iv.lo, iv.hi);
                }
            }
            FramedPoint fp;
            try {
                fp = build_frames(c, p);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::DegenerateFrame) continue;
                throw;
            }
            double w = base / count * metric_volume_factor(fp) / polar_factor(c, p);
            qs.points.push_back(std::move(fp));
            qs.weights.push_back(w);
        }
        qs.total_volume = pairwise_sum(qs.weights);
        return qs;
    }
    if (resolution.size() == 1 && c.n > 1) resolution.assign(c.n, resolution[0]);
    if (static_cast<int>(resolution.size()) != c.n)
        throw Error(ErrorKind::InvalidArgument, "resolution must give one count per axis");
    for (int r : resolution)
        if (r < 2) throw Error(ErrorKind::InvalidArgument, "resolution must be >= 2 per axis");
    qs.resolution = resolution;
    std::vector<Vec> nodes(c.n), base(c.n);
    for (int a = 0; a < c.n; ++a) {
        const Interval& iv = c.box[a];
        int m = resolution[a];
        nodes[a].resize(m);
        base[a].resize(m);
        if (iv.periodic) {
            double h = (iv.hi - iv.lo) / m;
            for (int k = 0; k < m; ++k) {
                nodes[a][k] = iv.lo + (k + 0.5) * h;
                base[a][k] = h;
            }
        } else if (iv.polar_exponent > 0) {
            Vec x, w;
            gauss_gegenbauer(m, 0.5 * (iv.polar_exponent - 1), x, w);
            for (int k = 0; k < m; ++k) {
                // ascending angle order
                double xx = x[m - 1 - k];
                double t = std::acos(xx);
                nodes[a][k] = t;
                base[a][k] = w[m - 1 - k] / std::pow(std::sin(t), iv.polar_exponent);
            }
        } else {
            Vec x, w;
            gauss_gegenbauer(m, 0.0, x, w);
            double half = 0.5 * (iv.hi - iv.lo), mid = 0.5 * (iv.hi + iv.lo);
            for (int k = 0; k < m; ++k) {
                nodes[a][k] = mid + half * x[k];
                base[a][k] = half * w[k];
            }
        }
    }
    std::size_t total = 1;
    for (int r : resolution) total *= static_cast<std::size_t>(r);
    qs.points.resize(total);
    qs.weights.resize(total);
    // first axis varies slowest
    parallel_for(total, [&](std::size_t idx) {
        Vec p(c.n);
        double b = 1.0;
        std::size_t rem = idx;
        for (int a = c.n - 1; a >= 0; --a) {
            int k = static_cast<int>(rem % resolution[a]);
            rem /= resolution[a];
            p[a] = nodes[a][k];
            b *= base[a][k];
        }
        qs.points[idx] = build_frames(c, p);
        qs.weights[idx] = b * metric_volume_factor(qs.points[idx]);
    });
    qs.total_volume = pairwise_sum(qs.weights);
    return qs;
}

inline double sphere_volume(int n) {
    // |S^n| = 2 pi^{(n+1)/2} / Gamma((n+1)/2)
    return 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

}  // namespace phiharm
